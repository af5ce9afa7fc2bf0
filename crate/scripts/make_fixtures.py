#!/usr/bin/env python3
"""Train the bundled fixture models and dump them in the axsynth model schema.

Training happens here, outside the toolkit. Every model is fit on min-max
scaled features and the coefficients are then mapped back onto raw feature
units, so the exported files consume raw CSV rows.
"""
import json
import os
import sys

import numpy as np
from sklearn import datasets
from sklearn.neural_network import MLPClassifier, MLPRegressor
from sklearn.svm import LinearSVC
from sklearn.tree import DecisionTreeClassifier

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "fixtures")
SEED = 1


def write_csv(name, x, y):
    path = os.path.join(OUT, f"{name}.csv")
    with open(path, "w") as f:
        f.write(",".join([f"f{i}" for i in range(x.shape[1])] + ["label"]) + "\n")
        for row, label in zip(x, y):
            f.write(",".join(repr(float(v)) for v in row) + f",{int(label)}\n")


def minmax(x):
    lo = x.min(axis=0)
    hi = x.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return lo, span


def unscale_first_layer(w, b, lo, span):
    # w: (inputs, outputs) acting on (x - lo) / span
    w_raw = w / span[:, None]
    b_raw = b - (lo / span) @ w
    return w_raw, b_raw


def num(v):
    return float(round(float(v), 10))


def dump(name, model):
    with open(os.path.join(OUT, f"{name}.json"), "w") as f:
        json.dump(model, f, indent=1)
        f.write("\n")


def mlp(name, data, hidden, regressor=False):
    x, y = data
    lo, span = minmax(x)
    xs = (x - lo) / span
    cls = MLPRegressor if regressor else MLPClassifier
    m = cls(hidden_layer_sizes=hidden, activation="relu", max_iter=4000, random_state=SEED)
    m.fit(xs, y)
    classes = int(y.max()) + 1
    layers = []
    for i, (w, b) in enumerate(zip(m.coefs_, m.intercepts_)):
        if i == 0:
            w, b = unscale_first_layer(w, b, lo, span)
        last = i == len(m.coefs_) - 1
        if last and not regressor and classes == 2:
            # sklearn emits one logistic unit for binary problems; expand to
            # two argmax outputs [0, z].
            w = np.concatenate([np.zeros_like(w), w], axis=1)
            b = np.concatenate([np.zeros_like(b), b])
        layers.append({
            "weights": [[num(v) for v in col] for col in w.T],
            "bias": [num(v) for v in b],
            "activation": "none" if last else "relu",
        })
    dump(name, {
        "kind": "mlp-regressor" if regressor else "mlp-classifier",
        "inputs": int(x.shape[1]),
        "classes": classes,
        "mlp": {"layers": layers},
    })
    print(name, "float train acc", score(m, xs, y, regressor, classes))


def score(m, xs, y, regressor, classes):
    p = m.predict(xs)
    if regressor:
        p = np.clip(np.floor(p + 0.5), 0, classes - 1)
    return float((p == y).mean())


def svm(name, data):
    x, y = data
    lo, span = minmax(x)
    xs = (x - lo) / span
    classes = int(y.max()) + 1
    clfs = []
    for i in range(classes):
        for j in range(i + 1, classes):
            sel = (y == i) | (y == j)
            c = LinearSVC(C=1.0, max_iter=20000, random_state=SEED)
            c.fit(xs[sel], (y[sel] == i).astype(int))
            w = c.coef_[0][:, None]
            b = c.intercept_
            w, b = unscale_first_layer(w, b, lo, span)
            clfs.append({
                "weights": [num(v) for v in w[:, 0]],
                "bias": num(b[0]),
                "positive": i,
                "negative": j,
            })
    dump(name, {"kind": "svm-classifier", "inputs": int(x.shape[1]), "classes": classes,
                "svm": {"classifiers": clfs}})


def tree(name, data, depth):
    x, y = data
    m = DecisionTreeClassifier(max_depth=depth, random_state=SEED)
    m.fit(x, y)
    t = m.tree_
    nodes = []
    for i in range(t.node_count):
        if t.children_left[i] == -1:
            nodes.append({"id": i, "class": int(np.argmax(t.value[i][0]))})
        else:
            # sklearn goes right on x > threshold; the toolkit goes right on
            # x >= threshold, so nudge to the next representable double.
            nodes.append({
                "id": i,
                "feature": int(t.feature[i]),
                "threshold": float(np.nextafter(t.threshold[i], np.inf)),
                "left": int(t.children_left[i]),
                "right": int(t.children_right[i]),
            })
    dump(name, {"kind": "decision-tree", "inputs": int(x.shape[1]), "classes": int(y.max()) + 1,
                "tree": {"nodes": nodes}})


def main():
    os.makedirs(OUT, exist_ok=True)
    sets = {
        "iris": datasets.load_iris(return_X_y=True),
        "wine": datasets.load_wine(return_X_y=True),
        "cancer": datasets.load_breast_cancer(return_X_y=True),
    }
    for k, (x, y) in sets.items():
        write_csv(k, x, y)
    mlp("mlp_c_cancer", sets["cancer"], (4,))
    mlp("mlp_c_wine", sets["wine"], (6,))
    mlp("mlp_r_iris", sets["iris"], (4,), regressor=True)
    svm("svm_c_wine", sets["wine"])
    tree("dt_iris", sets["iris"], 5)
    tree("dt_wine", sets["wine"], 6)
    tree("dt_cancer", sets["cancer"], 7)


if __name__ == "__main__":
    sys.exit(main())
