//! Netlist construction with on-the-fly constant propagation and structural
//! hashing. Every rewrite returns logic no more expensive than the gate it
//! replaces, so rebuilding a netlist never increases its area.

use std::collections::HashMap;

use super::{Gate, GateKind, NetId, Netlist, Port};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Driver {
    Input,
    Gate(usize),
}

#[derive(Debug)]
pub struct Builder {
    name: String,
    drivers: Vec<Driver>,
    gates: Vec<Gate>,
    inputs: Vec<Port>,
    outputs: Vec<Port>,
    consts: [Option<NetId>; 2],
    strash: HashMap<(GateKind, [NetId; 3]), NetId>,
    /// `not_of[n] == x` when net `n` is `NOT x`.
    not_of: HashMap<NetId, NetId>,
}

impl Builder {
    pub fn new(name: impl Into<String>) -> Self {
        Builder {
            name: name.into(),
            drivers: Vec::new(),
            gates: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            consts: [None; 2],
            strash: HashMap::new(),
            not_of: HashMap::new(),
        }
    }

    /// Declares a primary input. All inputs must be declared before any gate.
    pub fn input(&mut self, name: impl Into<String>, width: usize) -> Vec<NetId> {
        assert!(self.gates.is_empty(), "inputs must be declared before gates");
        let nets: Vec<NetId> = (0..width)
            .map(|_| {
                self.drivers.push(Driver::Input);
                (self.drivers.len() - 1) as NetId
            })
            .collect();
        self.inputs.push(Port {
            name: name.into(),
            nets: nets.clone(),
        });
        nets
    }

    pub fn output(&mut self, name: impl Into<String>, nets: Vec<NetId>) {
        self.outputs.push(Port {
            name: name.into(),
            nets,
        });
    }

    fn raw(&mut self, kind: GateKind, inputs: &[NetId]) -> NetId {
        let mut key = [NetId::MAX; 3];
        key[..inputs.len()].copy_from_slice(inputs);
        if let Some(&net) = self.strash.get(&(kind, key)) {
            return net;
        }
        let output = self.drivers.len() as NetId;
        self.drivers.push(Driver::Gate(self.gates.len()));
        self.gates.push(Gate {
            kind,
            inputs: inputs.to_vec(),
            output,
        });
        self.strash.insert((kind, key), output);
        output
    }

    pub fn constant(&mut self, value: bool) -> NetId {
        if let Some(net) = self.consts[value as usize] {
            return net;
        }
        let kind = if value { GateKind::Const1 } else { GateKind::Const0 };
        let net = self.raw(kind, &[]);
        self.consts[value as usize] = Some(net);
        net
    }

    /// The constant a net carries, if it is driven by a constant gate.
    pub fn value(&self, net: NetId) -> Option<bool> {
        match self.drivers[net as usize] {
            Driver::Gate(g) => match self.gates[g].kind {
                GateKind::Const0 => Some(false),
                GateKind::Const1 => Some(true),
                _ => None,
            },
            Driver::Input => None,
        }
    }

    fn complementary(&self, a: NetId, b: NetId) -> bool {
        self.not_of.get(&a) == Some(&b) || self.not_of.get(&b) == Some(&a)
    }

    fn inverted(&self, net: NetId) -> Option<NetId> {
        self.not_of.get(&net).copied()
    }

    pub fn not(&mut self, a: NetId) -> NetId {
        if let Some(v) = self.value(a) {
            return self.constant(!v);
        }
        if let Some(x) = self.inverted(a) {
            return x;
        }
        let out = self.raw(GateKind::Not, &[a]);
        self.not_of.insert(out, a);
        out
    }

    fn and_simplified(&mut self, a: NetId, b: NetId) -> Option<NetId> {
        match (self.value(a), self.value(b)) {
            (Some(false), _) | (_, Some(false)) => Some(self.constant(false)),
            (Some(true), _) => Some(b),
            (_, Some(true)) => Some(a),
            _ if a == b => Some(a),
            _ if self.complementary(a, b) => Some(self.constant(false)),
            _ => None,
        }
    }

    fn or_simplified(&mut self, a: NetId, b: NetId) -> Option<NetId> {
        match (self.value(a), self.value(b)) {
            (Some(true), _) | (_, Some(true)) => Some(self.constant(true)),
            (Some(false), _) => Some(b),
            (_, Some(false)) => Some(a),
            _ if a == b => Some(a),
            _ if self.complementary(a, b) => Some(self.constant(true)),
            _ => None,
        }
    }

    pub fn and(&mut self, a: NetId, b: NetId) -> NetId {
        if let Some(r) = self.and_simplified(a, b) {
            return r;
        }
        if let (Some(x), Some(y)) = (self.inverted(a), self.inverted(b)) {
            return self.nor(x, y);
        }
        self.raw(GateKind::And2, &[a.min(b), a.max(b)])
    }

    pub fn or(&mut self, a: NetId, b: NetId) -> NetId {
        if let Some(r) = self.or_simplified(a, b) {
            return r;
        }
        if let (Some(x), Some(y)) = (self.inverted(a), self.inverted(b)) {
            return self.nand(x, y);
        }
        self.raw(GateKind::Or2, &[a.min(b), a.max(b)])
    }

    pub fn nand(&mut self, a: NetId, b: NetId) -> NetId {
        if let Some(r) = self.and_simplified(a, b) {
            return self.not(r);
        }
        if let (Some(x), Some(y)) = (self.inverted(a), self.inverted(b)) {
            return self.or(x, y);
        }
        self.raw(GateKind::Nand2, &[a.min(b), a.max(b)])
    }

    pub fn nor(&mut self, a: NetId, b: NetId) -> NetId {
        if let Some(r) = self.or_simplified(a, b) {
            return self.not(r);
        }
        if let (Some(x), Some(y)) = (self.inverted(a), self.inverted(b)) {
            return self.and(x, y);
        }
        self.raw(GateKind::Nor2, &[a.min(b), a.max(b)])
    }

    pub fn xor(&mut self, a: NetId, b: NetId) -> NetId {
        match (self.value(a), self.value(b)) {
            (Some(va), Some(vb)) => return self.constant(va ^ vb),
            (Some(false), _) => return b,
            (_, Some(false)) => return a,
            (Some(true), _) => return self.not(b),
            (_, Some(true)) => return self.not(a),
            _ => {}
        }
        if a == b {
            return self.constant(false);
        }
        if self.complementary(a, b) {
            return self.constant(true);
        }
        match (self.inverted(a), self.inverted(b)) {
            (Some(x), Some(y)) => self.xor(x, y),
            (Some(x), None) => self.xnor(x, b),
            (None, Some(y)) => self.xnor(a, y),
            (None, None) => self.raw(GateKind::Xor2, &[a.min(b), a.max(b)]),
        }
    }

    pub fn xnor(&mut self, a: NetId, b: NetId) -> NetId {
        match (self.value(a), self.value(b)) {
            (Some(va), Some(vb)) => return self.constant(!(va ^ vb)),
            (Some(true), _) => return b,
            (_, Some(true)) => return a,
            (Some(false), _) => return self.not(b),
            (_, Some(false)) => return self.not(a),
            _ => {}
        }
        if a == b {
            return self.constant(true);
        }
        if self.complementary(a, b) {
            return self.constant(false);
        }
        match (self.inverted(a), self.inverted(b)) {
            (Some(x), Some(y)) => self.xnor(x, y),
            (Some(x), None) => self.xor(x, b),
            (None, Some(y)) => self.xor(a, y),
            (None, None) => self.raw(GateKind::Xnor2, &[a.min(b), a.max(b)]),
        }
    }

    /// `sel ? b : a`.
    pub fn mux(&mut self, sel: NetId, a: NetId, b: NetId) -> NetId {
        if let Some(s) = self.value(sel) {
            return if s { b } else { a };
        }
        if a == b {
            return a;
        }
        if let Some(t) = self.inverted(sel) {
            return self.mux(t, b, a);
        }
        match (self.value(a), self.value(b)) {
            (Some(false), Some(true)) => return sel,
            (Some(true), Some(false)) => return self.not(sel),
            (Some(false), _) => return self.and(sel, b),
            (_, Some(false)) => {
                let ns = self.not(sel);
                return self.and(ns, a);
            }
            (Some(true), _) => {
                let ns = self.not(sel);
                return self.or(ns, b);
            }
            (_, Some(true)) => return self.or(sel, a),
            _ => {}
        }
        if a == sel {
            return self.and(sel, b);
        }
        if b == sel {
            return self.or(sel, a);
        }
        if self.complementary(a, sel) {
            return self.or(a, b);
        }
        if self.complementary(b, sel) {
            return self.and(b, a);
        }
        self.raw(GateKind::Mux2, &[sel, a, b])
    }

    /// Re-emits a gate of any kind through the simplifying constructors.
    pub fn gate(&mut self, kind: GateKind, inputs: &[NetId]) -> NetId {
        match kind {
            GateKind::Const0 => self.constant(false),
            GateKind::Const1 => self.constant(true),
            GateKind::Not => self.not(inputs[0]),
            GateKind::And2 => self.and(inputs[0], inputs[1]),
            GateKind::Or2 => self.or(inputs[0], inputs[1]),
            GateKind::Nand2 => self.nand(inputs[0], inputs[1]),
            GateKind::Nor2 => self.nor(inputs[0], inputs[1]),
            GateKind::Xor2 => self.xor(inputs[0], inputs[1]),
            GateKind::Xnor2 => self.xnor(inputs[0], inputs[1]),
            GateKind::Mux2 => self.mux(inputs[0], inputs[1], inputs[2]),
        }
    }

    /// Removes logic outside the fan-in cones of the outputs and renumbers
    /// nets (inputs first, then gates in topological order).
    pub fn finish(self) -> Netlist {
        let mut live = vec![false; self.drivers.len()];
        for port in &self.outputs {
            for &n in &port.nets {
                live[n as usize] = true;
            }
        }
        for gate in self.gates.iter().rev() {
            if live[gate.output as usize] {
                for &i in &gate.inputs {
                    live[i as usize] = true;
                }
            }
        }
        let mut map = vec![NetId::MAX; self.drivers.len()];
        let mut next: NetId = 0;
        let inputs: Vec<Port> = self
            .inputs
            .iter()
            .map(|p| Port {
                name: p.name.clone(),
                nets: p
                    .nets
                    .iter()
                    .map(|&n| {
                        map[n as usize] = next;
                        next += 1;
                        map[n as usize]
                    })
                    .collect(),
            })
            .collect();
        let mut gates = Vec::new();
        for gate in &self.gates {
            if !live[gate.output as usize] {
                continue;
            }
            map[gate.output as usize] = next;
            gates.push(Gate {
                kind: gate.kind,
                inputs: gate.inputs.iter().map(|&i| map[i as usize]).collect(),
                output: next,
            });
            next += 1;
        }
        let outputs = self
            .outputs
            .iter()
            .map(|p| Port {
                name: p.name.clone(),
                nets: p.nets.iter().map(|&n| map[n as usize]).collect(),
            })
            .collect();
        Netlist {
            name: self.name,
            net_count: next as usize,
            inputs,
            outputs,
            gates,
        }
    }
}

/// Constant propagation: rebuilds `n` through the simplifying builder, with
/// the gates listed in `forced` (gate index, value) replaced by constants,
/// then removes dead logic. Output never has more area than input.
pub fn propagate(n: &Netlist, forced: &[(usize, bool)]) -> Netlist {
    let mut force = vec![None; n.gates.len()];
    for &(g, v) in forced {
        force[g] = Some(v);
    }
    let mut b = Builder::new(n.name.clone());
    let mut map = vec![NetId::MAX; n.net_count];
    for port in &n.inputs {
        let nets = b.input(port.name.clone(), port.width());
        for (&old, new) in port.nets.iter().zip(nets) {
            map[old as usize] = new;
        }
    }
    let mut ins = Vec::with_capacity(3);
    for (g, gate) in n.gates.iter().enumerate() {
        let out = match force[g] {
            Some(v) => b.constant(v),
            None => {
                ins.clear();
                ins.extend(gate.inputs.iter().map(|&i| map[i as usize]));
                b.gate(gate.kind, &ins)
            }
        };
        map[gate.output as usize] = out;
    }
    for port in &n.outputs {
        b.output(port.name.clone(), port.nets.iter().map(|&o| map[o as usize]).collect());
    }
    b.finish()
}
