mod common;

use axsynth::netlist::{area, propagate};
use axsynth::rng::{stream, Purpose};
use axsynth::synth::{check_equivalence, random_code_rows, synth_model, synth_model_with, SynthOptions};

#[test]
fn every_fixture_matches_the_reference() {
    for name in common::MLP_SVM.iter().chain(&common::TREES) {
        let f = common::load(name);
        let q = common::quantized(&f);
        let mut rng = stream(1, Purpose::Stimulus, 0, 0);
        let mut rows = random_code_rows(&q, 1000, &mut rng);
        rows.extend(f.data.features.iter().map(|r| q.quantize_inputs(r)));

        let n = synth_model(&q);
        n.validate().unwrap();
        let eq = check_equivalence(&q, &n, &rows).unwrap();
        assert_eq!(eq.mismatches, 0, "{name}");

        let with_acc = synth_model_with(
            &q,
            SynthOptions {
                expose_accumulators: true,
            },
        );
        let eq = check_equivalence(&q, &with_acc, &rows).unwrap();
        assert_eq!(eq.mismatches, 0, "{name} accumulators");

        // Propagation is idempotent on generated netlists.
        let again = propagate(&n, &[]);
        assert_eq!(area(&again).gate_equivalents, area(&n).gate_equivalents, "{name}");
        eprintln!(
            "{name}: {} GE, float {:.3} fxp {:.3}",
            area(&n).gate_equivalents,
            f.model.float_accuracy(&f.split.test),
            axsynth::fxp::accuracy(&q, &f.split.test)
        );
    }
}
