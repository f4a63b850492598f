//! nncore against independent oracles: the taped GRU vs a scalar reference
//! loop, and tape gradients vs central finite differences.

use awe_core::nncore::{gru_cell_forward, GruCellParams, Rng, Tape, Tensor};
use awe_testkit::fd::{central_diff_gradient, max_rel_error};
use awe_testkit::gru_ref::{gru_step_reference, GateRef};

fn reference_step(params: &GruCellParams, x: &[f64], h: &[f64]) -> Vec<f64> {
    let gate = |g: usize| GateRef {
        w: params.w[g].data(),
        u: params.u[g].data(),
        b: params.b[g].data(),
    };
    gru_step_reference(
        params.input_dim,
        params.hidden_dim,
        &gate(0),
        &gate(1),
        &gate(2),
        x,
        h,
    )
}

#[test]
fn gru_matches_scalar_reference_across_seeds() {
    for seed in 0..20 {
        let mut rng = Rng::new(seed);
        let (k, h_dim) = (1 + rng.below(7), 1 + rng.below(9));
        let params = GruCellParams::init(k, h_dim, &mut rng);
        let mut h = Tensor::vector((0..h_dim).map(|_| rng.uniform(-1.0, 1.0)).collect());
        for _ in 0..5 {
            let x = Tensor::vector((0..k).map(|_| rng.uniform(-2.0, 2.0)).collect());
            let taped = gru_cell_forward(&params, &x, &h).unwrap();
            let reference = reference_step(&params, x.data(), h.data());
            for (a, b) in taped.data().iter().zip(&reference) {
                assert!(
                    (a - b).abs() <= 1e-12,
                    "seed {seed}: taped {a} vs reference {b}"
                );
            }
            h = taped;
        }
    }
}

fn flatten(params: &GruCellParams) -> Vec<f64> {
    let mut flat = Vec::new();
    params.visit("cell", &mut |_, t| flat.extend_from_slice(t.data()));
    flat
}

fn unflatten(template: &GruCellParams, flat: &[f64]) -> GruCellParams {
    let mut out = template.clone();
    let mut offset = 0;
    out.visit_mut("cell", &mut |_, t| {
        let n = t.len();
        t.data_mut().copy_from_slice(&flat[offset..offset + n]);
        offset += n;
    });
    assert_eq!(offset, flat.len());
    out
}

/// Scalar loss of a 3-step GRU rollout: ‖h₃‖² via a dot with itself.
fn rollout_loss(params: &GruCellParams, frames: &[Tensor]) -> (f64, Vec<f64>) {
    let mut tape = Tape::new();
    let cell = params.register(&mut tape);
    let mut h = tape.input(Tensor::zeros(vec![params.hidden_dim]));
    for frame in frames {
        let x = tape.input(frame.clone());
        h = awe_core::nncore::gru_cell_step(&mut tape, &cell, x, h).unwrap();
    }
    let loss = tape.dot(h, h).unwrap();
    let value = tape.value(loss).item().unwrap();
    let mut grads = tape.backward(loss).unwrap();
    // Gradient order must match GruCellParams::visit: per gate w, u, b.
    let mut flat = Vec::new();
    for g in 0..3 {
        for id in [cell.w[g], cell.u[g], cell.b[g]] {
            flat.extend_from_slice(grads.take(id).expect("param grad").data());
        }
    }
    (value, flat)
}

#[test]
fn tape_gradients_match_finite_differences_through_rollout() {
    let mut rng = Rng::new(99);
    let params = GruCellParams::init(3, 4, &mut rng);
    let frames: Vec<Tensor> = (0..3)
        .map(|_| Tensor::vector((0..3).map(|_| rng.uniform(-1.5, 1.5)).collect()))
        .collect();
    let (_, analytic) = rollout_loss(&params, &frames);
    let flat = flatten(&params);
    let mut f = |p: &[f64]| rollout_loss(&unflatten(&params, p), &frames).0;
    let numeric = central_diff_gradient(&mut f, &flat, 1e-5);
    let err = max_rel_error(&analytic, &numeric);
    assert!(err <= 1e-6, "max relative error {err}");
}
