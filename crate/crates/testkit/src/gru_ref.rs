//! Scalar-loop GRU step, the reference for the taped implementation.

/// Weights for one gate as plain slices: `w` is `[hidden × input]` row-major,
/// `u` is `[hidden × hidden]`, `b` is `[hidden]`.
pub struct GateRef<'a> {
    pub w: &'a [f64],
    pub u: &'a [f64],
    pub b: &'a [f64],
}

/// One GRU step computed with nothing but indexed loops:
/// z = σ(Wz·x + Uz·h + bz), r likewise, candidate = tanh(Wh·x + Uh·(r⊙h) + bh),
/// h' = (1−z)⊙h + z⊙candidate.
pub fn gru_step_reference(
    input_dim: usize,
    hidden_dim: usize,
    update: &GateRef,
    reset: &GateRef,
    candidate: &GateRef,
    x: &[f64],
    h: &[f64],
) -> Vec<f64> {
    assert_eq!(x.len(), input_dim);
    assert_eq!(h.len(), hidden_dim);
    let pre = |gate: &GateRef, h_in: &[f64], i: usize| {
        let mut s = gate.b[i];
        for j in 0..input_dim {
            s += gate.w[i * input_dim + j] * x[j];
        }
        for j in 0..hidden_dim {
            s += gate.u[i * hidden_dim + j] * h_in[j];
        }
        s
    };
    let sigmoid = |v: f64| 1.0 / (1.0 + (-v).exp());

    let mut z = vec![0.0; hidden_dim];
    let mut r = vec![0.0; hidden_dim];
    for i in 0..hidden_dim {
        z[i] = sigmoid(pre(update, h, i));
        r[i] = sigmoid(pre(reset, h, i));
    }
    let rh: Vec<f64> = (0..hidden_dim).map(|i| r[i] * h[i]).collect();
    let mut out = vec![0.0; hidden_dim];
    for i in 0..hidden_dim {
        let cand = pre(candidate, &rh, i).tanh();
        out[i] = (1.0 - z[i]) * h[i] + z[i] * cand;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_halve_state() {
        let w = vec![0.0; 6];
        let u = vec![0.0; 4];
        let b = vec![0.0; 2];
        let gate = GateRef {
            w: &w,
            u: &u,
            b: &b,
        };
        let out = gru_step_reference(3, 2, &gate, &gate, &gate, &[1.0, 2.0, 3.0], &[0.6, -1.0]);
        assert_eq!(out, vec![0.3, -0.5]);
    }
}
