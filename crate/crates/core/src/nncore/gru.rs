//! Gated recurrent unit cell.
//!
//! Gate convention: update `z = σ(W_z·x + U_z·h + b_z)`, reset
//! `r = σ(W_r·x + U_r·h + b_r)`, candidate `h̃ = tanh(W_h·x + U_h·(r⊙h) + b_h)`,
//! next state `h' = (1−z)⊙h + z⊙h̃`. With all-zero weights this fixes
//! `h' = 0.5·h`, which the tests pin down so the convention cannot drift.

use super::rng::Rng;
use super::tape::{NodeId, Tape};
use super::{Result, Tensor};

const GATE_NAMES: [&str; 3] = ["update", "reset", "candidate"];

/// Parameters of one GRU cell. Gate order throughout: update, reset,
/// candidate.
#[derive(Debug, Clone)]
pub struct GruCellParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Input-to-hidden weights, each `[hidden_dim, input_dim]`.
    pub w: [Tensor; 3],
    /// Hidden-to-hidden weights, each `[hidden_dim, hidden_dim]`.
    pub u: [Tensor; 3],
    /// Gate biases, each `[hidden_dim]`.
    pub b: [Tensor; 3],
}

/// Tape handles for one registered GRU cell.
#[derive(Debug, Clone, Copy)]
pub struct GruCellNodes {
    pub w: [NodeId; 3],
    pub u: [NodeId; 3],
    pub b: [NodeId; 3],
}

impl GruCellParams {
    /// Uniform init in `±1/√fan_in`: input weights scale with the input
    /// dimension, recurrent weights and biases with the hidden dimension.
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut Rng) -> Self {
        let mut mat = |rows: usize, cols: usize, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let data = (0..rows * cols).map(|_| rng.uniform(-bound, bound)).collect();
            Tensor::from_parts(vec![rows, cols], data)
        };
        let w = std::array::from_fn(|_| mat(hidden_dim, input_dim, input_dim));
        let u = std::array::from_fn(|_| mat(hidden_dim, hidden_dim, hidden_dim));
        let b = std::array::from_fn(|_| {
            let bound = 1.0 / (hidden_dim as f64).sqrt();
            Tensor::from_parts(
                vec![hidden_dim],
                (0..hidden_dim).map(|_| rng.uniform(-bound, bound)).collect(),
            )
        });
        Self {
            input_dim,
            hidden_dim,
            w,
            u,
            b,
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            w: std::array::from_fn(|_| Tensor::zeros(vec![hidden_dim, input_dim])),
            u: std::array::from_fn(|_| Tensor::zeros(vec![hidden_dim, hidden_dim])),
            b: std::array::from_fn(|_| Tensor::zeros(vec![hidden_dim])),
        }
    }

    /// Registers all nine parameter tensors on `tape` as trainable leaves.
    pub fn register(&self, tape: &mut Tape) -> GruCellNodes {
        GruCellNodes {
            w: std::array::from_fn(|g| tape.param(self.w[g].clone())),
            u: std::array::from_fn(|g| tape.param(self.u[g].clone())),
            b: std::array::from_fn(|g| tape.param(self.b[g].clone())),
        }
    }

    /// Visits parameters in a stable order with stable name suffixes.
    pub fn visit(&self, prefix: &str, f: &mut impl FnMut(String, &Tensor)) {
        for g in 0..3 {
            f(format!("{prefix}.w.{}", GATE_NAMES[g]), &self.w[g]);
            f(format!("{prefix}.u.{}", GATE_NAMES[g]), &self.u[g]);
            f(format!("{prefix}.b.{}", GATE_NAMES[g]), &self.b[g]);
        }
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut impl FnMut(String, &mut Tensor)) {
        for g in 0..3 {
            f(format!("{prefix}.w.{}", GATE_NAMES[g]), &mut self.w[g]);
            f(format!("{prefix}.u.{}", GATE_NAMES[g]), &mut self.u[g]);
            f(format!("{prefix}.b.{}", GATE_NAMES[g]), &mut self.b[g]);
        }
    }
}

/// One taped GRU step: returns the node for `h'`.
pub fn gru_cell_step(
    tape: &mut Tape,
    cell: &GruCellNodes,
    x: NodeId,
    h_prev: NodeId,
) -> Result<NodeId> {
    let gate = |tape: &mut Tape, g: usize, h_in: NodeId| -> Result<NodeId> {
        let wx = tape.matvec(cell.w[g], x)?;
        let uh = tape.matvec(cell.u[g], h_in)?;
        let s = tape.add(wx, uh)?;
        tape.add(s, cell.b[g])
    };
    let z = {
        let pre = gate(tape, 0, h_prev)?;
        tape.sigmoid(pre)?
    };
    let r = {
        let pre = gate(tape, 1, h_prev)?;
        tape.sigmoid(pre)?
    };
    let rh = tape.mul(r, h_prev)?;
    let cand = {
        let pre = gate(tape, 2, rh)?;
        tape.tanh(pre)?
    };
    // h' = h + z⊙(h̃ − h) is (1−z)⊙h + z⊙h̃ with one fewer op.
    let delta = tape.sub(cand, h_prev)?;
    let zd = tape.mul(z, delta)?;
    tape.add(h_prev, zd)
}

/// Value-level single step, for callers that do not need gradients.
pub fn gru_cell_forward(params: &GruCellParams, input: &Tensor, h_prev: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let x = tape.input(input.clone());
    let h = tape.input(h_prev.clone());
    let cell = params.register(&mut tape);
    let out = gru_cell_step(&mut tape, &cell, x, h)?;
    Ok(tape.value(out).clone())
}

/// Reusable buffers for [`gru_step_values`], so bulk forward passes avoid
/// per-step allocation.
#[derive(Debug, Default, Clone)]
pub struct GruScratch {
    uh: Vec<f64>,
    z: Vec<f64>,
    rh: Vec<f64>,
    cand: Vec<f64>,
}

/// Slice-level step without tape bookkeeping, for bulk forward passes such as
/// embedding extraction. Writes `h'` into `h_out`.
pub fn gru_step_values(
    params: &GruCellParams,
    x: &[f64],
    h_prev: &[f64],
    h_out: &mut [f64],
    scratch: &mut GruScratch,
) -> Result<()> {
    let (ins, hid) = (params.input_dim, params.hidden_dim);
    if x.len() != ins || h_prev.len() != hid || h_out.len() != hid {
        return Err(super::NnError::ShapeMismatch {
            op: "gru_step_values",
            expected: format!("x[{ins}], h[{hid}]"),
            got: format!("x[{}], h[{}], out[{}]", x.len(), h_prev.len(), h_out.len()),
        });
    }
    for buf in [&mut scratch.uh, &mut scratch.z, &mut scratch.rh, &mut scratch.cand] {
        buf.resize(hid, 0.0);
    }

    let gate_pre = |g: usize, h_in: &[f64], out: &mut [f64], uh: &mut [f64]| {
        super::tensor::matvec_into(params.w[g].data(), hid, ins, x, out);
        super::tensor::matvec_into(params.u[g].data(), hid, hid, h_in, uh);
        for ((o, u), b) in out.iter_mut().zip(uh.iter()).zip(params.b[g].data()) {
            *o += u + b;
        }
    };

    gate_pre(0, h_prev, &mut scratch.z, &mut scratch.uh);
    for v in &mut scratch.z {
        *v = sigmoid(*v);
    }
    // The reset gate is consumed immediately as r⊙h, so reuse its buffer.
    gate_pre(1, h_prev, &mut scratch.rh, &mut scratch.uh);
    for (v, hv) in scratch.rh.iter_mut().zip(h_prev) {
        *v = sigmoid(*v) * hv;
    }
    gate_pre(2, &scratch.rh, &mut scratch.cand, &mut scratch.uh);
    for ((out, (zv, cv)), hv) in h_out
        .iter_mut()
        .zip(scratch.z.iter().zip(&scratch.cand))
        .zip(h_prev)
    {
        *out = hv + zv * (cv.tanh() - hv);
    }
    Ok(())
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}
