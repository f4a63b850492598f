//! Adam optimizer and reduce-on-plateau learning-rate schedule.

use super::{NnError, Result, Tensor};

/// Adam hyperparameters. Defaults follow the usual first/second moment decay
/// rates with no weight decay.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam state: one first and second moment buffer per named parameter
/// tensor, in the order the parameters were supplied at construction, plus
/// the current learning rate.
#[derive(Debug)]
pub struct Adam {
    cfg: AdamConfig,
    lr: f64,
    t: u64,
    names: Vec<String>,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, params: &[(String, Vec<usize>)]) -> Self {
        Self {
            cfg,
            lr: cfg.lr,
            t: 0,
            names: params.iter().map(|(n, _)| n.clone()).collect(),
            m: params.iter().map(|(_, s)| Tensor::zeros(s.clone())).collect(),
            v: params.iter().map(|(_, s)| Tensor::zeros(s.clone())).collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    /// Installs a scheduler-chosen learning rate for subsequent steps.
    pub fn set_learning_rate(&mut self, lr: f64) {
        self.lr = lr;
    }

    /// One update over all parameters. `params` and `grads` must align with
    /// the construction order; the step counter advances once per call, not
    /// once per tensor. A non-finite gradient aborts with the parameter's
    /// name before anything is modified.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NnError::Invalid {
                what: "adam step",
                why: format!(
                    "expected {} parameter tensors, got {} params / {} grads",
                    self.m.len(),
                    params.len(),
                    grads.len()
                ),
            });
        }
        for (name, g) in self.names.iter().zip(grads) {
            if let Some(bad) = g.data().iter().position(|v| !v.is_finite()) {
                return Err(NnError::Invalid {
                    what: "gradient",
                    why: format!("non-finite gradient for {name} at flat index {bad}"),
                });
            }
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.m[i].shape() {
                return Err(NnError::ShapeMismatch {
                    op: "adam_step",
                    expected: format!("{:?} for {}", self.m[i].shape(), self.names[i]),
                    got: format!("param {:?} / grad {:?}", p.shape(), g.shape()),
                });
            }
        }
        self.t += 1;
        let b1t = 1.0 - self.cfg.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.cfg.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let (b1, b2, eps) = (self.cfg.beta1, self.cfg.beta2, self.cfg.eps);
            for (((pv, gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut())
                .zip(v.data_mut().iter_mut())
            {
                *mv = b1 * *mv + (1.0 - b1) * gv;
                *vv = b2 * *vv + (1.0 - b2) * gv * gv;
                let mhat = *mv / b1t;
                let vhat = *vv / b2t;
                *pv -= self.lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Learning rate after observing `history` of a higher-is-better validation
/// metric, recomputed from scratch: each run of `patience` consecutive epochs
/// without a new best multiplies the rate by `factor` and restarts the count.
pub fn reduce_lr_on_plateau(
    history: &[f64],
    initial_lr: f64,
    factor: f64,
    patience: usize,
) -> Result<f64> {
    if history.is_empty() {
        return Err(NnError::Empty {
            what: "metric history",
        });
    }
    if !(factor > 0.0 && factor < 1.0) {
        return Err(NnError::Invalid {
            what: "plateau factor",
            why: format!("{factor} is outside (0, 1)"),
        });
    }
    if patience == 0 {
        return Err(NnError::Invalid {
            what: "plateau patience",
            why: "must be at least 1".into(),
        });
    }
    let mut lr = initial_lr;
    let mut best = f64::NEG_INFINITY;
    let mut wait = 0usize;
    for &metric in history {
        if metric > best {
            best = metric;
            wait = 0;
        } else {
            wait += 1;
            if wait >= patience {
                lr *= factor;
                wait = 0;
            }
        }
    }
    Ok(lr)
}
