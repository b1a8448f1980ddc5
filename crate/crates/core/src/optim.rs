//! First-order optimizers over flat parameter slices.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Optimizer state for a fixed list of parameter groups.
///
/// Groups are addressed by position; callers must pass them in the same order
/// on every step.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, group_sizes: &[usize]) -> Self {
        let zeros = || group_sizes.iter().map(|&n| vec![0.0; n]).collect();
        Optimizer {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: if kind == OptimizerKind::Adam { zeros() } else { Vec::new() },
            v: if kind == OptimizerKind::Adam { zeros() } else { Vec::new() },
        }
    }

    /// Apply one update. `groups` yields `(params, grads)` pairs; `None` in
    /// place of a pair means the group is frozen and is left untouched.
    pub fn step<'a>(&mut self, groups: impl IntoIterator<Item = Option<(&'a mut [f64], &'a [f64])>>) {
        self.t += 1;
        let (bc1, bc2) = (
            1.0 - self.beta1.powi(self.t),
            1.0 - self.beta2.powi(self.t),
        );
        for (gi, group) in groups.into_iter().enumerate() {
            let Some((params, grads)) = group else { continue };
            debug_assert_eq!(params.len(), grads.len());
            match self.kind {
                OptimizerKind::Sgd => {
                    for (p, g) in params.iter_mut().zip(grads) {
                        *p -= self.lr * g;
                    }
                }
                OptimizerKind::Adam => {
                    let m = &mut self.m[gi];
                    let v = &mut self.v[gi];
                    for i in 0..params.len() {
                        let g = grads[i];
                        m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                        v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                        let mh = m[i] / bc1;
                        let vh = v[i] / bc2;
                        params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
                    }
                }
            }
        }
    }
}
