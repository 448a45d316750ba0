use super::{AutodiffError, ParamSet, Tensor};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum OptimizerKind {
    Sgd,
    AdamW { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adamw() -> Self {
        OptimizerKind::AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    pub clipped: bool,
}

/// SGD or AdamW with decoupled weight decay and global-norm clipping.
#[derive(Clone, Debug)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub weight_decay: f64,
    pub clip_norm: Option<f64>,
    t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Optimizer {
    pub fn sgd(lr: f64) -> Self {
        Self::new(OptimizerKind::Sgd, lr, 0.0, None)
    }

    /// AdamW with the usual betas, weight decay 0.01 and clip norm 1.0.
    pub fn adamw(lr: f64) -> Self {
        Self::new(OptimizerKind::adamw(), lr, 0.01, Some(1.0))
    }

    pub fn new(kind: OptimizerKind, lr: f64, weight_decay: f64, clip_norm: Option<f64>) -> Self {
        Self {
            kind,
            lr,
            weight_decay,
            clip_norm,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// Applies one update from the accumulated gradients in `params`, then
    /// zeroes them. Non-finite gradients abort before anything is modified.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<StepStats, AutodiffError> {
        for id in 0..params.len() {
            if let Some(index) = params.grad(id).data().iter().position(|x| !x.is_finite()) {
                return Err(AutodiffError::NonFiniteGradient {
                    param: params.name(id).to_string(),
                    index,
                });
            }
        }
        let grad_norm = params.grad_norm();
        let mut scale = 1.0;
        let mut clipped = false;
        if let Some(c) = self.clip_norm {
            if grad_norm > c {
                scale = c / grad_norm;
                clipped = true;
            }
        }
        if self.m.len() != params.len() {
            self.m = (0..params.len())
                .map(|i| Tensor::zeros(params.value(i).shape()))
                .collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        for id in 0..params.len() {
            let g: Vec<f64> = params.grad(id).data().iter().map(|x| x * scale).collect();
            let lr = self.lr;
            let wd = self.weight_decay;
            match self.kind {
                OptimizerKind::Sgd => {
                    for (p, gi) in params.value_mut(id).data_mut().iter_mut().zip(&g) {
                        *p -= lr * (gi + wd * *p);
                    }
                }
                OptimizerKind::AdamW { beta1, beta2, eps } => {
                    let bc1 = 1.0 - beta1.powi(self.t as i32);
                    let bc2 = 1.0 - beta2.powi(self.t as i32);
                    let m = self.m[id].data_mut();
                    let v = self.v[id].data_mut();
                    let p = params.value_mut(id).data_mut();
                    for k in 0..g.len() {
                        m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                        v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                        let mhat = m[k] / bc1;
                        let vhat = v[k] / bc2;
                        p[k] -= lr * wd * p[k];
                        p[k] -= lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
        }
        params.zero_grads();
        Ok(StepStats { grad_norm, clipped })
    }
}

/// Learning-rate multiplier for linear warm-up followed by cosine annealing
/// to zero. `step` is zero-based.
pub fn warmup_cosine(step: usize, total: usize, warmup_ratio: f64) -> f64 {
    if total == 0 {
        return 1.0;
    }
    let warmup = (warmup_ratio * total as f64).round() as usize;
    if step < warmup {
        return (step + 1) as f64 / warmup as f64;
    }
    let span = (total - warmup).max(1) as f64;
    let progress = ((step - warmup) as f64 / span).min(1.0);
    0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}
