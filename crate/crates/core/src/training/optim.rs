use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::encoder::{Params, Real};
use crate::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const CLIP_NORM: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Linear warmup, then `max_lr * sqrt(warmup / step)`.
    InverseSqrt,
    /// Linear warmup, then constant `max_lr`.
    FinetuneDefault,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse_sqrt" => Ok(ScheduleKind::InverseSqrt),
            "finetune_default" => Ok(ScheduleKind::FinetuneDefault),
            other => Err(Error::Config(format!("unknown schedule kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub max_lr: f64,
    pub warmup_steps: usize,
    pub kind: ScheduleKind,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_lr > 0.0 && self.max_lr.is_finite()) {
            return Err(Error::Config(format!("max_lr must be positive, got {}", self.max_lr)));
        }
        Ok(())
    }
}

/// Learning rate at 1-based `step`.
pub fn lr(step: usize, schedule: &Schedule) -> Result<f64> {
    schedule.validate()?;
    if step == 0 {
        return Err(Error::InvalidArgument("learning rate steps are 1-based".into()));
    }
    let (s, w) = (step as f64, schedule.warmup_steps as f64);
    if step < schedule.warmup_steps {
        return Ok(schedule.max_lr * s / w);
    }
    Ok(match schedule.kind {
        ScheduleKind::FinetuneDefault => schedule.max_lr,
        ScheduleKind::InverseSqrt if schedule.warmup_steps == 0 => schedule.max_lr / s.sqrt(),
        ScheduleKind::InverseSqrt => schedule.max_lr * (w / s).sqrt(),
    })
}

/// Rescales `grads` in place so that their global L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_global_norm<F: Real>(grads: &mut Params<F>, max_norm: f64) -> f64 {
    let norm = grads.global_norm().to_f64().unwrap_or(f64::INFINITY);
    if norm > max_norm {
        grads.scale(F::from(max_norm / norm).expect("finite"));
    }
    norm
}

#[derive(Debug, Clone)]
pub struct OptimizerState<F> {
    pub step: usize,
    m: Vec<Array2<F>>,
    v: Vec<Array2<F>>,
}

impl<F: Real> OptimizerState<F> {
    pub fn new(params: &Params<F>) -> Self {
        let zeros: Vec<Array2<F>> = params.tensors().iter().map(|(_, t)| Array2::zeros(t.raw_dim())).collect();
        OptimizerState {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One bias-corrected Adam update. Fails before touching anything if a
    /// gradient entry is not finite.
    pub fn adam_step(&mut self, params: &mut Params<F>, grads: &Params<F>, lr: f64) -> Result<()> {
        if let Some(name) = grads.first_non_finite() {
            return Err(Error::NonFinite(format!("gradient of `{name}`")));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        let (b1, b2, eps) = (F::from(BETA1).unwrap(), F::from(BETA2).unwrap(), F::from(ADAM_EPS).unwrap());
        let (one, lr_t) = (F::one(), F::from(lr / c1).unwrap());
        let inv_c2 = F::from(1.0 / c2).unwrap();
        for (((_, p), (_, g)), (m, v)) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                *p -= lr_t * *m / ((*v * inv_c2).sqrt() + eps);
            });
        }
        Ok(())
    }
}
