use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Params;
use crate::{Error, Result};

/// Gradients smaller than this are compared on an absolute scale.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_tensor: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }

    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            Ok(self)
        } else {
            Err(Error::InvalidArgument(format!(
                "gradient check failed in `{}`[{}]: analytic {:.6e} vs numeric {:.6e} (relative error {:.3e} > {:.1e})",
                self.worst_tensor, self.worst_index, self.analytic, self.numeric, self.max_rel_error, self.tolerance
            )))
        }
    }
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
}

/// Compares analytic gradients with central differences on up to
/// `samples_per_tensor` randomly chosen entries of every tensor.
pub fn gradient_check<L>(
    loss_fn: L,
    params: &Params<f64>,
    epsilon: f64,
    tolerance: f64,
    samples_per_tensor: usize,
    seed: u64,
) -> GradCheckReport
where
    L: Fn(&Params<f64>) -> (f64, Params<f64>),
{
    let (_, analytic) = loss_fn(params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_tensor: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
        tolerance,
    };

    let names_and_sizes: Vec<(String, usize)> = params.tensors().iter().map(|(n, t)| (n.clone(), t.len())).collect();
    for (ti, (name, size)) in names_and_sizes.iter().enumerate() {
        if *size == 0 {
            continue;
        }
        let picks = sample(&mut rng, *size, samples_per_tensor.min(*size));
        for idx in picks.iter() {
            let perturb = |p: &mut Params<f64>, delta: f64| {
                let mut tensors = p.tensors_mut();
                let slot = tensors[ti].1.iter_mut().nth(idx).expect("index in range");
                *slot += delta;
            };
            perturb(&mut probe, epsilon);
            let (plus, _) = loss_fn(&probe);
            perturb(&mut probe, -2.0 * epsilon);
            let (minus, _) = loss_fn(&probe);
            perturb(&mut probe, epsilon);
            // Restore exactly.
            {
                let mut dst = probe.tensors_mut();
                let src = params.tensors();
                let slot = dst[ti].1.iter_mut().nth(idx).unwrap();
                *slot = *src[ti].1.iter().nth(idx).unwrap();
            }

            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = *analytic.tensors()[ti].1.iter().nth(idx).unwrap();
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst_tensor.is_empty() {
                report.max_rel_error = err;
                report.worst_tensor = name.clone();
                report.worst_index = idx;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::ModelConfig;

    fn cfg() -> ModelConfig {
        ModelConfig {
            vocab_size: 9,
            dim: 4,
            max_len: 8,
            layers: 1,
            heads: 2,
            ff_dim: 3,
        }
    }

    fn quadratic(p: &Params<f64>) -> (f64, Params<f64>) {
        let mut g = p.clone();
        let mut loss = 0.0;
        for ((_, gt), (_, pt)) in g.tensors_mut().into_iter().zip(p.tensors()) {
            for (i, (gv, &pv)) in gt.iter_mut().zip(pt.iter()).enumerate() {
                let c = 1.0 + (i % 5) as f64;
                loss += 0.5 * c * pv * pv;
                *gv = c * pv;
            }
        }
        (loss, g)
    }

    #[test]
    fn quadratic_is_exact() {
        let p = Params::<f64>::init(cfg(), 4);
        let r = gradient_check(quadratic, &p, 1e-4, 1e-6, 10, 0);
        assert!(r.passed(), "{r:?}");
        assert!(r.checked > 0);
    }

    #[test]
    fn corrupted_gradient_is_reported() {
        let p = Params::<f64>::init(cfg(), 4);
        let corrupted = |q: &Params<f64>| {
            let (l, mut g) = quadratic(q);
            g.sel_w2.mapv_inplace(|v| v * 1.5 + 0.01);
            (l, g)
        };
        let r = gradient_check(corrupted, &p, 1e-4, 1e-4, 10, 0);
        assert!(!r.passed());
        assert_eq!(r.worst_tensor, "sel_w2");
        let err = r.into_result().unwrap_err().to_string();
        assert!(err.contains("sel_w2"), "{err}");
    }
}
