use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ModelConfig, Real, EXO_CATEGORIES, LABELS};

pub const INIT_STD: f64 = 0.02;

/// Weights of one post-layer-norm transformer block. Linear maps are stored
/// as `(in, out)` so that rows of activations multiply on the left; biases
/// and layer-norm vectors are `(1, n)` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<F> {
    pub q_w: Array2<F>,
    pub q_b: Array2<F>,
    pub k_w: Array2<F>,
    pub k_b: Array2<F>,
    pub v_w: Array2<F>,
    pub v_b: Array2<F>,
    pub o_w: Array2<F>,
    pub o_b: Array2<F>,
    pub ln1_g: Array2<F>,
    pub ln1_b: Array2<F>,
    pub ff1_w: Array2<F>,
    pub ff1_b: Array2<F>,
    pub ff2_w: Array2<F>,
    pub ff2_b: Array2<F>,
    pub ln2_g: Array2<F>,
    pub ln2_b: Array2<F>,
}

/// All trainable tensors.
///
/// Embedding matrices are stored one row per entry: `token_embedding` is
/// `(vocab_size, dim)`, `position_embedding` is `(max_len, dim)` with row
/// `t - 1` for position `t`, and `predicate_embedding` is `(2, dim)` with row
/// 1 for predicate tokens. `label_w` holds one row per case label and
/// `exo_w` one row per `(label, category)` pair at `label * 4 + category`.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<F> {
    pub config: ModelConfig,
    pub token_embedding: Array2<F>,
    pub position_embedding: Array2<F>,
    pub predicate_embedding: Array2<F>,
    pub layers: Vec<LayerParams<F>>,
    pub sel_w1: Array2<F>,
    pub sel_b1: Array2<F>,
    pub sel_w2: Array2<F>,
    pub sel_b2: Array2<F>,
    pub label_w: Array2<F>,
    pub label_b: Array2<F>,
    pub exo_w: Array2<F>,
    pub exo_b: Array2<F>,
}

impl<F: Real> LayerParams<F> {
    fn zeros(c: &ModelConfig) -> Self {
        let (d, f) = (c.dim, c.ff_dim);
        let z = |r, k| Array2::zeros((r, k));
        LayerParams {
            q_w: z(d, d),
            q_b: z(1, d),
            k_w: z(d, d),
            k_b: z(1, d),
            v_w: z(d, d),
            v_b: z(1, d),
            o_w: z(d, d),
            o_b: z(1, d),
            ln1_g: z(1, d),
            ln1_b: z(1, d),
            ff1_w: z(d, f),
            ff1_b: z(1, f),
            ff2_w: z(f, d),
            ff2_b: z(1, d),
            ln2_g: z(1, d),
            ln2_b: z(1, d),
        }
    }

    fn tensors(&self) -> [(&'static str, &Array2<F>); 16] {
        [
            ("q_w", &self.q_w),
            ("q_b", &self.q_b),
            ("k_w", &self.k_w),
            ("k_b", &self.k_b),
            ("v_w", &self.v_w),
            ("v_b", &self.v_b),
            ("o_w", &self.o_w),
            ("o_b", &self.o_b),
            ("ln1_g", &self.ln1_g),
            ("ln1_b", &self.ln1_b),
            ("ff1_w", &self.ff1_w),
            ("ff1_b", &self.ff1_b),
            ("ff2_w", &self.ff2_w),
            ("ff2_b", &self.ff2_b),
            ("ln2_g", &self.ln2_g),
            ("ln2_b", &self.ln2_b),
        ]
    }

    fn tensors_mut(&mut self) -> [(&'static str, &mut Array2<F>); 16] {
        [
            ("q_w", &mut self.q_w),
            ("q_b", &mut self.q_b),
            ("k_w", &mut self.k_w),
            ("k_b", &mut self.k_b),
            ("v_w", &mut self.v_w),
            ("v_b", &mut self.v_b),
            ("o_w", &mut self.o_w),
            ("o_b", &mut self.o_b),
            ("ln1_g", &mut self.ln1_g),
            ("ln1_b", &mut self.ln1_b),
            ("ff1_w", &mut self.ff1_w),
            ("ff1_b", &mut self.ff1_b),
            ("ff2_w", &mut self.ff2_w),
            ("ff2_b", &mut self.ff2_b),
            ("ln2_g", &mut self.ln2_g),
            ("ln2_b", &mut self.ln2_b),
        ]
    }
}

impl<F: Real> Params<F> {
    pub fn zeros(config: ModelConfig) -> Self {
        let d = config.dim;
        let z = |r, k| Array2::zeros((r, k));
        Params {
            token_embedding: z(config.vocab_size, d),
            position_embedding: z(config.max_len, d),
            predicate_embedding: z(2, d),
            layers: (0..config.layers).map(|_| LayerParams::zeros(&config)).collect(),
            sel_w1: z(d, d),
            sel_b1: z(1, d),
            sel_w2: z(d, d),
            sel_b2: z(1, d),
            label_w: z(LABELS, d),
            label_b: z(1, LABELS),
            exo_w: z(LABELS * EXO_CATEGORIES, d),
            exo_b: z(1, LABELS * EXO_CATEGORIES),
            config,
        }
    }

    /// Normal(0, 0.02) weights, zero biases, unit layer-norm gains. Tensors
    /// are filled in [`Params::tensors`] order from one seeded stream.
    pub fn init(config: ModelConfig, seed: u64) -> Self {
        let mut p = Self::zeros(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        for (name, t) in p.tensors_mut() {
            fill_init(&name, t, &normal, &mut rng);
        }
        p
    }

    /// Re-draws the tensors whose names satisfy `select`, leaving the rest
    /// untouched.
    pub fn reinit_where(&mut self, seed: u64, select: impl Fn(&str) -> bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        for (name, t) in self.tensors_mut() {
            if select(&name) {
                fill_init(&name, t, &normal, &mut rng);
            }
        }
    }

    /// Tensors in their fixed canonical order (also the checkpoint order).
    pub fn tensors(&self) -> Vec<(String, &Array2<F>)> {
        let mut out: Vec<(String, &Array2<F>)> = vec![
            ("token_embedding".into(), &self.token_embedding),
            ("position_embedding".into(), &self.position_embedding),
            ("predicate_embedding".into(), &self.predicate_embedding),
        ];
        for (i, layer) in self.layers.iter().enumerate() {
            out.extend(layer.tensors().into_iter().map(|(n, t)| (format!("layer{i}.{n}"), t)));
        }
        out.extend([
            ("sel_w1".into(), &self.sel_w1),
            ("sel_b1".into(), &self.sel_b1),
            ("sel_w2".into(), &self.sel_w2),
            ("sel_b2".into(), &self.sel_b2),
            ("label_w".into(), &self.label_w),
            ("label_b".into(), &self.label_b),
            ("exo_w".into(), &self.exo_w),
            ("exo_b".into(), &self.exo_b),
        ]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Array2<F>)> {
        let mut out: Vec<(String, &mut Array2<F>)> = vec![
            ("token_embedding".into(), &mut self.token_embedding),
            ("position_embedding".into(), &mut self.position_embedding),
            ("predicate_embedding".into(), &mut self.predicate_embedding),
        ];
        for (i, layer) in self.layers.iter_mut().enumerate() {
            out.extend(layer.tensors_mut().into_iter().map(|(n, t)| (format!("layer{i}.{n}"), t)));
        }
        out.extend([
            ("sel_w1".into(), &mut self.sel_w1),
            ("sel_b1".into(), &mut self.sel_b1),
            ("sel_w2".into(), &mut self.sel_w2),
            ("sel_b2".into(), &mut self.sel_b2),
            ("label_w".into(), &mut self.label_w),
            ("label_b".into(), &mut self.label_b),
            ("exo_w".into(), &mut self.exo_w),
            ("exo_b".into(), &mut self.exo_b),
        ]);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn cast<G: Real>(&self) -> Params<G> {
        let mut out = Params::<G>::zeros(self.config);
        for ((_, dst), (_, src)) in out.tensors_mut().into_iter().zip(self.tensors()) {
            dst.zip_mut_with(src, |d, &s| *d = G::from(s).expect("finite cast"));
        }
        out
    }

    pub fn fill(&mut self, value: F) {
        for (_, t) in self.tensors_mut() {
            t.fill(value);
        }
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &Params<F>, scale: F) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.scaled_add(scale, b);
        }
    }

    pub fn scale(&mut self, factor: F) {
        for (_, t) in self.tensors_mut() {
            t.mapv_inplace(|x| x * factor);
        }
    }

    pub fn global_norm(&self) -> F {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .fold(F::zero(), |acc, &x| acc + x * x)
            .sqrt()
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<String> {
        self.tensors()
            .into_iter()
            .find(|(_, t)| t.iter().any(|x| !x.is_finite()))
            .map(|(n, _)| n)
    }
}

fn fill_init<F: Real>(name: &str, t: &mut Array2<F>, normal: &Normal<f64>, rng: &mut ChaCha8Rng) {
    let leaf = name.rsplit('.').next().unwrap_or(name);
    if leaf.ends_with("_g") {
        t.fill(F::one());
    } else if leaf.ends_with("_b") || leaf.ends_with("_b1") || leaf.ends_with("_b2") {
        t.fill(F::zero());
    } else {
        t.mapv_inplace(|_| F::from(normal.sample(rng)).expect("finite"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModelConfig {
        ModelConfig {
            vocab_size: 20,
            dim: 8,
            max_len: 16,
            layers: 2,
            heads: 2,
            ff_dim: 12,
        }
    }

    #[test]
    fn init_is_deterministic_and_shaped() {
        let a = Params::<f32>::init(cfg(), 3);
        let b = Params::<f32>::init(cfg(), 3);
        assert_eq!(a, b);
        assert_ne!(a, Params::<f32>::init(cfg(), 4));
        assert_eq!(a.token_embedding.dim(), (20, 8));
        assert_eq!(a.position_embedding.dim(), (16, 8));
        assert_eq!(a.layers[1].ff1_w.dim(), (8, 12));
        assert_eq!(a.exo_w.dim(), (12, 8));
        assert!(a.layers[0].ln1_g.iter().all(|&x| x == 1.0));
        assert!(a.sel_b1.iter().all(|&x| x == 0.0));
        assert!(a.layers[0].q_b.iter().all(|&x| x == 0.0));
        assert!(a.first_non_finite().is_none());
    }

    #[test]
    fn init_std_is_close_to_target() {
        let c = ModelConfig {
            vocab_size: 400,
            dim: 64,
            ..cfg()
        };
        let p = Params::<f64>::init(c, 1);
        let n = p.token_embedding.len() as f64;
        let var = p.token_embedding.iter().map(|x| x * x).sum::<f64>() / n;
        assert!((var.sqrt() - INIT_STD).abs() < 0.001, "{}", var.sqrt());
    }

    #[test]
    fn tensor_order_is_stable() {
        let p = Params::<f32>::zeros(cfg());
        let names: Vec<String> = p.tensors().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names[0], "token_embedding");
        assert_eq!(names[3], "layer0.q_w");
        assert_eq!(names[3 + 16], "layer1.q_w");
        assert_eq!(names.last().unwrap(), "exo_b");
        assert_eq!(names.len(), 3 + 2 * 16 + 8);
    }

    #[test]
    fn reinit_touches_only_selected() {
        let mut p = Params::<f64>::init(cfg(), 1);
        let before = p.clone();
        p.reinit_where(9, |n| n.starts_with("label"));
        assert_ne!(p.label_w, before.label_w);
        assert_eq!(p.sel_w1, before.sel_w1);
        assert_eq!(p.token_embedding, before.token_embedding);
    }
}
