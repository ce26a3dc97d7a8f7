//! Bidirectional post-layer-norm transformer encoder over a ragged batch.
//!
//! Sequences are stacked row-wise into one `(rows, dim)` matrix; linear
//! maps run on the whole stack and attention runs per segment. Keys holding
//! `[PAD]` are masked out of every attention row.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};

use super::{cast, LayerParams, Params, Real};
use crate::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Rows `start .. start + len` of the stacked batch belong to one sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerCache<F> {
    x: Array2<F>,
    q: Array2<F>,
    k: Array2<F>,
    v: Array2<F>,
    /// Attention probabilities per (segment, head), segment-major.
    probs: Vec<Array2<F>>,
    ctx: Array2<F>,
    xhat1: Array2<F>,
    rstd1: Array1<F>,
    y1: Array2<F>,
    ff_pre: Array2<F>,
    ff_act: Array2<F>,
    xhat2: Array2<F>,
    rstd2: Array1<F>,
}

#[derive(Debug, Clone)]
pub struct EncoderCache<F> {
    pub(crate) segments: Vec<Segment>,
    pub(crate) layers: Vec<LayerCache<F>>,
}

fn add_row_bias<F: Real>(x: &mut Array2<F>, b: &Array2<F>) {
    *x += b;
}

fn sum_rows<F: Real>(x: &Array2<F>) -> Array2<F> {
    x.sum_axis(Axis(0)).insert_axis(Axis(0))
}

fn layer_norm<F: Real>(x: &Array2<F>, g: &Array2<F>, b: &Array2<F>) -> (Array2<F>, Array2<F>, Array1<F>) {
    let d = cast::<F>(x.ncols() as f64);
    let eps = cast::<F>(LAYER_NORM_EPS);
    let mut xhat = x.clone();
    let mut rstd = Array1::zeros(x.nrows());
    for (mut row, r) in xhat.rows_mut().into_iter().zip(rstd.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().fold(F::zero(), |a, &v| a + v * v) / d;
        *r = F::one() / (var + eps).sqrt();
        let rv = *r;
        row.mapv_inplace(|v| v * rv);
    }
    let mut y = &xhat * g;
    y += b;
    (y, xhat, rstd)
}

/// Returns `dx` and accumulates gain / bias gradients.
fn layer_norm_backward<F: Real>(
    dy: &Array2<F>,
    xhat: &Array2<F>,
    rstd: &Array1<F>,
    g: &Array2<F>,
    dg: &mut Array2<F>,
    db: &mut Array2<F>,
) -> Array2<F> {
    *dg += &sum_rows(&(dy * xhat));
    *db += &sum_rows(dy);
    let d = cast::<F>(dy.ncols() as f64);
    let mut dxhat = dy * g;
    for ((mut row, xh), &r) in dxhat.rows_mut().into_iter().zip(xhat.rows()).zip(rstd.iter()) {
        let mean_d = row.sum() / d;
        let mean_dx = row.iter().zip(xh.iter()).fold(F::zero(), |a, (&u, &v)| a + u * v) / d;
        Zip::from(&mut row).and(&xh).for_each(|u, &v| *u = r * (*u - mean_d - v * mean_dx));
    }
    dxhat
}

fn gelu_coeffs<F: Real>() -> (F, F) {
    (cast((2.0 / std::f64::consts::PI).sqrt()), cast(0.044715))
}

fn gelu<F: Real>(x: F) -> F {
    let (k, c) = gelu_coeffs::<F>();
    let half = cast::<F>(0.5);
    half * x * (F::one() + (k * (x + c * x * x * x)).tanh())
}

fn gelu_grad<F: Real>(x: F) -> F {
    let (k, c) = gelu_coeffs::<F>();
    let half = cast::<F>(0.5);
    let three = cast::<F>(3.0);
    let t = (k * (x + c * x * x * x)).tanh();
    half * (F::one() + t) + half * x * (F::one() - t * t) * k * (F::one() + three * c * x * x)
}

/// Row-wise softmax with entries at masked keys forced to zero.
fn masked_softmax_rows<F: Real>(scores: &mut Array2<F>, key_mask: &[bool]) {
    for mut row in scores.rows_mut() {
        let mut max = F::neg_infinity();
        for (v, &masked) in row.iter().zip(key_mask) {
            if !masked && *v > max {
                max = *v;
            }
        }
        let mut sum = F::zero();
        for (v, &masked) in row.iter_mut().zip(key_mask) {
            *v = if masked { F::zero() } else { (*v - max).exp() };
            sum += *v;
        }
        row.mapv_inplace(|v| v / sum);
    }
}

fn layer_forward<F: Real>(
    p: &LayerParams<F>,
    heads: usize,
    x: Array2<F>,
    segments: &[Segment],
    key_mask: &[bool],
) -> (Array2<F>, LayerCache<F>) {
    let dim = x.ncols();
    let head_dim = dim / heads;
    let scale = cast::<F>(1.0 / (head_dim as f64).sqrt());

    let mut q = x.dot(&p.q_w);
    add_row_bias(&mut q, &p.q_b);
    let mut k = x.dot(&p.k_w);
    add_row_bias(&mut k, &p.k_b);
    let mut v = x.dot(&p.v_w);
    add_row_bias(&mut v, &p.v_b);

    let mut ctx = Array2::zeros(x.raw_dim());
    let mut probs = Vec::with_capacity(segments.len() * heads);
    for seg in segments {
        let rows = seg.start..seg.start + seg.len;
        let mask = &key_mask[rows.clone()];
        for h in 0..heads {
            let cols = h * head_dim..(h + 1) * head_dim;
            let qh = q.slice(s![rows.clone(), cols.clone()]);
            let kh = k.slice(s![rows.clone(), cols.clone()]);
            let vh = v.slice(s![rows.clone(), cols.clone()]);
            let mut att = qh.dot(&kh.t());
            att.mapv_inplace(|a| a * scale);
            masked_softmax_rows(&mut att, mask);
            ctx.slice_mut(s![rows.clone(), cols]).assign(&att.dot(&vh));
            probs.push(att);
        }
    }

    let mut r1 = ctx.dot(&p.o_w);
    add_row_bias(&mut r1, &p.o_b);
    r1 += &x;
    let (y1, xhat1, rstd1) = layer_norm(&r1, &p.ln1_g, &p.ln1_b);

    let mut ff_pre = y1.dot(&p.ff1_w);
    add_row_bias(&mut ff_pre, &p.ff1_b);
    let ff_act = ff_pre.mapv(gelu);
    let mut r2 = ff_act.dot(&p.ff2_w);
    add_row_bias(&mut r2, &p.ff2_b);
    r2 += &y1;
    let (y2, xhat2, rstd2) = layer_norm(&r2, &p.ln2_g, &p.ln2_b);

    let cache = LayerCache {
        x,
        q,
        k,
        v,
        probs,
        ctx,
        xhat1,
        rstd1,
        y1,
        ff_pre,
        ff_act,
        xhat2,
        rstd2,
    };
    (y2, cache)
}

fn layer_backward<F: Real>(
    p: &LayerParams<F>,
    g: &mut LayerParams<F>,
    heads: usize,
    c: &LayerCache<F>,
    segments: &[Segment],
    dy2: &Array2<F>,
) -> Array2<F> {
    let dim = dy2.ncols();
    let head_dim = dim / heads;
    let scale = cast::<F>(1.0 / (head_dim as f64).sqrt());

    let dr2 = layer_norm_backward(dy2, &c.xhat2, &c.rstd2, &p.ln2_g, &mut g.ln2_g, &mut g.ln2_b);
    g.ff2_w += &c.ff_act.t().dot(&dr2);
    g.ff2_b += &sum_rows(&dr2);
    let mut dpre = dr2.dot(&p.ff2_w.t());
    Zip::from(&mut dpre).and(&c.ff_pre).for_each(|d, &x| *d *= gelu_grad(x));
    g.ff1_w += &c.y1.t().dot(&dpre);
    g.ff1_b += &sum_rows(&dpre);
    let mut dy1 = dpre.dot(&p.ff1_w.t());
    dy1 += &dr2;

    let dr1 = layer_norm_backward(&dy1, &c.xhat1, &c.rstd1, &p.ln1_g, &mut g.ln1_g, &mut g.ln1_b);
    g.o_w += &c.ctx.t().dot(&dr1);
    g.o_b += &sum_rows(&dr1);
    let dctx = dr1.dot(&p.o_w.t());

    let mut dq = Array2::zeros(dr1.raw_dim());
    let mut dk = Array2::zeros(dr1.raw_dim());
    let mut dv = Array2::zeros(dr1.raw_dim());
    let mut probs = c.probs.iter();
    for seg in segments {
        let rows = seg.start..seg.start + seg.len;
        for h in 0..heads {
            let att = probs.next().expect("cached attention");
            let cols = h * head_dim..(h + 1) * head_dim;
            let qh = c.q.slice(s![rows.clone(), cols.clone()]);
            let kh = c.k.slice(s![rows.clone(), cols.clone()]);
            let vh = c.v.slice(s![rows.clone(), cols.clone()]);
            let dch = dctx.slice(s![rows.clone(), cols.clone()]);

            dv.slice_mut(s![rows.clone(), cols.clone()]).assign(&att.t().dot(&dch));
            let mut ds = dch.dot(&vh.t());
            for (mut drow, prow) in ds.rows_mut().into_iter().zip(att.rows()) {
                let dot = drow.iter().zip(prow.iter()).fold(F::zero(), |a, (&u, &v)| a + u * v);
                Zip::from(&mut drow).and(&prow).for_each(|d, &pv| *d = pv * (*d - dot) * scale);
            }
            dq.slice_mut(s![rows.clone(), cols.clone()]).assign(&ds.dot(&kh));
            dk.slice_mut(s![rows.clone(), cols]).assign(&ds.t().dot(&qh));
        }
    }

    let mut dx = dr1;
    for (d, w, gw, gb) in [
        (&dq, &p.q_w, &mut g.q_w, &mut g.q_b),
        (&dk, &p.k_w, &mut g.k_w, &mut g.k_b),
        (&dv, &p.v_w, &mut g.v_w, &mut g.v_b),
    ] {
        *gw += &c.x.t().dot(d);
        *gb += &sum_rows(d);
        dx += &d.dot(&w.t());
    }
    dx
}

/// Encodes a stacked batch. `key_mask[r]` marks rows that must not be
/// attended to (padding).
pub fn forward<F: Real>(
    params: &Params<F>,
    x: Array2<F>,
    segments: &[Segment],
    key_mask: &[bool],
) -> Result<(Array2<F>, EncoderCache<F>)> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("encoder input".into()));
    }
    let heads = params.config.heads;
    let mut layers = Vec::with_capacity(params.layers.len());
    let mut h = x;
    for layer in &params.layers {
        let (next, cache) = layer_forward(layer, heads, h, segments, key_mask);
        layers.push(cache);
        h = next;
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("hidden states".into()));
    }
    Ok((
        h,
        EncoderCache {
            segments: segments.to_vec(),
            layers,
        },
    ))
}

/// Back-propagates `dh` through every layer, accumulating into `grads`, and
/// returns the gradient with respect to the input embeddings.
pub fn backward<F: Real>(params: &Params<F>, cache: &EncoderCache<F>, dh: Array2<F>, grads: &mut Params<F>) -> Array2<F> {
    let heads = params.config.heads;
    let mut d = dh;
    for ((p, g), c) in params
        .layers
        .iter()
        .zip(grads.layers.iter_mut())
        .zip(cache.layers.iter())
        .rev()
    {
        d = layer_backward(p, g, heads, c, &cache.segments, &d);
    }
    d
}

/// Single-sequence convenience wrapper.
pub fn transformer_forward<F: Real>(params: &Params<F>, embeddings: ArrayView2<F>) -> Result<Array2<F>> {
    let seg = [Segment {
        start: 0,
        len: embeddings.nrows(),
    }];
    let mask = vec![false; embeddings.nrows()];
    forward(params, embeddings.to_owned(), &seg, &mask).map(|(h, _)| h)
}
