//! Output heads over final hidden states of one sequence.
//!
//! * selection: `s_t = (W1 h_t + b1) . (W2 h_mask + b2)`
//! * label (AS): `softmax_t(w_l . h_t + b_l)`
//! * exophoric: `softmax_z(w_{l,z} . h_1 + b_{l,z})` over author / reader /
//!   general / none
//! * cloze: vocabulary logits tied to the token embedding matrix
//!
//! Positions whose token can never be an answer are set to `-inf` before any
//! softmax or argmax; see [`candidate_mask`].

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};

use super::{Params, Real, EXO_CATEGORIES};
use crate::vocab::{self, TokenId};
use crate::zar::{CaseLabel, ExoCategory};

/// `true` where a position may be selected.
pub fn candidate_mask(tokens: &[TokenId]) -> Vec<bool> {
    tokens
        .iter()
        .enumerate()
        .map(|(i, &id)| i == 0 || (!vocab::is_unselectable(id) && id != vocab::CLS))
        .collect()
}

fn apply_mask<F: Real>(values: &mut Array1<F>, tokens: &[TokenId]) {
    for (v, ok) in values.iter_mut().zip(candidate_mask(tokens)) {
        if !ok {
            *v = F::neg_infinity();
        }
    }
}

/// Softmax that treats `-inf` entries as impossible.
pub fn softmax<F: Real>(logits: ArrayView1<F>) -> Array1<F> {
    let max = logits
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(F::neg_infinity(), F::max);
    let mut out = logits.mapv(|v| if v.is_finite() { (v - max).exp() } else { F::zero() });
    let sum = out.sum();
    out.mapv_inplace(|v| v / sum);
    out
}

pub fn log_softmax<F: Real>(logits: ArrayView1<F>) -> Array1<F> {
    let max = logits
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(F::neg_infinity(), F::max);
    let lse = logits
        .iter()
        .filter(|v| v.is_finite())
        .fold(F::zero(), |a, &v| a + (v - max).exp())
        .ln()
        + max;
    logits.mapv(|v| v - lse)
}

/// Masked selection scores for a sequence; `mask_index` is 1-based.
pub fn selection_scores<F: Real>(params: &Params<F>, h: ArrayView2<F>, mask_index: usize, tokens: &[TokenId]) -> Array1<F> {
    let mut u = h.dot(&params.sel_w1);
    u += &params.sel_b1;
    let mut q = h.row(mask_index - 1).dot(&params.sel_w2);
    q += &params.sel_b2.row(0);
    let mut s = u.dot(&q);
    apply_mask(&mut s, tokens);
    s
}

/// Accumulates gradients given `d_scores` (zero at masked positions).
pub fn selection_backward<F: Real>(
    params: &Params<F>,
    h: ArrayView2<F>,
    mask_index: usize,
    d_scores: ArrayView1<F>,
    grads: &mut Params<F>,
    mut dh: ArrayViewMut2<F>,
) {
    let mut u = h.dot(&params.sel_w1);
    u += &params.sel_b1;
    let hm = h.row(mask_index - 1);
    let mut q = hm.dot(&params.sel_w2);
    q += &params.sel_b2.row(0);

    // s = U q  =>  dU = ds q^T, dq = U^T ds
    let ds_col = d_scores.insert_axis(Axis(1));
    let du = ds_col.dot(&q.view().insert_axis(Axis(0)));
    let dq = u.t().dot(&d_scores);

    grads.sel_w1 += &h.t().dot(&du);
    grads.sel_b1 += &du.sum_axis(Axis(0));
    dh += &du.dot(&params.sel_w1.t());

    grads.sel_w2 += &hm.insert_axis(Axis(1)).dot(&dq.view().insert_axis(Axis(0)));
    grads.sel_b2 += &dq;
    let mut dhm = dh.row_mut(mask_index - 1);
    dhm += &params.sel_w2.dot(&dq);
}

/// Masked label logits `w_l . h_t + b_l`.
pub fn label_logits<F: Real>(params: &Params<F>, h: ArrayView2<F>, label: CaseLabel, tokens: &[TokenId]) -> Array1<F> {
    let l = label.index();
    let mut z = h.dot(&params.label_w.row(l));
    z += params.label_b[[0, l]];
    apply_mask(&mut z, tokens);
    z
}

pub fn label_distribution<F: Real>(params: &Params<F>, h: ArrayView2<F>, label: CaseLabel, tokens: &[TokenId]) -> Array1<F> {
    softmax(label_logits(params, h, label, tokens).view())
}

pub fn label_backward<F: Real>(
    params: &Params<F>,
    h: ArrayView2<F>,
    label: CaseLabel,
    d_logits: ArrayView1<F>,
    grads: &mut Params<F>,
    mut dh: ArrayViewMut2<F>,
) {
    let l = label.index();
    let mut gw = grads.label_w.row_mut(l);
    gw += &h.t().dot(&d_logits);
    grads.label_b[[0, l]] += d_logits.sum();
    let w = params.label_w.row(l);
    dh += &d_logits.insert_axis(Axis(1)).dot(&w.insert_axis(Axis(0)));
}

/// Exophoric logits from the dummy-token state `h_1`, ordered as
/// [`ExoCategory::ALL`].
pub fn exophoric_logits<F: Real>(params: &Params<F>, h1: ArrayView1<F>, label: CaseLabel) -> Array1<F> {
    let rows = label.index() * EXO_CATEGORIES..(label.index() + 1) * EXO_CATEGORIES;
    let w = params.exo_w.slice(ndarray::s![rows.clone(), ..]);
    let mut z = w.dot(&h1);
    z += &params.exo_b.slice(ndarray::s![0, rows]);
    z
}

pub fn exophoric_distribution<F: Real>(params: &Params<F>, h1: ArrayView1<F>, label: CaseLabel) -> Array1<F> {
    softmax(exophoric_logits(params, h1, label).view())
}

pub fn exophoric_backward<F: Real>(
    params: &Params<F>,
    h1: ArrayView1<F>,
    label: CaseLabel,
    d_logits: ArrayView1<F>,
    grads: &mut Params<F>,
    mut dh1: ArrayViewMut1<F>,
) {
    let rows = label.index() * EXO_CATEGORIES..(label.index() + 1) * EXO_CATEGORIES;
    let mut gw = grads.exo_w.slice_mut(ndarray::s![rows.clone(), ..]);
    gw += &d_logits.insert_axis(Axis(1)).dot(&h1.insert_axis(Axis(0)));
    let mut gb = grads.exo_b.slice_mut(ndarray::s![0, rows.clone()]);
    gb += &d_logits;
    let w = params.exo_w.slice(ndarray::s![rows, ..]);
    dh1 += &w.t().dot(&d_logits);
}

/// Vocabulary logits for the given hidden rows, `(rows, vocab_size)`.
pub fn cloze_logits<F: Real>(params: &Params<F>, h_rows: ArrayView2<F>) -> Array2<F> {
    h_rows.dot(&params.token_embedding.t())
}

/// Returns the gradient for `h_rows` and accumulates into the tied
/// embedding.
pub fn cloze_backward<F: Real>(params: &Params<F>, h_rows: ArrayView2<F>, d_logits: ArrayView2<F>, grads: &mut Params<F>) -> Array2<F> {
    grads.token_embedding += &d_logits.t().dot(&h_rows);
    d_logits.dot(&params.token_embedding)
}

/// Argmax over the exophoric distribution with ties going to the earlier
/// category.
pub fn argmax_category<F: Real>(probs: ArrayView1<F>) -> ExoCategory {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    ExoCategory::ALL[best]
}
