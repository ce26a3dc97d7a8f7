//! Batched losses for every training task, with gradients.

use ndarray::{s, Array2, Axis};

use super::loss::{kl_loss, softmax_cross_entropy};
use crate::datagen::GoldDistribution;
use crate::encoder::heads::{
    cloze_backward, cloze_logits, exophoric_backward, exophoric_logits, label_backward, label_logits,
    selection_backward, selection_scores,
};
use crate::encoder::{backprop, encode, EncoderInput, Params, Real};
use crate::vocab::TokenId;
use crate::zar::{CaseLabel, ExoCategory};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// KL between `gold` and the selection scores of the `[MASK]` at
    /// `mask_index`, plus exophoric cross-entropy when the dummy is gold.
    Select {
        mask_index: usize,
        gold: GoldDistribution,
        exophoric: Option<(CaseLabel, ExoCategory)>,
    },
    /// KL between `gold` and the per-label distribution, plus exophoric
    /// cross-entropy when the dummy is gold.
    Label {
        label: CaseLabel,
        gold: GoldDistribution,
        exophoric: Option<ExoCategory>,
    },
    /// Vocabulary cross-entropy at `(position, original token)` pairs,
    /// averaged over the pairs.
    Cloze { targets: Vec<(usize, TokenId)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: EncoderInput,
    pub targets: Vec<Target>,
}

/// Mean loss over targets and how many targets were decoded correctly.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BatchStats {
    pub loss: f64,
    pub correct: usize,
    pub total: usize,
}

impl BatchStats {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

fn argmax<F: Real>(v: ndarray::ArrayView1<F>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] || v[best].is_nan() {
            best = i;
        }
    }
    best
}

/// Correct when the argmax lies in the gold support and, for a dummy gold
/// with a category, the exophoric argmax matches it.
fn selection_correct<F: Real>(
    values: ndarray::ArrayView1<F>,
    gold: &GoldDistribution,
    exo: Option<(ndarray::ArrayView1<F>, ExoCategory)>,
) -> bool {
    let best = argmax(values);
    if gold.probs[best] <= 0.0 {
        return false;
    }
    match (best, exo) {
        (0, Some((logits, cat))) => argmax(logits) == cat.index(),
        _ => true,
    }
}

/// Forward pass over `examples`; with `grads`, also accumulates the gradient
/// of the mean loss.
pub fn batch_loss<F: Real>(params: &Params<F>, examples: &[Example], grads: Option<&mut Params<F>>) -> Result<BatchStats> {
    let n_targets: usize = examples.iter().map(|e| e.targets.len()).sum();
    if n_targets == 0 {
        return Err(Error::Empty("batch has no training targets".into()));
    }
    let inputs: Vec<EncoderInput> = examples.iter().map(|e| e.input.clone()).collect();
    let encoded = encode(params, &inputs)?;
    let want_grad = grads.is_some();
    let mut d_hidden = if want_grad {
        Array2::zeros(encoded.hidden.raw_dim())
    } else {
        Array2::zeros((0, 0))
    };
    let mut scratch = if want_grad { Some(Params::zeros(params.config)) } else { None };
    let scale: F = F::from(1.0 / n_targets as f64).unwrap();
    let mut stats = BatchStats {
        total: n_targets,
        ..Default::default()
    };
    let mut total_loss = 0.0;

    for (i, ex) in examples.iter().enumerate() {
        let h = encoded.hidden_of(i);
        let seg = encoded.segments[i];
        let tokens = &ex.input.tokens;
        for target in &ex.targets {
            match target {
                Target::Select {
                    mask_index,
                    gold,
                    exophoric,
                } => {
                    let scores = selection_scores(params, h, *mask_index, tokens);
                    let (l, d) = kl_loss(gold, scores.view())?;
                    total_loss += l.to_f64().unwrap();
                    let exo = exophoric.map(|(label, cat)| (label, cat, exophoric_logits(params, h.row(0), label)));
                    if selection_correct(scores.view(), gold, exo.as_ref().map(|(_, c, z)| (z.view(), *c))) {
                        stats.correct += 1;
                    }
                    if let Some(g) = scratch.as_mut() {
                        let mut dh = d_hidden.slice_mut(s![seg.start..seg.start + seg.len, ..]);
                        selection_backward(params, h, *mask_index, (&d * scale).view(), g, dh.view_mut());
                        if let Some((label, cat, z)) = &exo {
                            let (_, dz) = softmax_cross_entropy(cat.index(), z.view());
                            exophoric_backward(params, h.row(0), *label, (&dz * scale).view(), g, dh.row_mut(0));
                        }
                    }
                    if let Some((_, cat, z)) = &exo {
                        total_loss += softmax_cross_entropy(cat.index(), z.view()).0.to_f64().unwrap();
                    }
                }
                Target::Label { label, gold, exophoric } => {
                    let logits = label_logits(params, h, *label, tokens);
                    let (l, d) = kl_loss(gold, logits.view())?;
                    total_loss += l.to_f64().unwrap();
                    let exo = exophoric.map(|cat| (cat, exophoric_logits(params, h.row(0), *label)));
                    if selection_correct(logits.view(), gold, exo.as_ref().map(|(c, z)| (z.view(), *c))) {
                        stats.correct += 1;
                    }
                    if let Some((cat, z)) = &exo {
                        total_loss += softmax_cross_entropy(cat.index(), z.view()).0.to_f64().unwrap();
                    }
                    if let Some(g) = scratch.as_mut() {
                        let mut dh = d_hidden.slice_mut(s![seg.start..seg.start + seg.len, ..]);
                        label_backward(params, h, *label, (&d * scale).view(), g, dh.view_mut());
                        if let Some((cat, z)) = &exo {
                            let (_, dz) = softmax_cross_entropy(cat.index(), z.view());
                            exophoric_backward(params, h.row(0), *label, (&dz * scale).view(), g, dh.row_mut(0));
                        }
                    }
                }
                Target::Cloze { targets } => {
                    if targets.is_empty() {
                        return Err(Error::InvalidArgument("cloze target without masked positions".into()));
                    }
                    let rows: Vec<usize> = targets.iter().map(|&(p, _)| p - 1).collect();
                    let hr = h.select(Axis(0), &rows);
                    let logits = cloze_logits(params, hr.view());
                    let mut d = Array2::zeros(logits.raw_dim());
                    let mut l_sum = 0.0;
                    let mut all_right = true;
                    for (k, &(_, orig)) in targets.iter().enumerate() {
                        let (l, dz) = softmax_cross_entropy(orig as usize, logits.row(k));
                        l_sum += l.to_f64().unwrap();
                        all_right &= argmax(logits.row(k)) == orig as usize;
                        d.row_mut(k).assign(&dz);
                    }
                    let per = 1.0 / targets.len() as f64;
                    total_loss += l_sum * per;
                    if all_right {
                        stats.correct += 1;
                    }
                    if let Some(g) = scratch.as_mut() {
                        d *= scale * F::from(per).unwrap();
                        let dhr = cloze_backward(params, hr.view(), d.view(), g);
                        for (k, &r) in rows.iter().enumerate() {
                            let mut row = d_hidden.row_mut(seg.start + r);
                            row += &dhr.row(k);
                        }
                    }
                }
            }
        }
    }

    stats.loss = total_loss / n_targets as f64;
    if let (Some(grads), Some(mut g)) = (grads, scratch) {
        backprop(params, &inputs, &encoded, d_hidden, &mut g);
        grads.add_scaled(&g, F::one());
    }
    Ok(stats)
}
