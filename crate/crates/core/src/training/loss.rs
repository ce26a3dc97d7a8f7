use ndarray::{Array1, ArrayView1};

use crate::datagen::GoldDistribution;
use crate::encoder::heads::{log_softmax, softmax};
use crate::encoder::Real;
use crate::{Error, Result};

/// `KL(y || softmax(s))` over the unmasked (finite) positions of `s`, and its
/// gradient `softmax(s) - y` with zeros at masked positions.
pub fn kl_loss<F: Real>(y: &GoldDistribution, scores: ArrayView1<F>) -> Result<(F, Array1<F>)> {
    if y.probs.len() != scores.len() {
        return Err(Error::InvalidArgument(format!(
            "gold distribution has length {}, scores {}",
            y.probs.len(),
            scores.len()
        )));
    }
    if let Some(p) = y.support().find(|&p| !scores[p - 1].is_finite()) {
        return Err(Error::InvalidArgument(format!("gold position {p} is masked")));
    }
    let log_p = log_softmax(scores);
    let p = softmax(scores);
    let mut loss = F::zero();
    for (&yt, &lp) in y.probs.iter().zip(log_p.iter()) {
        if yt > 0.0 {
            let yt = F::from(yt).expect("finite");
            loss += yt * (yt.ln() - lp);
        }
    }
    let grad = Array1::from_iter(
        p.iter()
            .zip(&y.probs)
            .zip(scores.iter())
            .map(|((&pt, &yt), s)| if s.is_finite() { pt - F::from(yt).expect("finite") } else { F::zero() }),
    );
    Ok((loss, grad))
}

/// `-ln p[target]`.
pub fn cross_entropy_loss<F: Real>(target: usize, probs: ArrayView1<F>) -> F {
    -probs[target].ln()
}

/// Cross-entropy from logits together with its gradient `softmax - onehot`.
pub fn softmax_cross_entropy<F: Real>(target: usize, logits: ArrayView1<F>) -> (F, Array1<F>) {
    let log_p = log_softmax(logits);
    let mut grad = softmax(logits);
    grad[target] -= F::one();
    (-log_p[target], grad)
}
