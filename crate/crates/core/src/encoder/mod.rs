//! Small transformer encoder with exact (hand-derived) gradients.
//!
//! Everything is generic over [`Real`] so that training can run in `f32`
//! while gradient checks run in `f64` on the same code path.

mod embed;
mod gradcheck;
pub mod heads;
mod params;
pub mod transformer;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{s, Array2, ArrayView2, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Serialize};

pub use embed::{embed, embed_as, embed_aspzero, embed_backward, embed_pzero, PositionSignal};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use heads::{
    candidate_mask, exophoric_distribution, label_distribution, selection_scores, softmax,
};
pub use params::{LayerParams, Params, INIT_STD};
pub use transformer::{transformer_forward, EncoderCache, Segment};

use crate::vocab::{self, TokenId};
use crate::{Error, Result};

pub const LABELS: usize = 3;
pub const EXO_CATEGORIES: usize = 4;

pub trait Real:
    Float
    + FromPrimitive
    + LinalgScalar
    + ScalarOperand
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

pub(crate) fn cast<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("representable constant")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub dim: usize,
    pub max_len: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff_dim: usize,
}

impl ModelConfig {
    /// Desk-scale defaults: 64-dim, 2 layers, 2 heads, 128 positions.
    pub fn desk(vocab_size: usize) -> Self {
        ModelConfig {
            vocab_size,
            dim: 64,
            max_len: 128,
            layers: 2,
            heads: 2,
            ff_dim: 128,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.heads == 0 || self.dim == 0 || !self.dim.is_multiple_of(self.heads) {
            return bad(format!("dim {} must be a positive multiple of heads {}", self.dim, self.heads));
        }
        if self.max_len < 8 {
            return bad(format!("max_len {} must be at least 8", self.max_len));
        }
        if self.vocab_size < vocab::SPECIALS.len() {
            return bad(format!("vocab_size {} smaller than the special tokens", self.vocab_size));
        }
        if self.ff_dim == 0 {
            return bad("ff_dim must be positive".into());
        }
        Ok(())
    }
}

/// One sequence to encode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderInput {
    pub tokens: Vec<TokenId>,
    pub signal: PositionSignal,
}

impl EncoderInput {
    pub fn plain(tokens: Vec<TokenId>) -> Self {
        EncoderInput {
            tokens,
            signal: PositionSignal::Plain,
        }
    }
}

/// Output of [`encode`]: stacked hidden states plus what backward needs.
#[derive(Debug, Clone)]
pub struct Encoded<F> {
    pub hidden: Array2<F>,
    pub segments: Vec<Segment>,
    cache: EncoderCache<F>,
}

impl<F: Real> Encoded<F> {
    /// Hidden states of sequence `i`, `(len, dim)`.
    pub fn hidden_of(&self, i: usize) -> ArrayView2<'_, F> {
        let seg = self.segments[i];
        self.hidden.slice(s![seg.start..seg.start + seg.len, ..])
    }
}

/// Encodes a batch of sequences in one pass.
pub fn encode<F: Real>(params: &Params<F>, inputs: &[EncoderInput]) -> Result<Encoded<F>> {
    let mut blocks = Vec::with_capacity(inputs.len());
    let mut segments = Vec::with_capacity(inputs.len());
    let mut key_mask = Vec::new();
    let mut start = 0;
    for input in inputs {
        let e = embed(params, &input.tokens, &input.signal)?;
        segments.push(Segment {
            start,
            len: e.nrows(),
        });
        start += e.nrows();
        key_mask.extend(input.tokens.iter().map(|&id| id == vocab::PAD));
        blocks.push(e);
    }
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    let x = if views.is_empty() {
        Array2::zeros((0, params.config.dim))
    } else {
        ndarray::concatenate(ndarray::Axis(0), &views).expect("equal widths")
    };
    let (hidden, cache) = transformer::forward(params, x, &segments, &key_mask)?;
    Ok(Encoded {
        hidden,
        segments,
        cache,
    })
}

/// Back-propagates `d_hidden` (same shape as `encoded.hidden`) into `grads`.
pub fn backprop<F: Real>(
    params: &Params<F>,
    inputs: &[EncoderInput],
    encoded: &Encoded<F>,
    d_hidden: Array2<F>,
    grads: &mut Params<F>,
) {
    let dx = transformer::backward(params, &encoded.cache, d_hidden, grads);
    for (input, seg) in inputs.iter().zip(&encoded.segments) {
        let block = dx.slice(s![seg.start..seg.start + seg.len, ..]);
        embed_backward(grads, &input.tokens, &input.signal, block);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(ModelConfig::desk(100).validate().is_ok());
        let mut c = ModelConfig::desk(100);
        c.heads = 3;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::desk(100);
        c.max_len = 7;
        assert!(c.validate().is_err());
        assert!(ModelConfig::desk(3).validate().is_err());
    }
}
