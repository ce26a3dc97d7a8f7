//! Input embeddings: token + position, plus either a predicate-indicator
//! embedding (AS) or an additional position embedding on the query-chunk
//! predicate copy (AS-PZero).

use ndarray::{Array2, ArrayView2};

use super::{Params, Real};
use crate::vocab::TokenId;
use crate::{Error, Result};

/// What is added on top of token + position embeddings. Positions are
/// 1-based and inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionSignal {
    Plain,
    /// Predicate-indicator embedding: row 1 inside `[start, end]`, row 0
    /// elsewhere.
    Predicate { start: usize, end: usize },
    /// The sequence is `context ++ [MASK] ++ label ++ predicate copy`, where
    /// the context has `context_len` tokens and holds the predicate at
    /// `[start, end]`. The copy at `t = context_len + 3 ..` receives the
    /// position embedding of `t' = t - (context_len + 3) + start`.
    AddPosition { context_len: usize, start: usize, end: usize },
}

impl PositionSignal {
    /// Position whose embedding is added at position `t`, if any.
    pub fn additional_position(&self, t: usize) -> Option<usize> {
        match *self {
            PositionSignal::AddPosition { context_len, start, end } => {
                let shifted = (t + start).checked_sub(context_len + 3)?;
                (start <= shifted && shifted <= end).then_some(shifted)
            }
            _ => None,
        }
    }

    fn validate(&self, len: usize) -> Result<()> {
        match *self {
            PositionSignal::Plain => Ok(()),
            PositionSignal::Predicate { start, end } => {
                if start < 1 || start > end || end > len {
                    return Err(Error::InvalidArgument(format!(
                        "predicate span [{start}, {end}] invalid for length {len}"
                    )));
                }
                Ok(())
            }
            PositionSignal::AddPosition { context_len, start, end } => {
                if start < 1 || start > end || end > context_len {
                    return Err(Error::InvalidArgument(format!(
                        "predicate span [{start}, {end}] invalid for context length {context_len}"
                    )));
                }
                let expected = context_len + 2 + (end - start + 1);
                if len != expected {
                    return Err(Error::InvalidArgument(format!(
                        "query-chunk input has length {len}, expected {expected}"
                    )));
                }
                Ok(())
            }
        }
    }
}

fn check_tokens<F: Real>(params: &Params<F>, tokens: &[TokenId]) -> Result<()> {
    let max_len = params.config.max_len;
    if tokens.len() > max_len {
        return Err(Error::TooLong {
            len: tokens.len(),
            max_len,
        });
    }
    if tokens.is_empty() {
        return Err(Error::InvalidArgument("empty input sequence".into()));
    }
    if let Some(&bad) = tokens.iter().find(|&&id| id as usize >= params.config.vocab_size) {
        return Err(Error::InvalidArgument(format!(
            "token id {bad} outside vocabulary of size {}",
            params.config.vocab_size
        )));
    }
    Ok(())
}

/// `len x dim` embedding matrix; row `t - 1` is the embedding of position `t`.
pub fn embed<F: Real>(params: &Params<F>, tokens: &[TokenId], signal: &PositionSignal) -> Result<Array2<F>> {
    check_tokens(params, tokens)?;
    signal.validate(tokens.len())?;
    let mut out = Array2::zeros((tokens.len(), params.config.dim));
    for (i, (mut row, &id)) in out.rows_mut().into_iter().zip(tokens).enumerate() {
        let t = i + 1;
        row.assign(&params.token_embedding.row(id as usize));
        row += &params.position_embedding.row(i);
        match *signal {
            PositionSignal::Plain => {}
            PositionSignal::Predicate { start, end } => {
                let which = usize::from(start <= t && t <= end);
                row += &params.predicate_embedding.row(which);
            }
            PositionSignal::AddPosition { .. } => {
                if let Some(src) = signal.additional_position(t) {
                    row += &params.position_embedding.row(src - 1);
                }
            }
        }
    }
    Ok(out)
}

/// Token + position embeddings.
pub fn embed_pzero<F: Real>(params: &Params<F>, tokens: &[TokenId]) -> Result<Array2<F>> {
    embed(params, tokens, &PositionSignal::Plain)
}

/// Token + position + predicate-indicator embeddings.
pub fn embed_as<F: Real>(params: &Params<F>, tokens: &[TokenId], start: usize, end: usize) -> Result<Array2<F>> {
    embed(params, tokens, &PositionSignal::Predicate { start, end })
}

/// Token + position + additional position embeddings for a query-chunk input.
pub fn embed_aspzero<F: Real>(
    params: &Params<F>,
    tokens: &[TokenId],
    context_len: usize,
    start: usize,
    end: usize,
) -> Result<Array2<F>> {
    embed(params, tokens, &PositionSignal::AddPosition { context_len, start, end })
}

/// Accumulates embedding gradients from `d` (same shape as the embedding).
pub fn embed_backward<F: Real>(grads: &mut Params<F>, tokens: &[TokenId], signal: &PositionSignal, d: ArrayView2<F>) {
    for (i, (row, &id)) in d.rows().into_iter().zip(tokens).enumerate() {
        let t = i + 1;
        let mut tok = grads.token_embedding.row_mut(id as usize);
        tok += &row;
        let mut pos = grads.position_embedding.row_mut(i);
        pos += &row;
        match *signal {
            PositionSignal::Plain => {}
            PositionSignal::Predicate { start, end } => {
                let which = usize::from(start <= t && t <= end);
                let mut p = grads.predicate_embedding.row_mut(which);
                p += &row;
            }
            PositionSignal::AddPosition { .. } => {
                if let Some(src) = signal.additional_position(t) {
                    let mut p = grads.position_embedding.row_mut(src - 1);
                    p += &row;
                }
            }
        }
    }
}
