//! PZero and Cloze instance generation.
//!
//! A window is up to `n` consecutive sentences ending at a target sentence,
//! each followed by `[SEP]`, pruned from the front so that the sequence fits
//! in `max_len` once `[CLS]` is prepended. For every noun phrase of the
//! target sentence that has same-surface partners elsewhere in the window,
//! the phrase is replaced by a single `[MASK]` and the last tokens of the
//! partners become the answers.
//!
//! All positions here are 1-based sequence positions, with position 1 being
//! `[CLS]`. Sentence indices are 0-based.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{extract_noun_phrases, Document, NpSpan};
use crate::vocab::{self, TokenId, Vocabulary};
use crate::{Error, Result};

/// Default number of consecutive sentences per window.
pub const DEFAULT_WINDOW_SENTENCES: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub token_ids: Vec<TokenId>,
    /// `(sentence_index, sep_position)` for every sentence whose `[SEP]`
    /// survived pruning, in order.
    pub sentence_boundaries: Vec<(usize, usize)>,
    /// Position of every surviving `(sentence_index, word_index)`.
    pub word_positions: HashMap<(usize, usize), usize>,
    pub first_sentence: usize,
    pub pruned: usize,
}

impl Window {
    pub fn position(&self, sentence: usize, word: usize) -> Option<usize> {
        self.word_positions.get(&(sentence, word)).copied()
    }
}

/// Builds the window ending at `last_sentence` (0-based). Returns `None` when
/// pruning removes every word of the last sentence.
pub fn build_window(
    doc: &Document,
    last_sentence: usize,
    n: usize,
    max_len: usize,
    vocab: &Vocabulary,
) -> Result<Option<Window>> {
    if last_sentence >= doc.sentences.len() {
        return Err(Error::InvalidArgument(format!(
            "sentence index {last_sentence} out of range for document `{}` with {} sentences",
            doc.id,
            doc.sentences.len()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("window size n must be at least 1".into()));
    }
    if max_len < 2 {
        return Err(Error::InvalidArgument("max_len must be at least 2".into()));
    }
    let first = (last_sentence + 1).saturating_sub(n);

    // (sentence, word) per content token; None marks a [SEP].
    let mut content: Vec<(TokenId, Option<(usize, usize)>, usize)> = Vec::new();
    for si in first..=last_sentence {
        for (wi, w) in doc.sentences[si].words().enumerate() {
            content.push((vocab.id(&w.surface), Some((si, wi)), si));
        }
        content.push((vocab::SEP, None, si));
    }

    let budget = max_len - 1;
    let pruned = content.len().saturating_sub(budget);
    let kept = &content[pruned..];
    if !kept.iter().any(|(_, w, _)| matches!(w, Some((s, _)) if *s == last_sentence)) {
        return Ok(None);
    }

    let mut token_ids = Vec::with_capacity(kept.len() + 1);
    token_ids.push(vocab::CLS);
    let mut word_positions = HashMap::new();
    let mut sentence_boundaries = Vec::new();
    for (id, word, si) in kept {
        token_ids.push(*id);
        let pos = token_ids.len();
        match word {
            Some(key) => {
                word_positions.insert(*key, pos);
            }
            None => sentence_boundaries.push((*si, pos)),
        }
    }
    Ok(Some(Window {
        token_ids,
        sentence_boundaries,
        word_positions,
        first_sentence: first,
        pruned,
    }))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PzeroInstance {
    #[serde(rename = "doc")]
    pub doc_id: String,
    #[serde(rename = "t")]
    pub token_ids: Vec<TokenId>,
    #[serde(rename = "m")]
    pub mask_index: usize,
    #[serde(rename = "a")]
    pub answer_positions: Vec<usize>,
}

impl PzeroInstance {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.token_ids.len();
        let bad = |m: String| Err(Error::InvalidInstance(format!("doc `{}`: {m}", self.doc_id)));
        if self.token_ids.first() != Some(&vocab::CLS) {
            return bad("position 1 must be [CLS]".into());
        }
        if self.mask_index < 1 || self.mask_index > t || self.token_ids[self.mask_index - 1] != vocab::MASK {
            return bad(format!("mask index {} does not hold [MASK]", self.mask_index));
        }
        if self.token_ids.iter().filter(|&&id| id == vocab::MASK).count() != 1 {
            return bad("expected exactly one [MASK]".into());
        }
        if self.answer_positions.is_empty() {
            return bad("no answer positions".into());
        }
        for &p in &self.answer_positions {
            if p <= 1 || p > t || p == self.mask_index {
                return bad(format!("answer position {p} out of range"));
            }
        }
        Ok(())
    }
}

/// Masks one noun phrase of the window's last sentence per instance.
pub fn emit_pzero_instances(
    doc: &Document,
    n: usize,
    max_len: usize,
    vocab: &Vocabulary,
) -> Result<Vec<PzeroInstance>> {
    let mut out = Vec::new();
    for last in 0..doc.sentences.len() {
        let Some(window) = build_window(doc, last, n, max_len, vocab)? else {
            continue;
        };
        let spans: Vec<NpSpan> = (window.first_sentence..=last)
            .flat_map(|si| extract_noun_phrases(&doc.sentences[si], si))
            .collect();

        for (ti, target) in spans.iter().enumerate().filter(|(_, s)| s.sentence_index == last) {
            let positions: Option<Vec<usize>> = (target.word_start..=target.word_end)
                .map(|w| window.position(last, w))
                .collect();
            let Some(positions) = positions else {
                continue;
            };
            let (start, end) = (positions[0], *positions.last().unwrap());

            let answers: BTreeSet<usize> = spans
                .iter()
                .enumerate()
                .filter(|(i, s)| *i != ti && s.surface_key == target.surface_key)
                .filter_map(|(_, s)| window.position(s.sentence_index, s.word_end))
                .map(|p| if p > end { p - (end - start) } else { p })
                .collect();
            if answers.is_empty() {
                continue;
            }

            let mut token_ids = Vec::with_capacity(window.token_ids.len());
            token_ids.extend_from_slice(&window.token_ids[..start - 1]);
            token_ids.push(vocab::MASK);
            token_ids.extend_from_slice(&window.token_ids[end..]);
            out.push(PzeroInstance {
                doc_id: doc.id.clone(),
                token_ids,
                mask_index: start,
                answer_positions: answers.into_iter().collect(),
            });
        }
    }
    Ok(out)
}

/// Target distribution over sequence positions; `probs[p - 1]` is the mass
/// at position `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldDistribution {
    pub probs: Vec<f64>,
}

impl GoldDistribution {
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, _)| i + 1)
    }
}

/// Uniform mass over the answer positions.
pub fn gold_distribution(answer_positions: &[usize], len: usize) -> Result<GoldDistribution> {
    let answers: BTreeSet<usize> = answer_positions.iter().copied().collect();
    if answers.is_empty() {
        return Err(Error::InvalidArgument("gold distribution needs at least one answer".into()));
    }
    if let Some(&p) = answers.iter().find(|&&p| p == 0 || p > len) {
        return Err(Error::InvalidArgument(format!("answer position {p} outside 1..={len}")));
    }
    let mass = 1.0 / answers.len() as f64;
    let mut probs = vec![0.0; len];
    for p in answers {
        probs[p - 1] = mass;
    }
    Ok(GoldDistribution { probs })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClozeInstance {
    #[serde(rename = "doc")]
    pub doc_id: String,
    #[serde(rename = "t")]
    pub token_ids: Vec<TokenId>,
    #[serde(rename = "mp")]
    pub masked_positions: Vec<usize>,
    #[serde(rename = "orig")]
    pub original_ids: BTreeMap<usize, TokenId>,
}

impl ClozeInstance {
    /// The sequence before masking.
    pub fn original_tokens(&self) -> Vec<TokenId> {
        let mut t = self.token_ids.clone();
        for (&p, &id) in &self.original_ids {
            t[p - 1] = id;
        }
        t
    }
}

/// Masks each ordinary (non-special) position independently with
/// probability `mask_rate`. If nothing was drawn, one maskable position is
/// chosen uniformly so that every instance has a target.
pub fn cloze_mask(token_ids: &[TokenId], mask_rate: f64, seed: u64) -> Result<ClozeInstance> {
    if !(mask_rate > 0.0 && mask_rate < 1.0) {
        return Err(Error::InvalidArgument(format!("mask_rate {mask_rate} outside (0, 1)")));
    }
    let maskable: Vec<usize> = token_ids
        .iter()
        .enumerate()
        .filter(|(_, &id)| !vocab::is_special(id))
        .map(|(i, _)| i + 1)
        .collect();
    if maskable.is_empty() {
        return Err(Error::InvalidArgument("sequence has no maskable position".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut masked: Vec<usize> = maskable
        .iter()
        .copied()
        .filter(|_| rng.random::<f64>() < mask_rate)
        .collect();
    if masked.is_empty() {
        masked.push(maskable[rng.random_range(0..maskable.len())]);
    }
    let mut t = token_ids.to_vec();
    let mut original_ids = BTreeMap::new();
    for &p in &masked {
        original_ids.insert(p, t[p - 1]);
        t[p - 1] = vocab::MASK;
    }
    Ok(ClozeInstance {
        doc_id: String::new(),
        token_ids: t,
        masked_positions: masked,
        original_ids,
    })
}

/// One Cloze instance per usable window, with per-instance seeds drawn from
/// a single stream seeded by `seed`.
pub fn emit_cloze_instances(
    docs: &[Document],
    n: usize,
    max_len: usize,
    vocab: &Vocabulary,
    mask_rate: f64,
    seed: u64,
) -> Result<Vec<ClozeInstance>> {
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for doc in docs {
        for last in 0..doc.sentences.len() {
            let Some(window) = build_window(doc, last, n, max_len, vocab)? else {
                continue;
            };
            if !window.token_ids.iter().any(|&id| !vocab::is_special(id)) {
                continue;
            }
            let mut inst = cloze_mask(&window.token_ids, mask_rate, seeds.random())?;
            inst.doc_id = doc.id.clone();
            out.push(inst);
        }
    }
    Ok(out)
}

/// Summary written next to generated instance files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub documents: usize,
    pub sentences: usize,
    pub instances: usize,
    pub mean_answers: f64,
    pub mean_length: f64,
}

impl GenerationStats {
    pub fn from_instances(docs: &[Document], instances: &[PzeroInstance]) -> Self {
        let n = instances.len().max(1) as f64;
        GenerationStats {
            documents: docs.len(),
            sentences: docs.iter().map(|d| d.sentences.len()).sum(),
            instances: instances.len(),
            mean_answers: instances.iter().map(|i| i.answer_positions.len()).sum::<usize>() as f64 / n,
            mean_length: instances.iter().map(|i| i.token_ids.len()).sum::<usize>() as f64 / n,
        }
    }
}
