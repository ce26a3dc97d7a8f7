//! Random input generators and literal reference implementations shared by
//! the integration tests.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unicode_normalization::UnicodeNormalization;

use pzero_core::corpus::{Document, ParsedSentence, Phrase, Pos, Word};
use pzero_core::vocab::{self, TokenId, Vocabulary};
use pzero_core::zar::{ArgumentSlot, CaseLabel, ExoCategory, SlotKind, ZarInstance};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small per-tag pools so that surfaces repeat often. "é" appears both
/// precomposed and decomposed.
fn surface_for(pos: Pos, rng: &mut ChaCha8Rng) -> String {
    let pool: &[&str] = match pos {
        Pos::Noun => &["cat", "dog", "tree", "\u{e9}t\u{e9}", "e\u{301}te\u{301}", "学校", "Cat"],
        Pos::Verb => &["run", "see", "食べる"],
        Pos::Symbol => &["\u{201c}", "\u{201d}", ",", "."],
        Pos::Particle => &["ga", "wo", "ni", "no"],
        Pos::Alphanum => &["A1", "42"],
        Pos::Other => &["very", "the"],
    };
    pool[rng.random_range(0..pool.len())].to_string()
}

fn random_pos(rng: &mut ChaCha8Rng) -> Pos {
    // Nouns and particles dominate so that many phrases qualify.
    let weights = [(Pos::Noun, 5), (Pos::Verb, 1), (Pos::Symbol, 2), (Pos::Particle, 3), (Pos::Alphanum, 1), (Pos::Other, 1)];
    let total: u32 = weights.iter().map(|w| w.1).sum();
    let mut x = rng.random_range(0..total);
    for (p, w) in weights {
        if x < w {
            return p;
        }
        x -= w;
    }
    unreachable!()
}

pub fn random_phrase(rng: &mut ChaCha8Rng, max_words: usize) -> Phrase {
    let n = rng.random_range(1..=max_words);
    Phrase {
        words: (0..n)
            .map(|_| {
                let p = random_pos(rng);
                Word::new(surface_for(p, rng), p)
            })
            .collect(),
    }
}

/// A document of 1 to `max_sentences` sentences and at most `max_words`
/// words overall.
pub fn random_document(rng: &mut ChaCha8Rng, id: &str, max_sentences: usize, max_words: usize) -> Document {
    let sentences = rng.random_range(1..=max_sentences);
    let per = (max_words / sentences).max(1);
    let mut out = Vec::new();
    for _ in 0..sentences {
        let budget = rng.random_range(1..=per);
        let mut phrases = Vec::new();
        let mut used = 0;
        while used < budget {
            let p = random_phrase(rng, (budget - used).min(4));
            used += p.words.len();
            phrases.push(p);
        }
        out.push(ParsedSentence { phrases });
    }
    Document {
        id: id.to_string(),
        sentences: out,
    }
}

/// The noun-phrase rule applied step by step: require a noun, reject verbs,
/// drop trailing words until a noun ends the phrase, drop leading symbols.
/// Returns inclusive word indices within the phrase.
pub fn reference_np(words: &[Word]) -> Option<(usize, usize)> {
    if !words.iter().any(|w| w.pos == Pos::Noun) {
        return None;
    }
    if words.iter().any(|w| w.pos == Pos::Verb) {
        return None;
    }
    let mut kept: Vec<(usize, Pos)> = words.iter().enumerate().map(|(i, w)| (i, w.pos)).collect();
    while kept.last().is_some_and(|&(_, p)| p != Pos::Noun) {
        kept.pop();
    }
    while kept.first().is_some_and(|&(_, p)| p == Pos::Symbol) {
        kept.remove(0);
    }
    Some((kept.first()?.0, kept.last()?.0))
}

/// `(sentence, first word, last word, key)` for every noun phrase of a
/// sentence, word indices counted across the whole sentence.
pub fn reference_sentence_nps(sentence: &ParsedSentence, si: usize) -> Vec<(usize, usize, usize, String)> {
    let mut out = Vec::new();
    let mut offset = 0;
    for ph in &sentence.phrases {
        if let Some((a, b)) = reference_np(&ph.words) {
            let key: String = ph.words[a..=b].iter().map(|w| w.surface.nfc().collect::<String>()).collect();
            out.push((si, offset + a, offset + b, key));
        }
        offset += ph.words.len();
    }
    out
}

/// One generated instance as `(doc, tokens, mask position, answers)`.
pub type RefInstance = (String, Vec<TokenId>, usize, Vec<usize>);

/// Enumerates every (masked NP, partner NP) pair per window and builds each
/// masked sequence by editing a flat token list.
pub fn reference_pzero(doc: &Document, n: usize, max_len: usize, vocab: &Vocabulary) -> BTreeSet<RefInstance> {
    let mut out = BTreeSet::new();
    for s in 0..doc.sentences.len() {
        let first = (s + 1).saturating_sub(n);
        let mut cells: Vec<(TokenId, Option<(usize, usize)>)> = Vec::new();
        for si in first..=s {
            let words: Vec<&Word> = doc.sentences[si].words().collect();
            for (wi, w) in words.iter().enumerate() {
                cells.push((vocab.id(&w.surface), Some((si, wi))));
            }
            cells.push((vocab::SEP, None));
        }
        while cells.len() + 1 > max_len {
            cells.remove(0);
        }
        cells.insert(0, (vocab::CLS, None));
        if !cells.iter().any(|c| matches!(c.1, Some((si, _)) if si == s)) {
            continue;
        }
        let nps: Vec<_> = (first..=s).flat_map(|si| reference_sentence_nps(&doc.sentences[si], si)).collect();
        for (ti, target) in nps.iter().enumerate() {
            if target.0 != s {
                continue;
            }
            let covered = (target.1..=target.2).all(|w| cells.iter().any(|c| c.1 == Some((s, w))));
            if !covered {
                continue;
            }
            let mut masked: Vec<(TokenId, Option<(usize, usize)>)> = Vec::new();
            for c in &cells {
                match c.1 {
                    Some((si, w)) if si == s && w == target.1 => masked.push((vocab::MASK, None)),
                    Some((si, w)) if si == s && w > target.1 && w <= target.2 => {}
                    _ => masked.push(*c),
                }
            }
            let mask_pos = masked.iter().position(|c| c.0 == vocab::MASK && c.1.is_none()).unwrap() + 1;
            let mut answers = BTreeSet::new();
            for (oi, other) in nps.iter().enumerate() {
                if oi == ti || other.3 != target.3 {
                    continue;
                }
                if let Some(i) = masked.iter().position(|c| c.1 == Some((other.0, other.2))) {
                    answers.insert(i + 1);
                }
            }
            if !answers.is_empty() {
                out.insert((
                    doc.id.clone(),
                    masked.iter().map(|c| c.0).collect(),
                    mask_pos,
                    answers.into_iter().collect(),
                ));
            }
        }
    }
    out
}

/// A valid ZAR instance of exactly `len` tokens over ids `8..vocab_size`:
/// `[CLS]`, sentences closed by `[SEP]`, a predicate in the last sentence
/// and one slot per label of a random kind.
pub fn random_zar_instance(rng: &mut ChaCha8Rng, len: usize, vocab_size: u32) -> ZarInstance {
    assert!(len >= 6);
    let mut tokens = vec![vocab::CLS];
    let mut last_sep = 1;
    while tokens.len() < len - 1 {
        if tokens.len() - last_sep >= 2 && tokens.len() < len - 4 && rng.random_bool(0.2) {
            tokens.push(vocab::SEP);
            last_sep = tokens.len();
        } else {
            tokens.push(rng.random_range(8..vocab_size));
        }
    }
    tokens.push(vocab::SEP);
    let content: Vec<usize> = (2..=len).filter(|&p| !vocab::is_special(tokens[p - 1])).collect();
    let last_sentence: Vec<usize> = content.iter().copied().filter(|&p| p > last_sep).collect();
    let p_start = last_sentence[rng.random_range(0..last_sentence.len())];
    let p_end = (p_start + rng.random_range(0..2)).min(len - 1);
    let labels: Vec<CaseLabel> = CaseLabel::ALL.into_iter().filter(|_| rng.random_bool(0.8)).collect();
    let slots = labels
        .into_iter()
        .map(|label| {
            let kind = [SlotKind::Dep, SlotKind::Intra, SlotKind::Inter, SlotKind::Exophoric, SlotKind::None][rng.random_range(0..5)];
            let (gold_positions, exo_category) = match kind {
                SlotKind::Exophoric => (vec![], Some([ExoCategory::Author, ExoCategory::Reader, ExoCategory::General][rng.random_range(0..3)])),
                SlotKind::None => (vec![], None),
                _ => {
                    let k = rng.random_range(1..=2);
                    let mut g: Vec<usize> = (0..k).map(|_| content[rng.random_range(0..content.len())]).collect();
                    g.sort_unstable();
                    g.dedup();
                    (g, None)
                }
            };
            ArgumentSlot {
                label,
                kind,
                gold_positions,
                exo_category,
            }
        })
        .collect();
    let inst = ZarInstance {
        token_ids: tokens,
        p_start,
        p_end,
        slots,
        meta: Default::default(),
    };
    inst.validate().expect("generator yields valid instances");
    inst
}
