//! Synthetic "entity-repetition" data.
//!
//! Each document has a topic entity that appears in every sentence, in a
//! random case role, next to distractor entities drawn without replacement
//! from the same pool. A sentence is a sequence of argument phrases
//! `<entity> <particle>` followed by a predicate phrase `<verb> .`.
//!
//! The ZAR set is built from fresh documents of the same kind whose last
//! sentence drops the topic's argument phrase; the dropped role becomes an
//! `inter` slot whose gold positions are every earlier topic mention.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Document, ParsedSentence, Phrase, Pos, Word};
use crate::vocab::{self, TokenId, Vocabulary};
use crate::zar::{ArgumentSlot, CaseLabel, SlotKind, ZarInstance};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    /// Size of the shared entity pool.
    pub entities: usize,
    pub verbs: usize,
    /// Sentences per document (at least 2).
    pub sentences: usize,
    /// Argument phrases per sentence, at most 3 (one per case role).
    pub arguments: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            entities: 200,
            verbs: 30,
            sentences: 4,
            arguments: 2,
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.sentences < 2 {
            return bad("synthetic documents need at least 2 sentences");
        }
        if !(1..=3).contains(&self.arguments) {
            return bad("synthetic sentences take 1 to 3 arguments");
        }
        if self.verbs == 0 {
            return bad("synthetic vocabulary needs at least one verb");
        }
        if self.entities < 1 + (self.arguments - 1) * self.sentences {
            return bad("entity pool too small for distinct distractors");
        }
        Ok(())
    }
}

const PARTICLES: [&str; 3] = ["ga", "wo", "ni"];

pub fn entity(i: usize) -> String {
    format!("ent{i}")
}

fn verb(i: usize) -> String {
    format!("verb{i}")
}

fn label_of(role: usize) -> CaseLabel {
    CaseLabel::ALL[role]
}

/// One sentence: `(entity, role)` arguments in order, then a verb.
struct Plan {
    args: Vec<(usize, usize)>,
    verb: usize,
}

fn plan_document(cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> (usize, Vec<Plan>) {
    let mut pool: Vec<usize> = (0..cfg.entities).collect();
    pool.shuffle(rng);
    let topic = pool[0];
    let mut distractors = pool[1..].iter().copied();
    let plans = (0..cfg.sentences)
        .map(|_| {
            let mut roles = vec![0, 1, 2];
            roles.shuffle(rng);
            roles.truncate(cfg.arguments);
            roles.sort_unstable();
            let topic_slot = rng.random_range(0..cfg.arguments);
            let args = roles
                .iter()
                .enumerate()
                .map(|(k, &r)| (if k == topic_slot { topic } else { distractors.next().unwrap() }, r))
                .collect();
            Plan {
                args,
                verb: rng.random_range(0..cfg.verbs),
            }
        })
        .collect();
    (topic, plans)
}

fn realize(plan: &Plan) -> ParsedSentence {
    let mut phrases: Vec<Phrase> = plan
        .args
        .iter()
        .map(|&(e, r)| Phrase {
            words: vec![Word::new(entity(e), Pos::Noun), Word::new(PARTICLES[r], Pos::Particle)],
        })
        .collect();
    phrases.push(Phrase {
        words: vec![Word::new(verb(plan.verb), Pos::Verb), Word::new(".", Pos::Symbol)],
    });
    ParsedSentence { phrases }
}

/// Pretraining corpus of `docs` documents.
pub fn entity_corpus(cfg: &SyntheticConfig, docs: usize, seed: u64) -> Result<Vec<Document>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..docs)
        .map(|d| {
            let (_, plans) = plan_document(cfg, &mut rng);
            Document {
                id: format!("syn{d}"),
                sentences: plans.iter().map(realize).collect(),
            }
        })
        .collect())
}

/// A vocabulary holding every surface the generator can emit, in a fixed
/// order independent of sampling.
pub fn vocabulary(cfg: &SyntheticConfig) -> Result<Vocabulary> {
    cfg.validate()?;
    let mut words: Vec<Word> = (0..cfg.entities).map(|e| Word::new(entity(e), Pos::Noun)).collect();
    words.extend((0..cfg.verbs).map(|v| Word::new(verb(v), Pos::Verb)));
    words.extend(PARTICLES.iter().map(|p| Word::new(*p, Pos::Particle)));
    words.push(Word::new(".", Pos::Symbol));
    let doc = Document {
        id: "vocab".into(),
        sentences: vec![ParsedSentence {
            phrases: vec![Phrase { words }],
        }],
    };
    Vocabulary::build(&[doc], 1)
}

/// `count` ZAR instances, one dropped-topic slot each.
pub fn zar_instances(cfg: &SyntheticConfig, vocab: &Vocabulary, count: usize, seed: u64) -> Result<Vec<ZarInstance>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let (topic, mut plans) = plan_document(cfg, &mut rng);
        let last = plans.last_mut().unwrap();
        let k = last.args.iter().position(|&(e, _)| e == topic).unwrap();
        let (_, dropped_role) = last.args.remove(k);

        let mut tokens: Vec<TokenId> = vec![vocab::CLS];
        let mut gold = Vec::new();
        let mut p_start = 0;
        for (si, plan) in plans.iter().enumerate() {
            for word in realize(plan).words() {
                tokens.push(vocab.id(&word.surface));
                if word.surface == entity(topic) {
                    gold.push(tokens.len());
                }
                if si + 1 == plans.len() && word.pos == Pos::Verb {
                    p_start = tokens.len();
                }
            }
            tokens.push(vocab::SEP);
        }
        let mut meta = BTreeMap::new();
        meta.insert("voice".to_string(), "active".to_string());
        meta.insert("distance".to_string(), "1".to_string());
        out.push(ZarInstance {
            token_ids: tokens,
            p_start,
            p_end: p_start,
            slots: vec![ArgumentSlot {
                label: label_of(dropped_role),
                kind: SlotKind::Inter,
                gold_positions: gold,
                exo_category: None,
            }],
            meta,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::extract_noun_phrases;
    use crate::datagen::emit_pzero_instances;

    #[test]
    fn topic_recurs_and_distractors_do_not() {
        let cfg = SyntheticConfig::default();
        let docs = entity_corpus(&cfg, 20, 1).unwrap();
        for d in &docs {
            assert!(!d.sentences.is_empty());
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            for (si, s) in d.sentences.iter().enumerate() {
                for np in extract_noun_phrases(s, si) {
                    *counts.entry(np.surface_key).or_default() += 1;
                }
            }
            let repeated: Vec<_> = counts.values().filter(|&&c| c > 1).collect();
            assert_eq!(repeated, vec![&cfg.sentences]);
        }
    }

    #[test]
    fn every_window_yields_topic_instances() {
        let cfg = SyntheticConfig::default();
        let v = vocabulary(&cfg).unwrap();
        let docs = entity_corpus(&cfg, 5, 2).unwrap();
        for d in &docs {
            let inst = emit_pzero_instances(d, 4, 64, &v).unwrap();
            // The first sentence has no earlier mention to point at.
            assert_eq!(inst.len(), cfg.sentences - 1);
            for (k, i) in inst.iter().enumerate() {
                assert_eq!(i.answer_positions.len(), k + 1);
            }
        }
    }

    #[test]
    fn zar_instances_are_valid() {
        let cfg = SyntheticConfig::default();
        let v = vocabulary(&cfg).unwrap();
        let set = zar_instances(&cfg, &v, 50, 3).unwrap();
        for inst in &set {
            inst.validate().unwrap();
            let slot = &inst.slots[0];
            assert_eq!(slot.gold_positions.len(), cfg.sentences - 1);
            let topic = inst.token_ids[slot.gold_positions[0] - 1];
            assert!(slot.gold_positions.iter().all(|&p| inst.token_ids[p - 1] == topic));
            assert!(!inst.token_ids[inst.p_start..].contains(&topic));
            assert_eq!(inst.sentence_of(inst.p_start), cfg.sentences - 1);
        }
        assert_eq!(set, zar_instances(&cfg, &v, 50, 3).unwrap());
    }

    #[test]
    fn vocabulary_covers_the_generator() {
        let cfg = SyntheticConfig::default();
        let v = vocabulary(&cfg).unwrap();
        assert_eq!(v.len(), vocab::SPECIALS.len() + cfg.entities + cfg.verbs + 4);
        for d in entity_corpus(&cfg, 10, 4).unwrap() {
            for s in &d.sentences {
                assert!(s.words().all(|w| v.get(&w.surface).is_some()));
            }
        }
    }

    #[test]
    fn bad_configs_are_rejected() {
        let c = SyntheticConfig {
            sentences: 1,
            ..Default::default()
        };
        assert!(entity_corpus(&c, 1, 0).is_err());
        let c = SyntheticConfig {
            entities: 3,
            ..Default::default()
        };
        assert!(entity_corpus(&c, 1, 0).is_err());
    }
}
