//! Zero anaphora resolution instances, model inputs and decoding.
//!
//! Positions are 1-based; position 1 always holds `[CLS]`, which doubles as
//! the dummy token meaning "no argument in the input". Selecting it hands
//! the decision to the four-way exophoric classifier.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::datagen::{gold_distribution, GoldDistribution};
use crate::encoder::{heads::argmax_category, PositionSignal, Real};
use crate::vocab::{self, TokenId};
use crate::{jsonl, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CaseLabel {
    Nom,
    Acc,
    Dat,
}

impl CaseLabel {
    pub const ALL: [CaseLabel; 3] = [CaseLabel::Nom, CaseLabel::Acc, CaseLabel::Dat];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn token(self) -> TokenId {
        match self {
            CaseLabel::Nom => vocab::NOM,
            CaseLabel::Acc => vocab::ACC,
            CaseLabel::Dat => vocab::DAT,
        }
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseLabel::Nom => "NOM",
            CaseLabel::Acc => "ACC",
            CaseLabel::Dat => "DAT",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotKind {
    Dep,
    Intra,
    Inter,
    Exophoric,
    None,
}

impl SlotKind {
    pub fn in_context(self) -> bool {
        matches!(self, SlotKind::Dep | SlotKind::Intra | SlotKind::Inter)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExoCategory {
    Author,
    Reader,
    General,
    None,
}

impl ExoCategory {
    pub const ALL: [ExoCategory; 4] = [
        ExoCategory::Author,
        ExoCategory::Reader,
        ExoCategory::General,
        ExoCategory::None,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentSlot {
    #[serde(rename = "l")]
    pub label: CaseLabel,
    #[serde(rename = "k")]
    pub kind: SlotKind,
    #[serde(rename = "g", default)]
    pub gold_positions: Vec<usize>,
    #[serde(rename = "x", default, skip_serializing_if = "Option::is_none")]
    pub exo_category: Option<ExoCategory>,
}

impl ArgumentSlot {
    /// Category the exophoric head is trained towards when the dummy token
    /// is gold.
    pub fn dummy_category(&self) -> Option<ExoCategory> {
        match self.kind {
            SlotKind::Exophoric => self.exo_category,
            SlotKind::None => Some(ExoCategory::None),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZarInstance {
    #[serde(rename = "t")]
    pub token_ids: Vec<TokenId>,
    #[serde(rename = "ps")]
    pub p_start: usize,
    #[serde(rename = "pe")]
    pub p_end: usize,
    pub slots: Vec<ArgumentSlot>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl ZarInstance {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn slot(&self, label: CaseLabel) -> Option<&ArgumentSlot> {
        self.slots.iter().find(|s| s.label == label)
    }

    /// Metadata lookup preferring a label-specific key (`key:NOM`).
    pub fn meta_for(&self, key: &str, label: CaseLabel) -> Option<&str> {
        self.meta
            .get(&format!("{key}:{label}"))
            .or_else(|| self.meta.get(key))
            .map(String::as_str)
    }

    /// Checks structural invariants. In-context slots need gold positions,
    /// except `inter` slots, where an empty list means the antecedent lies
    /// outside the input.
    pub fn validate(&self) -> Result<()> {
        let t = self.token_ids.len();
        let bad = |m: String| Err(Error::InvalidInstance(m));
        if self.token_ids.first() != Some(&vocab::CLS) {
            return bad("position 1 must be [CLS]".into());
        }
        if self.p_start < 1 || self.p_start > self.p_end || self.p_end > t {
            return bad(format!("predicate span [{}, {}] invalid for length {t}", self.p_start, self.p_end));
        }
        let mut seen = [false; 3];
        for slot in &self.slots {
            if std::mem::replace(&mut seen[slot.label.index()], true) {
                return bad(format!("duplicate slot for {}", slot.label));
            }
            match slot.kind {
                SlotKind::Dep | SlotKind::Intra if slot.gold_positions.is_empty() => {
                    return bad(format!("{} slot without gold positions", slot.label));
                }
                SlotKind::Exophoric => {
                    if !matches!(
                        slot.exo_category,
                        Some(ExoCategory::Author | ExoCategory::Reader | ExoCategory::General)
                    ) {
                        return bad(format!("exophoric {} slot needs author/reader/general", slot.label));
                    }
                }
                _ => {}
            }
            if !slot.kind.in_context() && !slot.gold_positions.is_empty() {
                return bad(format!("{} slot of kind {:?} cannot have gold positions", slot.label, slot.kind));
            }
            if slot.kind.in_context() && slot.exo_category.is_some() {
                return bad(format!("in-context {} slot cannot carry an exophoric category", slot.label));
            }
            for &p in &slot.gold_positions {
                if p <= 1 || p > t {
                    return bad(format!("gold position {p} outside (1, {t}]"));
                }
                if vocab::is_unselectable(self.token_ids[p - 1]) {
                    return bad(format!("gold position {p} is a special token"));
                }
            }
        }
        Ok(())
    }

    /// 0-based index of the `[SEP]`-delimited sentence holding `pos`.
    pub fn sentence_of(&self, pos: usize) -> usize {
        self.token_ids[..pos.saturating_sub(1)]
            .iter()
            .filter(|&&id| id == vocab::SEP)
            .count()
    }
}

pub fn load_instances(path: &Path) -> Result<Vec<ZarInstance>> {
    let instances: Vec<ZarInstance> = jsonl::read(path)?;
    for (i, inst) in instances.iter().enumerate() {
        inst.validate().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
    }
    Ok(instances)
}

/// AS input: the instance itself, validated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsInput {
    pub tokens: Vec<TokenId>,
    pub p_start: usize,
    pub p_end: usize,
}

impl AsInput {
    pub fn signal(&self) -> PositionSignal {
        PositionSignal::Predicate {
            start: self.p_start,
            end: self.p_end,
        }
    }
}

pub fn build_as_input(instance: &ZarInstance, max_len: usize) -> Result<AsInput> {
    instance.validate()?;
    if instance.len() > max_len {
        return Err(Error::TooLong {
            len: instance.len(),
            max_len,
        });
    }
    Ok(AsInput {
        tokens: instance.token_ids.clone(),
        p_start: instance.p_start,
        p_end: instance.p_end,
    })
}

/// AS-PZero input `context ++ [MASK] ++ label ++ predicate copy`, with the
/// context trimmed from the front (after `[CLS]`) when too long.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryInput {
    pub tokens: Vec<TokenId>,
    pub mask_index: usize,
    /// Context length after trimming, `[CLS]` included.
    pub context_len: usize,
    pub p_start: usize,
    pub p_end: usize,
    /// Number of original tokens removed after `[CLS]`.
    pub trimmed: usize,
}

impl QueryInput {
    pub fn signal(&self) -> PositionSignal {
        PositionSignal::AddPosition {
            context_len: self.context_len,
            start: self.p_start,
            end: self.p_end,
        }
    }

    /// Maps an original position into this input, if it survived trimming.
    pub fn from_original(&self, pos: usize) -> Option<usize> {
        match pos {
            1 => Some(1),
            p if p >= self.trimmed + 2 => Some(p - self.trimmed),
            _ => None,
        }
    }

    /// Maps a context position of this input back to the original instance.
    pub fn to_original(&self, pos: usize) -> usize {
        if pos == 1 {
            1
        } else {
            pos + self.trimmed
        }
    }

    /// Re-indexes a slot's gold positions, dropping trimmed ones.
    pub fn reindex_slot(&self, slot: &ArgumentSlot) -> ArgumentSlot {
        ArgumentSlot {
            gold_positions: slot.gold_positions.iter().filter_map(|&p| self.from_original(p)).collect(),
            ..slot.clone()
        }
    }
}

pub fn build_aspzero_input(instance: &ZarInstance, label: CaseLabel, max_len: usize) -> Result<QueryInput> {
    instance.validate()?;
    let t = instance.len();
    let pred_len = instance.p_end - instance.p_start + 1;
    let full = t + 2 + pred_len;
    let trimmed = full.saturating_sub(max_len);
    if instance.p_start < trimmed + 2 {
        return Err(Error::InvalidInstance(format!(
            "predicate at [{}, {}] trimmed away (input length {full} > {max_len})",
            instance.p_start, instance.p_end
        )));
    }
    let mut tokens = Vec::with_capacity(full - trimmed);
    tokens.push(vocab::CLS);
    tokens.extend_from_slice(&instance.token_ids[1 + trimmed..]);
    let context_len = tokens.len();
    tokens.push(vocab::MASK);
    tokens.push(label.token());
    tokens.extend_from_slice(&instance.token_ids[instance.p_start - 1..instance.p_end]);
    Ok(QueryInput {
        tokens,
        mask_index: context_len + 1,
        context_len,
        p_start: instance.p_start - trimmed,
        p_end: instance.p_end - trimmed,
        trimmed,
    })
}

/// Training targets for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ZarGold {
    pub selection: GoldDistribution,
    /// Set when the dummy token is gold.
    pub exophoric: Option<ExoCategory>,
}

/// In-context slots spread mass uniformly over their gold positions;
/// exophoric and `none` slots put all mass on the dummy and add a one-hot
/// exophoric target. Fails for an in-context slot whose gold is not in the
/// input.
pub fn gold_distribution_zar(slot: &ArgumentSlot, len: usize) -> Result<ZarGold> {
    if slot.kind.in_context() {
        if slot.gold_positions.is_empty() {
            return Err(Error::InvalidInstance(format!("{} slot has no gold position in the input", slot.label)));
        }
        Ok(ZarGold {
            selection: gold_distribution(&slot.gold_positions, len)?,
            exophoric: None,
        })
    } else {
        Ok(ZarGold {
            selection: gold_distribution(&[1], len)?,
            exophoric: slot.dummy_category(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Choice {
    Position(usize),
    Category(ExoCategory),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: CaseLabel,
    pub choice: Choice,
    pub score: f64,
}

/// Argmax over candidate positions (ties go to the lowest position, `-inf`
/// is never chosen). Choosing the dummy defers to the exophoric argmax.
pub fn decode_prediction<F: Real>(label: CaseLabel, values: ArrayView1<F>, exophoric: ArrayView1<F>) -> Prediction {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v == F::neg_infinity() || v.is_nan() {
            continue;
        }
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    let best = best.unwrap_or(0);
    let score = values[best].to_f64().unwrap_or(f64::NAN);
    let choice = if best == 0 {
        Choice::Category(argmax_category(exophoric))
    } else {
        Choice::Position(best + 1)
    };
    Prediction { label, choice, score }
}

/// One line of a prediction file. Positions refer to the original instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    #[serde(rename = "i")]
    pub instance: usize,
    #[serde(rename = "l")]
    pub label: CaseLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cat: Option<ExoCategory>,
}

impl PredictionRecord {
    pub fn new(instance: usize, p: &Prediction) -> Self {
        let (pos, cat) = match p.choice {
            Choice::Position(x) => (Some(x), None),
            Choice::Category(c) => (None, Some(c)),
        };
        PredictionRecord {
            instance,
            label: p.label,
            pos,
            cat,
        }
    }

    pub fn choice(&self) -> Result<Choice> {
        match (self.pos, self.cat) {
            (Some(p), None) => Ok(Choice::Position(p)),
            (None, Some(c)) => Ok(Choice::Category(c)),
            _ => Err(Error::InvalidInstance(format!(
                "prediction for instance {} must set exactly one of pos/cat",
                self.instance
            ))),
        }
    }
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let preds: Vec<PredictionRecord> = jsonl::read(path)?;
    for (i, p) in preds.iter().enumerate() {
        p.choice().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
    }
    Ok(preds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn inst(len: usize, ps: usize, pe: usize) -> ZarInstance {
        let mut t = vec![vocab::CLS];
        t.extend((2..=len).map(|i| 10 + i as TokenId));
        ZarInstance {
            token_ids: t,
            p_start: ps,
            p_end: pe,
            slots: vec![ArgumentSlot {
                label: CaseLabel::Nom,
                kind: SlotKind::Inter,
                gold_positions: vec![3, 5],
                exo_category: None,
            }],
            meta: BTreeMap::new(),
        }
    }

    #[test]
    fn as_input_passes_through() {
        let i = inst(10, 7, 8);
        let a = build_as_input(&i, 128).unwrap();
        assert_eq!(a.tokens, i.token_ids);
        assert_eq!((a.p_start, a.p_end), (7, 8));
    }

    #[test]
    fn as_input_rejects_bad_spans_and_missing_cls() {
        let mut i = inst(10, 7, 11);
        assert!(build_as_input(&i, 128).is_err());
        i.p_end = 8;
        i.token_ids[0] = 20;
        assert!(build_as_input(&i, 128).is_err());
    }

    #[test]
    fn query_chunk_layout() {
        let i = inst(10, 7, 8);
        let q = build_aspzero_input(&i, CaseLabel::Acc, 128).unwrap();
        assert_eq!(q.tokens.len(), 14);
        assert_eq!(q.mask_index, 11);
        assert_eq!(q.tokens[10], vocab::MASK);
        assert_eq!(q.tokens[11], vocab::ACC);
        assert_eq!(&q.tokens[12..14], &i.token_ids[6..8]);
        assert_eq!(q.trimmed, 0);
    }

    #[test]
    fn overlong_query_input_is_trimmed_after_cls() {
        let i = inst(10, 7, 8);
        let q = build_aspzero_input(&i, CaseLabel::Nom, 11).unwrap();
        assert_eq!(q.tokens.len(), 11);
        assert_eq!(q.tokens[0], vocab::CLS);
        assert_eq!(q.trimmed, 3);
        assert_eq!((q.p_start, q.p_end), (4, 5));
        assert_eq!(q.tokens[q.p_start - 1], i.token_ids[6]);
        let slot = q.reindex_slot(&i.slots[0]);
        // position 3 trimmed away, 5 -> 2
        assert_eq!(slot.gold_positions, vec![2]);
        assert_eq!(q.tokens[1], i.token_ids[4]);
        assert_eq!(q.to_original(2), 5);
    }

    #[test]
    fn trimming_the_predicate_is_an_error() {
        let i = inst(10, 3, 4);
        assert!(build_aspzero_input(&i, CaseLabel::Nom, 10).is_err());
    }

    #[test]
    fn decode_rules() {
        let exo = array![0.1f64, 0.2, 0.3, 0.4];
        let p = decode_prediction(CaseLabel::Nom, array![0.0, 1.0, 0.5, 0.2, 0.1, 3.0, 2.0].view(), exo.view());
        assert_eq!(p.choice, Choice::Position(6));
        let p = decode_prediction(CaseLabel::Nom, array![5.0, 1.0, f64::NEG_INFINITY].view(), exo.view());
        assert_eq!(p.choice, Choice::Category(ExoCategory::None));
        let p = decode_prediction(
            CaseLabel::Dat,
            array![0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 2.0].view(),
            exo.view(),
        );
        assert_eq!(p.choice, Choice::Position(4));
        let p = decode_prediction(CaseLabel::Nom, array![f64::NEG_INFINITY, f64::NEG_INFINITY, 1.0].view(), exo.view());
        assert_eq!(p.choice, Choice::Position(3));
    }

    #[test]
    fn gold_targets() {
        let s = ArgumentSlot {
            label: CaseLabel::Nom,
            kind: SlotKind::Intra,
            gold_positions: vec![2, 4],
            exo_category: None,
        };
        let g = gold_distribution_zar(&s, 6).unwrap();
        assert_eq!(g.selection.probs, vec![0.0, 0.5, 0.0, 0.5, 0.0, 0.0]);
        assert_eq!(g.exophoric, None);

        let s = ArgumentSlot {
            label: CaseLabel::Nom,
            kind: SlotKind::Exophoric,
            gold_positions: vec![],
            exo_category: Some(ExoCategory::Author),
        };
        let g = gold_distribution_zar(&s, 4).unwrap();
        assert_eq!(g.selection.probs, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(g.exophoric, Some(ExoCategory::Author));

        let s = ArgumentSlot {
            label: CaseLabel::Dat,
            kind: SlotKind::None,
            gold_positions: vec![],
            exo_category: None,
        };
        let g = gold_distribution_zar(&s, 4).unwrap();
        assert_eq!(g.selection.probs[0], 1.0);
        assert_eq!(g.exophoric, Some(ExoCategory::None));
    }

    #[test]
    fn validation_catches_slot_errors() {
        let mut i = inst(8, 6, 6);
        i.slots[0].gold_positions = vec![1];
        assert!(i.validate().is_err());
        i.slots[0].gold_positions = vec![9];
        assert!(i.validate().is_err());
        i.slots[0] = ArgumentSlot {
            label: CaseLabel::Nom,
            kind: SlotKind::Exophoric,
            gold_positions: vec![],
            exo_category: Some(ExoCategory::None),
        };
        assert!(i.validate().is_err());
        i.slots[0].exo_category = Some(ExoCategory::Reader);
        i.validate().unwrap();
        i.slots.push(i.slots[0].clone());
        assert!(i.validate().is_err());
    }

    #[test]
    fn json_format() {
        let line = r#"{"t":[1,9,10,2],"ps":3,"pe":3,"slots":[{"l":"NOM","k":"exophoric","x":"author"},{"l":"ACC","k":"inter","g":[2]}],"meta":{"voice":"active"}}"#;
        let i: ZarInstance = serde_json::from_str(line).unwrap();
        i.validate().unwrap();
        assert_eq!(i.slots[0].exo_category, Some(ExoCategory::Author));
        assert_eq!(i.meta_for("voice", CaseLabel::Acc), Some("active"));
        let rec = PredictionRecord::new(
            3,
            &Prediction {
                label: CaseLabel::Nom,
                choice: Choice::Category(ExoCategory::None),
                score: 0.0,
            },
        );
        assert_eq!(serde_json::to_string(&rec).unwrap(), r#"{"i":3,"l":"NOM","cat":"none"}"#);
    }
}
