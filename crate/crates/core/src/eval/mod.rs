//! Category-aware scoring of ZAR predictions.
//!
//! Every slot with an in-context or exophoric gold contributes one gold item
//! to its category; `none` slots contribute nothing. A predicted position is
//! filed under the gold slot's kind when that kind is in-context, otherwise
//! under `intra` or `inter` depending on whether it lies in the predicate's
//! sentence. A predicted exophoric category (other than `none`) is filed
//! under `exophoric`.

mod breakdown;
mod permutation;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use breakdown::{breakdown, Axis, BucketRow, BreakdownTable};
pub use permutation::paired_permutation_test;

use crate::zar::{CaseLabel, Choice, ExoCategory, PredictionRecord, SlotKind, ZarInstance};
use crate::{Error, Result};

pub const CATEGORIES: [&str; 6] = ["dep", "intra", "inter", "exophoric", "zar-all", "all"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub gold: usize,
    pub predicted: usize,
    pub correct: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.correct, self.predicted)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.correct, self.gold)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }

    fn add(&mut self, other: &Counts) {
        self.gold += other.gold;
        self.predicted += other.predicted;
        self.correct += other.correct;
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    #[serde(flatten)]
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub labels: BTreeMap<CaseLabel, Counts>,
}

impl CategoryScore {
    fn new(counts: Counts, labels: BTreeMap<CaseLabel, Counts>) -> Self {
        CategoryScore {
            counts,
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
            labels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub categories: BTreeMap<String, CategoryScore>,
}

impl EvalReport {
    pub fn category(&self, name: &str) -> &CategoryScore {
        &self.categories[name]
    }

    /// Human-readable table, one row per category.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:>6} {:>6} {:>6} {:>7} {:>7} {:>7}",
            "category", "gold", "pred", "corr", "P", "R", "F1"
        );
        for name in CATEGORIES {
            let c = &self.categories[name];
            let _ = writeln!(
                out,
                "{:<10} {:>6} {:>6} {:>6} {:>7.2} {:>7.2} {:>7.2}",
                name,
                c.counts.gold,
                c.counts.predicted,
                c.counts.correct,
                100.0 * c.precision,
                100.0 * c.recall,
                100.0 * c.f1
            );
        }
        out
    }
}

fn category_name(kind: SlotKind) -> &'static str {
    match kind {
        SlotKind::Dep => "dep",
        SlotKind::Intra => "intra",
        SlotKind::Inter => "inter",
        SlotKind::Exophoric => "exophoric",
        SlotKind::None => "none",
    }
}

/// Indexes predictions by `(instance, label)`, rejecting unknown instances
/// and duplicates.
pub(crate) fn index_predictions(
    predictions: &[PredictionRecord],
    n_instances: usize,
) -> Result<HashMap<(usize, CaseLabel), Choice>> {
    let mut out = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if p.instance >= n_instances {
            return Err(Error::InvalidArgument(format!(
                "prediction references unknown instance {} (have {n_instances})",
                p.instance
            )));
        }
        if out.insert((p.instance, p.label), p.choice()?).is_some() {
            return Err(Error::InvalidArgument(format!(
                "duplicate prediction for instance {} label {}",
                p.instance, p.label
            )));
        }
    }
    Ok(out)
}

/// Category a predicted position is filed under.
fn predicted_category(instance: &ZarInstance, gold_kind: Option<SlotKind>, pos: usize) -> &'static str {
    match gold_kind {
        Some(k) if k.in_context() => category_name(k),
        _ if pos >= 1 && pos <= instance.len() && instance.sentence_of(pos) == instance.sentence_of(instance.p_start) => "intra",
        _ => "inter",
    }
}

/// Whether the prediction for a gold slot is correct.
pub(crate) fn is_correct(instance: &ZarInstance, label: CaseLabel, choice: Option<Choice>) -> bool {
    let Some(slot) = instance.slot(label) else {
        return false;
    };
    match (choice, slot.kind) {
        (Some(Choice::Position(p)), k) if k.in_context() => slot.gold_positions.contains(&p),
        (Some(Choice::Category(c)), SlotKind::Exophoric) => slot.exo_category == Some(c),
        _ => false,
    }
}

pub fn score(predictions: &[PredictionRecord], instances: &[ZarInstance]) -> Result<EvalReport> {
    let preds = index_predictions(predictions, instances.len())?;
    let mut per: BTreeMap<&'static str, BTreeMap<CaseLabel, Counts>> = BTreeMap::new();
    for name in ["dep", "intra", "inter", "exophoric"] {
        per.insert(name, CaseLabel::ALL.iter().map(|&l| (l, Counts::default())).collect());
    }

    for (i, inst) in instances.iter().enumerate() {
        for label in CaseLabel::ALL {
            let slot = inst.slot(label);
            let choice = preds.get(&(i, label)).copied();
            let gold_kind = slot.map(|s| s.kind);
            if let Some(k) = gold_kind.filter(|&k| k != SlotKind::None) {
                per.get_mut(category_name(k)).unwrap().get_mut(&label).unwrap().gold += 1;
            }
            let pred_cat = match choice {
                Some(Choice::Position(p)) => Some(predicted_category(inst, gold_kind, p)),
                Some(Choice::Category(ExoCategory::None)) | None => None,
                Some(Choice::Category(_)) => Some("exophoric"),
            };
            if let Some(cat) = pred_cat {
                let c = per.get_mut(cat).unwrap().get_mut(&label).unwrap();
                c.predicted += 1;
                if is_correct(inst, label, choice) {
                    c.correct += 1;
                }
            }
        }
    }

    let mut categories = BTreeMap::new();
    let pool = |names: &[&str]| {
        let mut labels: BTreeMap<CaseLabel, Counts> = BTreeMap::new();
        for n in names {
            for (l, c) in &per[n] {
                labels.entry(*l).or_default().add(c);
            }
        }
        let mut total = Counts::default();
        for c in labels.values() {
            total.add(c);
        }
        CategoryScore::new(total, labels)
    };
    for name in ["dep", "intra", "inter", "exophoric"] {
        categories.insert(name.to_string(), pool(&[name]));
    }
    categories.insert("zar-all".into(), pool(&["intra", "inter", "exophoric"]));
    categories.insert("all".into(), pool(&["dep", "intra", "inter", "exophoric"]));
    Ok(EvalReport { categories })
}

/// 0/1 correctness for every gold item (slot of kind other than `none`),
/// in instance then label order.
pub fn correctness_flags(predictions: &[PredictionRecord], instances: &[ZarInstance]) -> Result<Vec<bool>> {
    let preds = index_predictions(predictions, instances.len())?;
    let mut flags = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        for label in CaseLabel::ALL {
            if inst.slot(label).is_some_and(|s| s.kind != SlotKind::None) {
                flags.push(is_correct(inst, label, preds.get(&(i, label)).copied()));
            }
        }
    }
    Ok(flags)
}

/// Fraction of slots (including `none` slots) whose decoded choice matches
/// gold exactly.
pub fn slot_accuracy(predictions: &[PredictionRecord], instances: &[ZarInstance]) -> Result<f64> {
    let preds = index_predictions(predictions, instances.len())?;
    let (mut right, mut total) = (0usize, 0usize);
    for (i, inst) in instances.iter().enumerate() {
        for slot in &inst.slots {
            total += 1;
            let choice = preds.get(&(i, slot.label)).copied();
            let ok = match slot.kind {
                SlotKind::None => matches!(choice, Some(Choice::Category(ExoCategory::None))),
                _ => is_correct(inst, slot.label, choice),
            };
            right += ok as usize;
        }
    }
    Ok(ratio(right, total))
}
