//! Recall per instance type for `intra` and `inter` slots.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{index_predictions, is_correct};
use crate::zar::{CaseLabel, PredictionRecord, SlotKind, ZarInstance};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Antecedents,
    Distance,
    Voice,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Antecedents, Axis::Distance, Axis::Voice];

    pub fn title(self) -> &'static str {
        match self {
            Axis::Antecedents => "Number of gold antecedents in input",
            Axis::Distance => "Position of the argument relative to the target predicate",
            Axis::Voice => "Voice of the target predicate",
        }
    }

    pub fn buckets(self) -> &'static [&'static str] {
        match self {
            Axis::Antecedents => &["only one", "more than one"],
            Axis::Distance => &[
                "one sentence before",
                "two sentences before",
                "more than two sentences before",
                "out of input sequence",
            ],
            Axis::Voice => &["active", "passive", "causative", "causative & passive"],
        }
    }

    fn meta_key(self) -> &'static str {
        match self {
            Axis::Antecedents => "antecedents",
            Axis::Distance => "distance",
            Axis::Voice => "voice",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "antecedents" => Ok(Axis::Antecedents),
            "distance" => Ok(Axis::Distance),
            "voice" => Ok(Axis::Voice),
            other => Err(Error::InvalidArgument(format!("unknown axis `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Cell {
    pub count: usize,
    pub correct: usize,
    /// `None` for an empty bucket.
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub bucket: String,
    pub intra: Cell,
    pub inter: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownTable {
    pub axis: Axis,
    pub rows: Vec<BucketRow>,
}

impl BreakdownTable {
    pub fn to_table(&self) -> String {
        let fmt = |c: &Cell| match c.recall {
            Some(r) => format!("{:>7.2} {:>6}", 100.0 * r, c.count),
            None => format!("{:>7} {:>6}", "-", c.count),
        };
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.axis.title());
        let _ = writeln!(out, "{:<32} {:>7} {:>6} {:>7} {:>6}", "type", "intra", "n", "inter", "n");
        for row in &self.rows {
            let _ = writeln!(out, "{:<32} {} {}", row.bucket, fmt(&row.intra), fmt(&row.inter));
        }
        out
    }
}

fn bucket_of(axis: Axis, inst: &ZarInstance, label: CaseLabel, kind: SlotKind) -> std::result::Result<Option<&'static str>, String> {
    let slot = inst.slot(label).expect("slot exists");
    let meta = inst.meta_for(axis.meta_key(), label);
    let b = axis.buckets();
    match axis {
        Axis::Antecedents => {
            let n = if slot.gold_positions.is_empty() {
                let v = meta.ok_or_else(String::new)?;
                v.parse::<usize>().map_err(|_| format!("bad antecedents value `{v}`"))?
            } else {
                slot.gold_positions.len()
            };
            Ok(Some(if n <= 1 { b[0] } else { b[1] }))
        }
        Axis::Distance => {
            if kind != SlotKind::Inter {
                return Ok(None);
            }
            let v = match meta {
                Some(v) => v,
                None if slot.gold_positions.is_empty() => "out",
                None => return Err(String::new()),
            };
            Ok(Some(match v {
                "1" => b[0],
                "2" => b[1],
                "out" => b[3],
                v => match v.parse::<usize>() {
                    Ok(n) if n >= 3 => b[2],
                    _ => return Err(format!("bad distance value `{v}`")),
                },
            }))
        }
        Axis::Voice => {
            let v = meta.ok_or_else(String::new)?;
            Ok(Some(match v {
                "active" => b[0],
                "passive" => b[1],
                "causative" => b[2],
                "causative & passive" | "causative_passive" | "causative-passive" => b[3],
                v => return Err(format!("bad voice value `{v}`")),
            }))
        }
    }
}

/// Recall per bucket for `intra` and `inter` gold slots. Bucket counts
/// weighted by bucket recall add up to the category recall.
pub fn breakdown(predictions: &[PredictionRecord], instances: &[ZarInstance], axis: Axis) -> Result<BreakdownTable> {
    let preds = index_predictions(predictions, instances.len())?;
    let names = axis.buckets();
    let mut rows: Vec<BucketRow> = names
        .iter()
        .map(|b| BucketRow {
            bucket: b.to_string(),
            intra: Cell::default(),
            inter: Cell::default(),
        })
        .collect();
    let mut missing = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        for label in CaseLabel::ALL {
            let Some(kind) = inst.slot(label).map(|s| s.kind).filter(|k| matches!(k, SlotKind::Intra | SlotKind::Inter))
            else {
                continue;
            };
            let bucket = match bucket_of(axis, inst, label, kind) {
                Ok(Some(b)) => b,
                Ok(None) => continue,
                Err(msg) if msg.is_empty() => {
                    if missing.last() != Some(&i) {
                        missing.push(i);
                    }
                    continue;
                }
                Err(msg) => return Err(Error::InvalidInstance(format!("instance {i}: {msg}"))),
            };
            let row = rows.iter_mut().find(|r| r.bucket == bucket).unwrap();
            let cell = if kind == SlotKind::Intra { &mut row.intra } else { &mut row.inter };
            cell.count += 1;
            cell.correct += is_correct(inst, label, preds.get(&(i, label)).copied()) as usize;
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingMetadata {
            key: axis.meta_key().to_string(),
            ids: missing,
        });
    }
    for row in &mut rows {
        for c in [&mut row.intra, &mut row.inter] {
            c.recall = (c.count > 0).then(|| c.correct as f64 / c.count as f64);
        }
    }
    Ok(BreakdownTable { axis, rows })
}
