//! The six-cell experiment grid: {no further pretraining, Cloze, PZero}
//! x {AS, AS-PZero}, labelled (f) to (k).

use serde::{Deserialize, Serialize};

use crate::checkpoint::ModelKind;
use crate::datagen::{ClozeInstance, PzeroInstance};
use crate::encoder::heads::candidate_mask;
use crate::encoder::{ModelConfig, Params};
use crate::eval::{score, slot_accuracy, EvalReport};
use crate::training::finetune::{finetune, predict, prepare_for_finetuning, FinetuneConfig, FinetuneModel};
use crate::training::pretrain::{pretrain, MetricRecord, PretrainConfig, PretrainData};
use crate::zar::{build_aspzero_input, PredictionRecord, ZarInstance};
use crate::Result;

/// `(id, further pretraining, finetuning model)` in table order.
pub const CELLS: [(&str, ModelKind, FinetuneModel); 6] = [
    ("f", ModelKind::Base, FinetuneModel::As),
    ("g", ModelKind::Base, FinetuneModel::AsPzero),
    ("h", ModelKind::Cloze, FinetuneModel::As),
    ("i", ModelKind::Cloze, FinetuneModel::AsPzero),
    ("j", ModelKind::Pzero, FinetuneModel::As),
    ("k", ModelKind::Pzero, FinetuneModel::AsPzero),
];

#[derive(Debug, Clone)]
pub struct GridData {
    pub pzero: Vec<PzeroInstance>,
    pub cloze: Vec<ClozeInstance>,
    pub mask_rate: f64,
    pub train: Vec<ZarInstance>,
    pub dev: Vec<ZarInstance>,
    pub test: Vec<ZarInstance>,
}

#[derive(Debug, Clone, Copy)]
pub struct GridSettings {
    pub model: ModelConfig,
    /// Shared by both further-pretraining tasks, so they get the same
    /// number of updates.
    pub pretrain: PretrainConfig,
    pub finetune: FinetuneConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub id: String,
    pub pretraining: ModelKind,
    pub model: FinetuneModel,
    pub seed: u64,
    pub slot_accuracy: f64,
    /// Mean over test slots of `1 / candidate count` for this model's input.
    pub random_baseline: f64,
    pub best_epoch: usize,
    pub report: EvalReport,
    #[serde(skip)]
    pub predictions: Vec<PredictionRecord>,
    #[serde(skip)]
    pub pretrain_log: Vec<MetricRecord>,
}

/// Expected accuracy of picking a candidate position uniformly at random.
pub fn random_baseline(model: FinetuneModel, instances: &[ZarInstance], max_len: usize) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for inst in instances {
        for slot in &inst.slots {
            let count = match model {
                FinetuneModel::As => candidate_mask(&inst.token_ids).iter().filter(|&&c| c).count(),
                FinetuneModel::AsPzero => {
                    let q = build_aspzero_input(inst, slot.label, max_len)?;
                    candidate_mask(&q.tokens).iter().filter(|&&c| c).count()
                }
            };
            sum += 1.0 / count as f64;
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Pretrained starting point for `kind`, plus its training log.
pub fn pretrained(kind: ModelKind, data: &GridData, settings: &GridSettings) -> Result<(Params<f32>, Vec<MetricRecord>)> {
    let mut params = Params::init(settings.model, settings.seed);
    let task = match kind {
        ModelKind::Pzero => PretrainData::Pzero(data.pzero.clone()),
        ModelKind::Cloze => PretrainData::Cloze {
            instances: data.cloze.clone(),
            mask_rate: data.mask_rate,
        },
        _ => return Ok((params, Vec::new())),
    };
    let cfg = PretrainConfig {
        seed: settings.seed,
        ..settings.pretrain
    };
    let log = pretrain(&mut params, &task, &cfg)?;
    Ok((params, log))
}

/// Runs every cell whose id is in `only` (all cells when empty).
pub fn run_grid(data: &GridData, settings: &GridSettings, only: &[&str]) -> Result<Vec<CellResult>> {
    let mut out = Vec::new();
    for kind in [ModelKind::Base, ModelKind::Cloze, ModelKind::Pzero] {
        let cells: Vec<_> = CELLS
            .iter()
            .filter(|(id, k, _)| *k == kind && (only.is_empty() || only.contains(id)))
            .collect();
        if cells.is_empty() {
            continue;
        }
        let (init, log) = pretrained(kind, data, settings)?;
        for (id, _, model) in cells {
            let mut params = init.clone();
            prepare_for_finetuning(&mut params, settings.seed);
            let cfg = FinetuneConfig {
                seed: settings.seed,
                ..settings.finetune
            };
            let outcome = finetune(*model, params, &data.train, &data.dev, &cfg)?;
            let predictions = predict(*model, &outcome.params, &data.test)?;
            out.push(CellResult {
                id: id.to_string(),
                pretraining: kind,
                model: *model,
                seed: settings.seed,
                slot_accuracy: slot_accuracy(&predictions, &data.test)?,
                random_baseline: random_baseline(*model, &data.test, settings.model.max_len)?,
                best_epoch: outcome.best_epoch,
                report: score(&predictions, &data.test)?,
                predictions,
                pretrain_log: log.clone(),
            });
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}
