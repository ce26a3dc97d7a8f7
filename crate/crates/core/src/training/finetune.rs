use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::objective::{batch_loss, Example, Target};
use super::optim::{clip_global_norm, lr, OptimizerState, Schedule, CLIP_NORM};
use super::pretrain::Interval;
use crate::checkpoint::ModelKind;
use crate::encoder::heads::{exophoric_distribution, label_distribution, selection_scores};
use crate::encoder::{encode, EncoderInput, Params};
use crate::eval::score;
use crate::zar::{
    build_as_input, build_aspzero_input, decode_prediction, gold_distribution_zar, Choice, PredictionRecord, SlotKind,
    ZarInstance,
};
use crate::{Error, Result};

/// Instances encoded together during prediction.
const PREDICT_BATCH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinetuneModel {
    As,
    AsPzero,
}

impl FinetuneModel {
    pub fn kind(self) -> ModelKind {
        match self {
            FinetuneModel::As => ModelKind::As,
            FinetuneModel::AsPzero => ModelKind::AsPzero,
        }
    }
}

impl std::str::FromStr for FinetuneModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as" => Ok(FinetuneModel::As),
            "as-pzero" => Ok(FinetuneModel::AsPzero),
            other => Err(Error::InvalidArgument(format!("unknown model `{other}` (as | as-pzero)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinetuneConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without a dev F1 improvement.
    pub patience: usize,
    pub schedule: Schedule,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub acc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dev_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneOutcome {
    pub params: Params<f32>,
    pub log: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

/// Fresh values for the tensors finetuning adds on top of an encoder: the
/// predicate embedding, the label head and the exophoric head. The
/// selection head is kept.
pub fn prepare_for_finetuning(params: &mut Params<f32>, seed: u64) {
    params.reinit_where(seed ^ 0x5EED_F1E7, |name| {
        name == "predicate_embedding" || name.starts_with("label_") || name.starts_with("exo_")
    });
}

/// Training examples for one instance. Inter slots whose antecedent lies
/// outside the input, and in-context slots trimmed away by the AS-PZero
/// input, have no target and are skipped.
pub fn examples_for(model: FinetuneModel, instance: &ZarInstance, max_len: usize) -> Result<Vec<Example>> {
    let trainable = |kind: SlotKind, gold: &[usize]| !(kind.in_context() && gold.is_empty());
    match model {
        FinetuneModel::As => {
            let input = build_as_input(instance, max_len)?;
            let mut targets = Vec::new();
            for slot in &instance.slots {
                if !trainable(slot.kind, &slot.gold_positions) {
                    continue;
                }
                let g = gold_distribution_zar(slot, input.tokens.len())?;
                targets.push(Target::Label {
                    label: slot.label,
                    gold: g.selection,
                    exophoric: g.exophoric,
                });
            }
            Ok(if targets.is_empty() {
                vec![]
            } else {
                vec![Example {
                    input: EncoderInput {
                        signal: input.signal(),
                        tokens: input.tokens,
                    },
                    targets,
                }]
            })
        }
        FinetuneModel::AsPzero => {
            let mut out = Vec::new();
            for slot in &instance.slots {
                let q = build_aspzero_input(instance, slot.label, max_len)?;
                let slot = q.reindex_slot(slot);
                if !trainable(slot.kind, &slot.gold_positions) {
                    continue;
                }
                let g = gold_distribution_zar(&slot, q.tokens.len())?;
                out.push(Example {
                    input: EncoderInput {
                        tokens: q.tokens.clone(),
                        signal: q.signal(),
                    },
                    targets: vec![Target::Select {
                        mask_index: q.mask_index,
                        gold: g.selection,
                        exophoric: g.exophoric.map(|c| (slot.label, c)),
                    }],
                });
            }
            Ok(out)
        }
    }
}

/// Finetunes `params` (already prepared with [`prepare_for_finetuning`]).
/// With a dev set, keeps the parameters of the epoch with the best overall
/// dev F1 and stops after `patience` epochs without improvement; without
/// one, runs `max_epochs` and keeps the last parameters.
pub fn finetune(
    model: FinetuneModel,
    mut params: Params<f32>,
    train: &[ZarInstance],
    dev: &[ZarInstance],
    config: &FinetuneConfig,
) -> Result<FinetuneOutcome> {
    config.schedule.validate()?;
    if config.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let max_len = params.config.max_len;
    let mut examples = Vec::new();
    for inst in train {
        examples.extend(examples_for(model, inst, max_len)?);
    }
    if examples.is_empty() {
        return Err(Error::Empty("no trainable finetuning slots".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = OptimizerState::new(&params);
    let mut grads = Params::zeros(params.config);
    let mut log = Vec::new();
    let mut best: Option<(f64, usize, Params<f32>)> = None;
    let mut step = 0;
    let mut order: Vec<usize> = (0..examples.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut interval = Interval::default();
        for chunk in order.chunks(config.batch_size) {
            step += 1;
            let batch: Vec<Example> = chunk.iter().map(|&i| examples[i].clone()).collect();
            grads.fill(0.0);
            let st = batch_loss(&params, &batch, Some(&mut grads))?;
            clip_global_norm(&mut grads, CLIP_NORM);
            state.adam_step(&mut params, &grads, lr(step, &config.schedule)?)?;
            interval.add(&st);
        }
        let rec = interval.flush(step);
        let dev_f1 = if dev.is_empty() {
            None
        } else {
            let preds = predict(model, &params, dev)?;
            Some(score(&preds, dev)?.category("all").f1)
        };
        log.push(EpochRecord {
            epoch,
            step,
            loss: rec.loss,
            acc: rec.acc,
            dev_f1,
        });
        if let Some(f1) = dev_f1 {
            let improved = best.as_ref().is_none_or(|(b, _, _)| f1 > *b);
            if improved {
                best = Some((f1, epoch, params.clone()));
            } else if epoch - best.as_ref().unwrap().1 >= config.patience {
                break;
            }
        }
    }
    let (params, best_epoch) = match best {
        Some((_, e, p)) => (p, e),
        None => (params, log.len()),
    };
    Ok(FinetuneOutcome {
        params,
        log,
        best_epoch,
    })
}

/// Decodes every slot label of every instance. Positions in the returned
/// records refer to the original instance; an AS-PZero pick inside the
/// query chunk's predicate copy maps to the predicate token it copies.
pub fn predict(model: FinetuneModel, params: &Params<f32>, instances: &[ZarInstance]) -> Result<Vec<PredictionRecord>> {
    let max_len = params.config.max_len;
    let mut out = Vec::new();
    match model {
        FinetuneModel::As => {
            for (c, chunk) in instances.chunks(PREDICT_BATCH).enumerate() {
                let inputs = chunk
                    .iter()
                    .map(|inst| {
                        let a = build_as_input(inst, max_len)?;
                        Ok(EncoderInput {
                            signal: a.signal(),
                            tokens: a.tokens,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let enc = encode(params, &inputs)?;
                for (k, inst) in chunk.iter().enumerate() {
                    let h = enc.hidden_of(k);
                    for slot in &inst.slots {
                        let dist = label_distribution(params, h, slot.label, &inputs[k].tokens);
                        let exo = exophoric_distribution(params, h.row(0), slot.label);
                        let p = decode_prediction(slot.label, dist.view(), exo.view());
                        out.push(PredictionRecord::new(c * PREDICT_BATCH + k, &p));
                    }
                }
            }
        }
        FinetuneModel::AsPzero => {
            let mut queries = Vec::new();
            for (i, inst) in instances.iter().enumerate() {
                for slot in &inst.slots {
                    queries.push((i, slot.label, build_aspzero_input(inst, slot.label, max_len)?));
                }
            }
            for chunk in queries.chunks(PREDICT_BATCH) {
                let inputs: Vec<EncoderInput> = chunk
                    .iter()
                    .map(|(_, _, q)| EncoderInput {
                        tokens: q.tokens.clone(),
                        signal: q.signal(),
                    })
                    .collect();
                let enc = encode(params, &inputs)?;
                for (k, (i, label, q)) in chunk.iter().enumerate() {
                    let h = enc.hidden_of(k);
                    let s = selection_scores(params, h, q.mask_index, &q.tokens);
                    let exo = exophoric_distribution(params, h.row(0), *label);
                    let mut p = decode_prediction(*label, s.view(), exo.view());
                    if let Choice::Position(pos) = p.choice {
                        let copy_start = q.context_len + 3;
                        let original = if pos >= copy_start {
                            q.p_start + (pos - copy_start) + q.trimmed
                        } else {
                            q.to_original(pos)
                        };
                        p.choice = Choice::Position(original);
                    }
                    out.push(PredictionRecord::new(*i, &p));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::ModelConfig;
    use crate::eval::slot_accuracy;
    use crate::training::optim::ScheduleKind;
    use crate::vocab::{CLS, SEP};
    use crate::zar::{ArgumentSlot, CaseLabel, ExoCategory};

    fn cfg() -> ModelConfig {
        ModelConfig {
            vocab_size: 24,
            dim: 16,
            max_len: 16,
            layers: 1,
            heads: 2,
            ff_dim: 16,
        }
    }

    fn inst(tokens: Vec<u32>, ps: usize, slots: Vec<ArgumentSlot>) -> ZarInstance {
        ZarInstance {
            token_ids: tokens,
            p_start: ps,
            p_end: ps,
            slots,
            meta: Default::default(),
        }
    }

    fn s(label: CaseLabel, kind: SlotKind, g: &[usize], x: Option<ExoCategory>) -> ArgumentSlot {
        ArgumentSlot {
            label,
            kind,
            gold_positions: g.to_vec(),
            exo_category: x,
        }
    }

    fn eight() -> Vec<ZarInstance> {
        use CaseLabel::*;
        (0..8u32)
            .map(|i| {
                let t = vec![CLS, 8 + i, 9 + i, SEP, 12 + i % 4, 16 + i % 5, SEP];
                let slots = match i % 4 {
                    0 => vec![s(Nom, SlotKind::Inter, &[2], None), s(Acc, SlotKind::Intra, &[5], None)],
                    1 => vec![s(Nom, SlotKind::Exophoric, &[], Some(ExoCategory::Author)), s(Dat, SlotKind::Inter, &[3], None)],
                    2 => vec![s(Nom, SlotKind::Intra, &[5], None), s(Acc, SlotKind::None, &[], None)],
                    _ => vec![s(Nom, SlotKind::Inter, &[2, 3], None), s(Acc, SlotKind::Exophoric, &[], Some(ExoCategory::General))],
                };
                inst(t, 6, slots)
            })
            .collect()
    }

    fn fc() -> FinetuneConfig {
        FinetuneConfig {
            batch_size: 4,
            max_epochs: 150,
            patience: 150,
            schedule: Schedule {
                max_lr: 3e-3,
                warmup_steps: 10,
                kind: ScheduleKind::FinetuneDefault,
            },
            seed: 2,
        }
    }

    #[test]
    fn both_models_overfit_eight_instances() {
        let data = eight();
        for model in [FinetuneModel::As, FinetuneModel::AsPzero] {
            let mut p = Params::init(cfg(), 7);
            prepare_for_finetuning(&mut p, 7);
            let out = finetune(model, p, &data, &[], &fc()).unwrap();
            let preds = predict(model, &out.params, &data).unwrap();
            assert_eq!(slot_accuracy(&preds, &data).unwrap(), 1.0, "{model:?} {:?}", out.log.last());
        }
    }

    #[test]
    fn reinit_keeps_selection_head() {
        let mut p = Params::<f32>::init(cfg(), 1);
        let before = p.clone();
        prepare_for_finetuning(&mut p, 3);
        assert_eq!(p.sel_w1, before.sel_w1);
        assert_eq!(p.sel_b2, before.sel_b2);
        assert_eq!(p.token_embedding, before.token_embedding);
        assert_ne!(p.label_w, before.label_w);
        assert_ne!(p.exo_w, before.exo_w);
    }

    #[test]
    fn predictions_refer_to_original_positions() {
        let data = eight();
        let p = Params::init(ModelConfig { max_len: 10, ..cfg() }, 4);
        for model in [FinetuneModel::As, FinetuneModel::AsPzero] {
            let preds = predict(model, &p, &data).unwrap();
            assert_eq!(preds.len(), 16);
            for r in preds {
                if let Some(pos) = r.pos {
                    let t = &data[r.instance].token_ids;
                    assert!(pos >= 2 && pos <= t.len() && t[pos - 1] != SEP, "{r:?}");
                }
            }
        }
    }

    #[test]
    fn out_of_input_inter_slots_are_skipped() {
        let i = inst(vec![CLS, 8, SEP, 9, SEP], 4, vec![s(CaseLabel::Nom, SlotKind::Inter, &[], None)]);
        assert!(examples_for(FinetuneModel::As, &i, 16).unwrap().is_empty());
        assert!(examples_for(FinetuneModel::AsPzero, &i, 16).unwrap().is_empty());
        let p = Params::init(cfg(), 1);
        assert!(finetune(FinetuneModel::As, p, &[i], &[], &fc()).is_err());
    }

    #[test]
    fn early_stopping_respects_patience() {
        let data = eight();
        let mut p = Params::init(cfg(), 7);
        prepare_for_finetuning(&mut p, 7);
        let c = FinetuneConfig {
            patience: 3,
            max_epochs: 200,
            ..fc()
        };
        let out = finetune(FinetuneModel::As, p, &data, &data, &c).unwrap();
        assert!(out.log.len() < 200);
        assert_eq!(out.log.len(), out.best_epoch + 3);
        let best = out.log[out.best_epoch - 1].dev_f1.unwrap();
        assert!(out.log.iter().all(|r| r.dev_f1.unwrap() <= best));
    }
}
