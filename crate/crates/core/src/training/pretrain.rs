use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::objective::{batch_loss, Example, Target};
use super::optim::{clip_global_norm, lr, OptimizerState, Schedule, CLIP_NORM};
use crate::datagen::{cloze_mask, gold_distribution, ClozeInstance, PzeroInstance};
use crate::encoder::{EncoderInput, Params};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum PretrainData {
    Pzero(Vec<PzeroInstance>),
    /// Cloze instances are re-masked every epoch from their original tokens.
    Cloze { instances: Vec<ClozeInstance>, mask_rate: f64 },
}

impl PretrainData {
    pub fn len(&self) -> usize {
        match self {
            PretrainData::Pzero(v) => v.len(),
            PretrainData::Cloze { instances, .. } => instances.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn example(&self, index: usize, epoch: usize, seed: u64) -> Result<Example> {
        match self {
            PretrainData::Pzero(v) => {
                let inst = &v[index];
                Ok(Example {
                    input: EncoderInput::plain(inst.token_ids.clone()),
                    targets: vec![Target::Select {
                        mask_index: inst.mask_index,
                        gold: gold_distribution(&inst.answer_positions, inst.len())?,
                        exophoric: None,
                    }],
                })
            }
            PretrainData::Cloze { instances, mask_rate } => {
                let inst = &instances[index];
                let masked = if epoch == 0 {
                    inst.clone()
                } else {
                    let s = seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (index as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
                    cloze_mask(&inst.original_tokens(), *mask_rate, s)?
                };
                Ok(Example {
                    input: EncoderInput::plain(masked.token_ids.clone()),
                    targets: vec![Target::Cloze {
                        targets: masked.original_ids.iter().map(|(&p, &t)| (p, t)).collect(),
                    }],
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretrainConfig {
    pub batch_size: usize,
    pub updates: usize,
    pub eval_interval: usize,
    pub schedule: Schedule,
    pub seed: u64,
}

/// One line of the metrics log: means over the training batches since the
/// previous record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub step: usize,
    pub loss: f64,
    pub acc: f64,
}

/// Accumulates per-batch stats between log records.
#[derive(Default)]
pub(crate) struct Interval {
    loss: f64,
    batches: usize,
    correct: usize,
    total: usize,
}

impl Interval {
    pub(crate) fn add(&mut self, st: &super::objective::BatchStats) {
        self.loss += st.loss;
        self.batches += 1;
        self.correct += st.correct;
        self.total += st.total;
    }

    pub(crate) fn flush(&mut self, step: usize) -> MetricRecord {
        let r = MetricRecord {
            step,
            loss: self.loss / self.batches.max(1) as f64,
            acc: if self.total == 0 { 0.0 } else { self.correct as f64 / self.total as f64 },
        };
        *self = Interval::default();
        r
    }
}

/// Runs `config.updates` Adam steps over shuffled minibatches; the data order
/// depends only on `config.seed`.
pub fn pretrain(params: &mut Params<f32>, data: &PretrainData, config: &PretrainConfig) -> Result<Vec<MetricRecord>> {
    if data.is_empty() {
        return Err(Error::Empty("no pretraining instances".into()));
    }
    if config.batch_size == 0 || config.eval_interval == 0 {
        return Err(Error::Config("batch_size and eval_interval must be positive".into()));
    }
    config.schedule.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = OptimizerState::new(params);
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut epoch = 0;
    let mut log = Vec::new();
    let mut interval = Interval::default();
    let mut grads = Params::zeros(params.config);

    for step in 1..=config.updates {
        let mut batch = Vec::with_capacity(config.batch_size);
        while batch.len() < config.batch_size.min(data.len()) {
            if cursor == order.len() {
                if !order.is_empty() {
                    epoch += 1;
                }
                order = (0..data.len()).collect();
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(data.example(order[cursor], epoch, config.seed)?);
            cursor += 1;
        }
        grads.fill(0.0);
        let st = batch_loss(params, &batch, Some(&mut grads))?;
        clip_global_norm(&mut grads, CLIP_NORM);
        state.adam_step(params, &grads, lr(step, &config.schedule)?)?;
        interval.add(&st);
        if step % config.eval_interval == 0 || step == config.updates {
            log.push(interval.flush(step));
        }
    }
    Ok(log)
}
