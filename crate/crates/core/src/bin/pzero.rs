//! `pzero`: data generation, pretraining, finetuning and evaluation.
//!
//! Every command reads an optional `--config` file of `key = value` lines;
//! `--set key=value` and the dedicated flags are applied on top of it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pzero_core::checkpoint::{Checkpoint, ModelKind};
use pzero_core::config::RunConfig;
use pzero_core::corpus::{load_parsed_corpus, write_parsed_corpus, Document};
use pzero_core::datagen::{emit_cloze_instances, emit_pzero_instances, ClozeInstance, GenerationStats, PzeroInstance};
use pzero_core::encoder::Params;
use pzero_core::eval::{breakdown, correctness_flags, paired_permutation_test, score, slot_accuracy, Axis, BreakdownTable, EvalReport};
use pzero_core::grid::{run_grid, CellResult, GridData, GridSettings};
use pzero_core::synthetic::{entity_corpus, vocabulary, zar_instances, SyntheticConfig};
use pzero_core::training::finetune::{finetune, predict, prepare_for_finetuning, FinetuneConfig, FinetuneModel};
use pzero_core::training::optim::ScheduleKind;
use pzero_core::training::pretrain::{pretrain, PretrainConfig, PretrainData};
use pzero_core::vocab::Vocabulary;
use pzero_core::zar::{load_instances, load_predictions};
use pzero_core::{jsonl, Error, Result};

#[derive(Parser)]
#[command(name = "pzero", version, about = "Pseudo zero pronoun pretraining and zero anaphora resolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Random seed (falls back to PZERO_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate PZero (and optionally Cloze) instances from a parsed corpus.
    GenPzero {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Vocabulary file; loaded if it exists, otherwise built from the corpus and written.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        cloze_out: Option<PathBuf>,
        #[arg(long)]
        stats: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Pretrain an encoder on PZero or Cloze instances.
    Pretrain {
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long)]
        instances: Option<PathBuf>,
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Continue from a pretrained checkpoint instead of a random encoder.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Finetune an AS or AS-PZero model on ZAR instances.
    Finetune {
        #[arg(long)]
        model: FinetuneModel,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        dev: Option<PathBuf>,
        /// Pretrained checkpoint; a random encoder is used when absent.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Needed for the vocabulary size when there is no `--init`.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Decode ZAR instances with a finetuned checkpoint.
    Predict {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        instances: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Score predictions per category, optionally against a second system.
    Evaluate {
        #[arg(long)]
        instances: Option<PathBuf>,
        #[arg(long)]
        predictions: PathBuf,
        /// Second prediction file for a paired permutation test.
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long, default_value_t = 9999)]
        permutations: usize,
        /// Categories that must have gold items, comma separated.
        #[arg(long, value_delimiter = ',')]
        require: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Recall broken down by antecedent count, distance and voice.
    Analyze {
        #[arg(long)]
        instances: Option<PathBuf>,
        #[arg(long)]
        predictions: PathBuf,
        /// Defaults to all three axes.
        #[arg(long, value_enum)]
        axis: Vec<AxisArg>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the six-cell grid and write one report per cell.
    Grid {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Cell ids to run, comma separated (default: all).
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic entity-repetition corpus and ZAR splits.
    GenSynthetic {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 2000)]
        docs: usize,
        #[arg(long, default_value_t = 200)]
        entities: usize,
        #[arg(long, default_value_t = 100)]
        train: usize,
        #[arg(long, default_value_t = 100)]
        dev: usize,
        #[arg(long, default_value_t = 300)]
        test: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Pzero,
    Cloze,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Antecedents,
    Distance,
    Voice,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Axis {
        match a {
            AxisArg::Antecedents => Axis::Antecedents,
            AxisArg::Distance => Axis::Distance,
            AxisArg::Voice => Axis::Voice,
        }
    }
}

/// Header written next to every line-delimited output as `<file>.meta.json`.
#[derive(Serialize)]
struct ArtifactMeta<'a> {
    command: &'a str,
    seed: u64,
    config_hash: String,
    records: usize,
}

struct Run {
    cfg: RunConfig,
    seed: u64,
    hash: String,
}

impl Run {
    fn new(common: &Common) -> Result<Self> {
        let mut cfg = match &common.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        for kv in &common.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(s) = common.seed {
            cfg.seed = Some(s);
        }
        cfg.validate()?;
        let seed = cfg.resolved_seed()?;
        let hash = cfg.hash_hex();
        Ok(Run { cfg, seed, hash })
    }

    fn meta_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".meta.json");
        PathBuf::from(s)
    }

    fn write_jsonl<T: Serialize>(&self, command: &str, path: &Path, records: &[T]) -> Result<()> {
        jsonl::write(path, records)?;
        let meta = ArtifactMeta {
            command,
            seed: self.seed,
            config_hash: self.hash.clone(),
            records: records.len(),
        };
        jsonl::write_json(&Self::meta_path(path), &meta)
    }

    fn write_report<T: Serialize>(&self, path: &Path, body: &T) -> Result<()> {
        #[derive(Serialize)]
        struct Report<'a, T> {
            seed: u64,
            config_hash: &'a str,
            #[serde(flatten)]
            body: &'a T,
        }
        jsonl::write_json(
            path,
            &Report {
                seed: self.seed,
                config_hash: &self.hash,
                body,
            },
        )
    }

    fn checkpoint(&self, kind: ModelKind, params: Params<f32>) -> Checkpoint {
        Checkpoint {
            kind,
            seed: self.seed,
            config_hash: self.cfg.hash(),
            params,
        }
    }
}

fn pick<'a>(flag: &'a Option<PathBuf>, fallback: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    flag.as_deref()
        .or(fallback.as_deref())
        .ok_or_else(|| Error::Config(format!("missing `{key}` (pass --{key} or set it in the config file)")))
}

fn load_or_build_vocab(path: &Path, docs: &[Document], min_count: usize) -> Result<Vocabulary> {
    if path.exists() {
        return Vocabulary::load(path);
    }
    let v = Vocabulary::build(docs, min_count)?;
    v.save(path)?;
    Ok(v)
}

fn gen_pzero_data(run: &Run, docs: &[Document], vocab: &Vocabulary) -> Result<Vec<PzeroInstance>> {
    let mut out = Vec::new();
    for d in docs {
        out.extend(emit_pzero_instances(d, run.cfg.window_sentences, run.cfg.max_len, vocab)?);
    }
    if out.is_empty() {
        return Err(Error::Empty(format!(
            "no PZero instances generated from {} documents: no noun phrase recurs within a {}-sentence window",
            docs.len(),
            run.cfg.window_sentences
        )));
    }
    Ok(out)
}

fn cmd_gen_pzero(
    run: &Run,
    corpus: &Option<PathBuf>,
    vocab: &Option<PathBuf>,
    out: &Option<PathBuf>,
    cloze_out: &Option<PathBuf>,
    stats: &Option<PathBuf>,
) -> Result<()> {
    let docs = load_parsed_corpus(pick(corpus, &run.cfg.corpus, "corpus")?)?;
    let vocab = load_or_build_vocab(pick(vocab, &run.cfg.vocab, "vocab")?, &docs, run.cfg.min_count)?;
    let out = pick(out, &run.cfg.output, "out")?;
    let instances = gen_pzero_data(run, &docs, &vocab)?;
    run.write_jsonl("gen-pzero", out, &instances)?;
    let gen = GenerationStats::from_instances(&docs, &instances);
    let mut cloze_count = None;
    if let Some(path) = cloze_out {
        let cloze = emit_cloze_instances(&docs, run.cfg.window_sentences, run.cfg.max_len, &vocab, run.cfg.mask_rate, run.seed)?;
        run.write_jsonl("gen-pzero", path, &cloze)?;
        cloze_count = Some(cloze.len());
    }
    #[derive(Serialize)]
    struct Stats {
        #[serde(flatten)]
        gen: GenerationStats,
        #[serde(skip_serializing_if = "Option::is_none")]
        cloze_instances: Option<usize>,
    }
    println!(
        "{} instances from {} documents, {:.2} answers per instance",
        gen.instances, gen.documents, gen.mean_answers
    );
    if let Some(path) = stats {
        run.write_report(path, &Stats { gen, cloze_instances: cloze_count })?;
    }
    Ok(())
}

fn cmd_pretrain(
    run: &Run,
    task: Task,
    instances: &Option<PathBuf>,
    vocab: &Option<PathBuf>,
    init: &Option<PathBuf>,
    out: &Option<PathBuf>,
    metrics: &Option<PathBuf>,
) -> Result<()> {
    let path = pick(instances, &run.cfg.instances, "instances")?;
    let (data, kind) = match task {
        Task::Pzero => (PretrainData::Pzero(jsonl::read::<PzeroInstance>(path)?), ModelKind::Pzero),
        Task::Cloze => (
            PretrainData::Cloze {
                instances: jsonl::read::<ClozeInstance>(path)?,
                mask_rate: run.cfg.mask_rate,
            },
            ModelKind::Cloze,
        ),
    };
    let mut params = match init {
        Some(p) => Checkpoint::load_expecting(p, &[ModelKind::Base, ModelKind::Pzero, ModelKind::Cloze])?.params,
        None => {
            let v = Vocabulary::load(pick(vocab, &run.cfg.vocab, "vocab")?)?;
            Params::init(run.cfg.model_config(v.len())?, run.seed)
        }
    };
    let cfg = PretrainConfig {
        batch_size: run.cfg.batch_size,
        updates: run.cfg.updates,
        eval_interval: run.cfg.eval_interval,
        schedule: run.cfg.schedule(ScheduleKind::InverseSqrt),
        seed: run.seed,
    };
    let log = pretrain(&mut params, &data, &cfg)?;
    if let Some(last) = log.last() {
        println!("step {} loss {:.4} acc {:.4}", last.step, last.loss, last.acc);
    }
    run.checkpoint(kind, params).save(pick(out, &run.cfg.checkpoint, "out")?)?;
    if let Some(m) = metrics {
        run.write_jsonl("pretrain", m, &log)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_finetune(
    run: &Run,
    model: FinetuneModel,
    train: &Option<PathBuf>,
    dev: &Option<PathBuf>,
    init: &Option<PathBuf>,
    vocab: &Option<PathBuf>,
    out: &Option<PathBuf>,
    metrics: &Option<PathBuf>,
) -> Result<()> {
    let train = load_instances(pick(train, &run.cfg.instances, "train")?)?;
    let dev = match dev.as_ref().or(run.cfg.dev.as_ref()) {
        Some(p) => load_instances(p)?,
        None => Vec::new(),
    };
    let mut params = match init {
        Some(p) => Checkpoint::load_expecting(p, &[ModelKind::Base, ModelKind::Pzero, ModelKind::Cloze])?.params,
        None => {
            let v = Vocabulary::load(pick(vocab, &run.cfg.vocab, "vocab")?)?;
            Params::init(run.cfg.model_config(v.len())?, run.seed)
        }
    };
    prepare_for_finetuning(&mut params, run.seed);
    let cfg = FinetuneConfig {
        batch_size: run.cfg.batch_size,
        max_epochs: run.cfg.max_epochs,
        patience: run.cfg.patience,
        schedule: run.cfg.schedule(ScheduleKind::FinetuneDefault),
        seed: run.seed,
    };
    let outcome = finetune(model, params, &train, &dev, &cfg)?;
    println!("kept epoch {} of {}", outcome.best_epoch, outcome.log.len());
    run.checkpoint(model.kind(), outcome.params)
        .save(pick(out, &run.cfg.output, "out")?)?;
    if let Some(m) = metrics {
        run.write_jsonl("finetune", m, &outcome.log)?;
    }
    Ok(())
}

fn cmd_predict(run: &Run, checkpoint: &Option<PathBuf>, instances: &Option<PathBuf>, out: &Option<PathBuf>) -> Result<()> {
    let ck = Checkpoint::load_expecting(pick(checkpoint, &run.cfg.checkpoint, "checkpoint")?, &[ModelKind::As, ModelKind::AsPzero])?;
    let model = if ck.kind == ModelKind::As {
        FinetuneModel::As
    } else {
        FinetuneModel::AsPzero
    };
    let instances = load_instances(pick(instances, &run.cfg.instances, "instances")?)?;
    let preds = predict(model, &ck.params, &instances)?;
    run.write_jsonl("predict", pick(out, &run.cfg.output, "out")?, &preds)
}

#[derive(Serialize)]
struct Comparison {
    permutations: usize,
    items: usize,
    accuracy: f64,
    accuracy_compare: f64,
    p_value: f64,
}

#[derive(Serialize)]
struct EvaluateReport {
    slot_accuracy: f64,
    #[serde(flatten)]
    report: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<Comparison>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    run: &Run,
    instances: &Option<PathBuf>,
    predictions: &Path,
    compare: &Option<PathBuf>,
    permutations: usize,
    require: &[String],
    out: &Option<PathBuf>,
) -> Result<bool> {
    let instances = load_instances(pick(instances, &run.cfg.instances, "instances")?)?;
    let preds = load_predictions(predictions)?;
    let report = score(&preds, &instances)?;
    let comparison = match compare {
        Some(path) => {
            let other = load_predictions(path)?;
            let a = correctness_flags(&preds, &instances)?;
            let b = correctness_flags(&other, &instances)?;
            let mean = |f: &[bool]| f.iter().filter(|&&x| x).count() as f64 / f.len().max(1) as f64;
            Some(Comparison {
                permutations,
                items: a.len(),
                accuracy: mean(&a),
                accuracy_compare: mean(&b),
                p_value: paired_permutation_test(&a, &b, permutations, run.seed)?,
            })
        }
        None => None,
    };
    print!("{}", report.to_table());
    if let Some(c) = &comparison {
        println!(
            "paired permutation test over {} items: accuracy {:.4} vs {:.4}, p = {:.4}",
            c.items, c.accuracy, c.accuracy_compare, c.p_value
        );
    }
    let mut ok = true;
    for name in require {
        match report.categories.get(name.as_str()) {
            None => return Err(Error::InvalidArgument(format!("unknown category `{name}`"))),
            Some(c) if c.counts.gold == 0 => {
                eprintln!("error: required category `{name}` has no gold items");
                ok = false;
            }
            Some(_) => {}
        }
    }
    if let Some(path) = out.as_ref().or(run.cfg.reports.as_ref()) {
        let body = EvaluateReport {
            slot_accuracy: slot_accuracy(&preds, &instances)?,
            report,
            comparison,
        };
        run.write_report(path, &body)?;
    }
    Ok(ok)
}

fn cmd_analyze(run: &Run, instances: &Option<PathBuf>, predictions: &Path, axes: &[AxisArg], out: &Option<PathBuf>) -> Result<()> {
    let instances = load_instances(pick(instances, &run.cfg.instances, "instances")?)?;
    let preds = load_predictions(predictions)?;
    let axes: Vec<Axis> = if axes.is_empty() {
        Axis::ALL.to_vec()
    } else {
        axes.iter().map(|&a| a.into()).collect()
    };
    let mut tables: BTreeMap<String, BreakdownTable> = BTreeMap::new();
    for axis in axes {
        let t = breakdown(&preds, &instances, axis)?;
        println!("{}", t.to_table());
        let key = serde_json::to_value(axis).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        tables.insert(key.as_str().unwrap_or_default().to_string(), t);
    }
    if let Some(path) = out.as_ref().or(run.cfg.reports.as_ref()) {
        #[derive(Serialize)]
        struct Axes {
            axes: BTreeMap<String, BreakdownTable>,
        }
        run.write_report(path, &Axes { axes: tables })?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_grid(
    run: &Run,
    corpus: &Option<PathBuf>,
    vocab: &Option<PathBuf>,
    train: &Option<PathBuf>,
    dev: &Option<PathBuf>,
    test: &Path,
    out_dir: &Option<PathBuf>,
    only: &[String],
) -> Result<()> {
    let docs = load_parsed_corpus(pick(corpus, &run.cfg.corpus, "corpus")?)?;
    let vocab = load_or_build_vocab(pick(vocab, &run.cfg.vocab, "vocab")?, &docs, run.cfg.min_count)?;
    let out_dir = pick(out_dir, &run.cfg.reports, "out-dir")?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    let c = &run.cfg;
    let data = GridData {
        pzero: gen_pzero_data(run, &docs, &vocab)?,
        cloze: emit_cloze_instances(&docs, c.window_sentences, c.max_len, &vocab, c.mask_rate, run.seed)?,
        mask_rate: c.mask_rate,
        train: load_instances(pick(train, &c.instances, "train")?)?,
        dev: match dev.as_ref().or(c.dev.as_ref()) {
            Some(p) => load_instances(p)?,
            None => Vec::new(),
        },
        test: load_instances(test)?,
    };
    let settings = GridSettings {
        model: c.model_config(vocab.len())?,
        pretrain: PretrainConfig {
            batch_size: c.batch_size,
            updates: c.updates,
            eval_interval: c.eval_interval,
            schedule: c.schedule(ScheduleKind::InverseSqrt),
            seed: run.seed,
        },
        finetune: FinetuneConfig {
            batch_size: c.batch_size,
            max_epochs: c.max_epochs,
            patience: c.patience,
            schedule: c.schedule(ScheduleKind::FinetuneDefault),
            seed: run.seed,
        },
        seed: run.seed,
    };
    let only: Vec<&str> = only.iter().map(String::as_str).collect();
    let cells: Vec<CellResult> = run_grid(&data, &settings, &only)?;
    println!("{:<4} {:<6} {:<9} {:>9} {:>9} {:>9}", "id", "pre", "model", "slot acc", "random", "all F1");
    for cell in &cells {
        println!(
            "({}) {:<6} {:<9} {:>9.4} {:>9.4} {:>9.2}",
            cell.id,
            cell.pretraining.to_string(),
            match cell.model {
                FinetuneModel::As => "as",
                FinetuneModel::AsPzero => "as-pzero",
            },
            cell.slot_accuracy,
            cell.random_baseline,
            100.0 * cell.report.category("all").f1
        );
        run.write_report(&out_dir.join(format!("{}.json", cell.id)), cell)?;
        run.write_jsonl("grid", &out_dir.join(format!("{}.predictions.jsonl", cell.id)), &cell.predictions)?;
    }
    Ok(())
}

fn cmd_gen_synthetic(run: &Run, out_dir: &Path, docs: usize, entities: usize, splits: [usize; 3]) -> Result<()> {
    let sc = SyntheticConfig {
        entities,
        ..SyntheticConfig::default()
    };
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    let vocab = vocabulary(&sc)?;
    vocab.save(&out_dir.join("vocab.tsv"))?;
    write_parsed_corpus(&out_dir.join("corpus.jsonl"), &entity_corpus(&sc, docs, run.seed)?)?;
    for (k, (name, count)) in ["train", "dev", "test"].iter().zip(splits).enumerate() {
        let set = zar_instances(&sc, &vocab, count, run.seed.wrapping_add(k as u64 + 1))?;
        run.write_jsonl("gen-synthetic", &out_dir.join(format!("{name}.jsonl")), &set)?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::GenPzero {
            corpus,
            vocab,
            out,
            cloze_out,
            stats,
            common,
        } => cmd_gen_pzero(&Run::new(common)?, corpus, vocab, out, cloze_out, stats)?,
        Command::Pretrain {
            task,
            instances,
            vocab,
            init,
            out,
            metrics,
            common,
        } => cmd_pretrain(&Run::new(common)?, *task, instances, vocab, init, out, metrics)?,
        Command::Finetune {
            model,
            train,
            dev,
            init,
            vocab,
            out,
            metrics,
            common,
        } => cmd_finetune(&Run::new(common)?, *model, train, dev, init, vocab, out, metrics)?,
        Command::Predict {
            checkpoint,
            instances,
            out,
            common,
        } => cmd_predict(&Run::new(common)?, checkpoint, instances, out)?,
        Command::Evaluate {
            instances,
            predictions,
            compare,
            permutations,
            require,
            out,
            common,
        } => return cmd_evaluate(&Run::new(common)?, instances, predictions, compare, *permutations, require, out),
        Command::Analyze {
            instances,
            predictions,
            axis,
            out,
            common,
        } => cmd_analyze(&Run::new(common)?, instances, predictions, axis, out)?,
        Command::Grid {
            corpus,
            vocab,
            train,
            dev,
            test,
            out_dir,
            only,
            common,
        } => cmd_grid(&Run::new(common)?, corpus, vocab, train, dev, test, out_dir, only)?,
        Command::GenSynthetic {
            out_dir,
            docs,
            entities,
            train,
            dev,
            test,
            common,
        } => cmd_gen_synthetic(&Run::new(common)?, out_dir, *docs, *entities, [*train, *dev, *test])?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
