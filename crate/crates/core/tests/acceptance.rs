//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use pzero_core::corpus::{extract_noun_phrases, noun_phrase_range, ParsedSentence};
use pzero_core::datagen::{emit_cloze_instances, emit_pzero_instances, gold_distribution, PzeroInstance};
use pzero_core::encoder::heads::{exophoric_distribution, label_distribution, selection_scores, softmax};
use pzero_core::encoder::{embed_aspzero, embed_pzero, ModelConfig, Params, Real};
use pzero_core::eval::{paired_permutation_test, slot_accuracy};
use pzero_core::grid::{run_grid, GridData, GridSettings};
use pzero_core::synthetic::{entity_corpus, vocabulary, zar_instances, SyntheticConfig};
use pzero_core::training::finetune::{examples_for, finetune, predict, prepare_for_finetuning, FinetuneConfig, FinetuneModel};
use pzero_core::training::loss::kl_loss;
use pzero_core::training::objective::{batch_loss, Example};
use pzero_core::training::optim::{Schedule, ScheduleKind};
use pzero_core::training::pretrain::{pretrain, PretrainConfig, PretrainData};
use pzero_core::vocab::{self, Vocabulary};
use pzero_core::zar::{build_aspzero_input, gold_distribution_zar, CaseLabel};

use common::*;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn noisy<F: Real>(cfg: ModelConfig, seed: u64, std: f64) -> Params<F> {
    let mut p = Params::<f64>::init(cfg, seed);
    let mut r = rng(seed ^ 0xA5A5);
    let noise = Normal::new(0.0, std).unwrap();
    for (_, t) in p.tensors_mut() {
        t.mapv_inplace(|v| v + noise.sample(&mut r));
    }
    p.cast()
}

fn datagen_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let (mut docs_checked, mut instances, mut mismatched) = (0, 0, Vec::new());
    for d in 0..200 {
        let doc = random_document(&mut r, &format!("doc{d}"), 5, 30);
        let v = Vocabulary::build(std::slice::from_ref(&doc), 1).unwrap();
        let (n, max_len) = if d % 2 == 0 { (4, 128) } else { (r.random_range(1..=4), r.random_range(6..=36)) };
        let ours: BTreeSet<RefInstance> = emit_pzero_instances(&doc, n, max_len, &v)
            .unwrap()
            .into_iter()
            .map(|i| (i.doc_id, i.token_ids, i.mask_index, i.answer_positions))
            .collect();
        instances += ours.len();
        if ours != reference_pzero(&doc, n, max_len, &v) {
            mismatched.push(d);
        }
        docs_checked += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mismatched.is_empty() && secs < 10.0 && instances > 0,
        format!("{docs_checked} documents, {instances} instances, mismatches {mismatched:?}, {secs:.2}s"),
    )
}

fn np_oracle() -> Outcome {
    let mut r = rng(2);
    let mut bad = 0;
    let mut with_np = 0;
    for _ in 0..500 {
        let ph = random_phrase(&mut r, 6);
        let ours = noun_phrase_range(&ph.words).map(|(a, b)| (a, b - 1));
        let reference = reference_np(&ph.words);
        with_np += reference.is_some() as usize;
        let s = ParsedSentence { phrases: vec![ph] };
        let spans: Vec<_> = extract_noun_phrases(&s, 0)
            .into_iter()
            .map(|n| (n.sentence_index, n.word_start, n.word_end, n.surface_key))
            .collect();
        if ours != reference || spans != reference_sentence_nps(&s, 0) {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("500 phrases ({with_np} with a noun phrase), {bad} disagreements"))
}

/// Largest relative error between analytic gradients and five-point central
/// differences on sampled entries of every tensor.
fn max_gradient_error(params: &Params<f64>, batch: &[Example], per_tensor: usize, r: &mut ChaCha8Rng) -> (f64, String) {
    let mut analytic = Params::zeros(params.config);
    batch_loss(params, batch, Some(&mut analytic)).unwrap();
    let eps = 1e-3;
    let mut worst = (0.0, String::new());
    let count = params.tensors().len();
    let mut probe = params.clone();
    for ti in 0..count {
        let size = params.tensors()[ti].1.len();
        for idx in sample(r, size, per_tensor.min(size)).iter() {
            let original = *params.tensors()[ti].1.iter().nth(idx).unwrap();
            let mut at = |v: f64| {
                *probe.tensors_mut()[ti].1.iter_mut().nth(idx).unwrap() = v;
                batch_loss(&probe, batch, None).unwrap().loss
            };
            let numeric = (8.0 * (at(original + eps) - at(original - eps)) - (at(original + 2.0 * eps) - at(original - 2.0 * eps))) / (12.0 * eps);
            at(original);
            let a = *analytic.tensors()[ti].1.iter().nth(idx).unwrap();
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            if err > worst.0 {
                worst = (err, format!("{}[{idx}]", params.tensors()[ti].0));
            }
        }
    }
    worst
}

fn gradient_fidelity() -> Outcome {
    let cfg = ModelConfig {
        vocab_size: 40,
        dim: 16,
        max_len: 32,
        layers: 2,
        heads: 2,
        ff_dim: 32,
    };
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let mut r = rng(300 + seed);
        let params: Params<f64> = noisy(cfg, seed, 0.2);
        for model in [FinetuneModel::As, FinetuneModel::AsPzero] {
            let batch: Vec<Example> = loop {
                let inst = random_zar_instance(&mut r, 24, 40);
                let ex = examples_for(model, &inst, cfg.max_len).unwrap();
                if !ex.is_empty() {
                    break ex;
                }
            };
            let (err, _) = max_gradient_error(&params, &batch, 12, &mut r);
            worst = worst.max(err);
        }
    }
    outcome(worst < 1e-4, format!("max relative error {worst:.2e} over 5 seeds x 2 models"))
}

fn normalization() -> Outcome {
    let cfg = ModelConfig {
        vocab_size: 30,
        dim: 8,
        max_len: 32,
        layers: 1,
        heads: 2,
        ff_dim: 8,
    };
    let p64: Params<f64> = noisy(cfg, 4, 0.5);
    let p32: Params<f32> = p64.cast();
    let mut r = rng(4);
    let normal = Normal::new(0.0, 2.0).unwrap();
    let (mut worst64, mut worst32, mut worst_gold) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let t = r.random_range(3..=24);
        let mut tokens: Vec<u32> = (0..t).map(|_| r.random_range(0..30)).collect();
        tokens[0] = vocab::CLS;
        let mask = r.random_range(2..=t);
        tokens[mask - 1] = vocab::MASK;
        let h64 = ndarray::Array2::from_shape_fn((t, 8), |_| normal.sample(&mut r));
        let h32 = h64.mapv(|v| v as f32);
        let label = CaseLabel::ALL[r.random_range(0..3)];

        let mut sums64 = vec![
            label_distribution(&p64, h64.view(), label, &tokens).sum(),
            exophoric_distribution(&p64, h64.row(0), label).sum(),
            softmax(selection_scores(&p64, h64.view(), mask, &tokens).view()).sum(),
        ];
        let sums32 = [
            label_distribution(&p32, h32.view(), label, &tokens).sum(),
            exophoric_distribution(&p32, h32.row(0), label).sum(),
            softmax(selection_scores(&p32, h32.view(), mask, &tokens).view()).sum(),
        ];

        let candidates: Vec<usize> = (2..=t).filter(|&q| !vocab::is_unselectable(tokens[q - 1]) && tokens[q - 1] != vocab::CLS).collect();
        if !candidates.is_empty() {
            let k = r.random_range(1..=candidates.len());
            let answers: Vec<usize> = sample(&mut r, candidates.len(), k).iter().map(|i| candidates[i]).collect();
            let mut sorted = answers.clone();
            sorted.sort_unstable();
            let g = gold_distribution(&sorted, t).unwrap();
            worst_gold = worst_gold.max((g.probs.iter().sum::<f64>() - 1.0).abs());
            let s = selection_scores(&p64, h64.view(), mask, &tokens);
            let (_, grad) = kl_loss(&g, s.view()).unwrap();
            // softmax(s) = grad + y, so this re-checks the loss's own distribution.
            sums64.push(grad.iter().zip(&g.probs).map(|(d, y)| d + y).sum());
            let inst = random_zar_instance(&mut r, 8, 30);
            for slot in &inst.slots {
                let z = gold_distribution_zar(slot, 8).unwrap();
                worst_gold = worst_gold.max((z.selection.probs.iter().sum::<f64>() - 1.0).abs());
            }
        }
        for s in sums64 {
            worst64 = worst64.max((s - 1.0).abs());
        }
        for s in sums32 {
            worst32 = worst32.max((s as f64 - 1.0).abs());
        }
    }
    outcome(
        worst64 < 1e-12 && worst32 < 1e-6 && worst_gold < 1e-9,
        format!("1000 inputs; max |sum-1|: double {worst64:.1e}, single {worst32:.1e}, gold {worst_gold:.1e}"),
    )
}

fn structural_equalities() -> Outcome {
    let cfg = ModelConfig {
        vocab_size: 40,
        dim: 8,
        max_len: 64,
        layers: 1,
        heads: 2,
        ff_dim: 8,
    };
    let p: Params<f64> = noisy(cfg, 5, 0.5);
    let mut r = rng(5);
    let mut failures = Vec::new();
    for i in 0..1000 {
        let t = r.random_range(6..=40);
        let inst = random_zar_instance(&mut r, t, 40);
        let label = CaseLabel::ALL[i % 3];
        let pred = inst.p_end - inst.p_start + 1;
        let q = build_aspzero_input(&inst, label, 64).unwrap();
        let shape_ok = q.tokens.len() == t + 2 + pred
            && q.mask_index == t + 1
            && q.tokens[t] == vocab::MASK
            && q.tokens[t + 1] == label.token()
            && q.tokens[t + 2..] == inst.token_ids[inst.p_start - 1..inst.p_end];

        let with = embed_aspzero(&p, &q.tokens, q.context_len, q.p_start, q.p_end).unwrap();
        let plain = embed_pzero(&p, &q.tokens).unwrap();
        let mut rows_ok = true;
        for row in 0..q.tokens.len() {
            let pos = row + 1;
            let expected = if pos >= t + 3 {
                let src = pos - (t + 3) + q.p_start;
                &plain.row(row) + &p.position_embedding.row(src - 1)
            } else {
                plain.row(row).to_owned()
            };
            rows_ok &= with.row(row) == expected;
        }

        // Trimming keeps [CLS] first and the length at the cap.
        let cap = r.random_range(t.min(12)..=t + 2 + pred);
        let trim_ok = match build_aspzero_input(&inst, label, cap) {
            Ok(tq) => tq.tokens.len() == cap.min(t + 2 + pred) && tq.tokens[0] == vocab::CLS,
            Err(_) => inst.p_start < (t + 2 + pred - cap) + 2,
        };
        if !(shape_ok && rows_ok && trim_ok) {
            failures.push((i, shape_ok, rows_ok, trim_ok));
        }
    }
    outcome(failures.is_empty(), format!("1000 instances, failures {:?}", &failures[..failures.len().min(5)]))
}

fn synthetic_grid() -> Outcome {
    let start = Instant::now();
    let sc = SyntheticConfig::default();
    let vocab = vocabulary(&sc).unwrap();
    let docs = entity_corpus(&sc, 2000, 1).unwrap();
    let max_len = 64;
    let data = GridData {
        pzero: docs.iter().flat_map(|d| emit_pzero_instances(d, 4, max_len, &vocab).unwrap()).collect(),
        cloze: emit_cloze_instances(&docs, 4, max_len, &vocab, 0.15, 1).unwrap(),
        mask_rate: 0.15,
        train: zar_instances(&sc, &vocab, 100, 2).unwrap(),
        dev: zar_instances(&sc, &vocab, 100, 3).unwrap(),
        test: zar_instances(&sc, &vocab, 300, 4).unwrap(),
    };
    let model = ModelConfig {
        vocab_size: vocab.len(),
        dim: 64,
        max_len,
        layers: 2,
        heads: 2,
        ff_dim: 128,
    };
    let seeds = [1u64, 2, 3];
    let mut acc: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    let mut weakest = f64::INFINITY;
    for &seed in &seeds {
        let settings = GridSettings {
            model,
            pretrain: PretrainConfig {
                batch_size: 32,
                updates: 2000,
                eval_interval: 500,
                schedule: Schedule {
                    max_lr: 1e-3,
                    warmup_steps: 100,
                    kind: ScheduleKind::InverseSqrt,
                },
                seed,
            },
            finetune: FinetuneConfig {
                batch_size: 16,
                max_epochs: 200,
                patience: 20,
                schedule: Schedule {
                    max_lr: 1e-3,
                    warmup_steps: 50,
                    kind: ScheduleKind::FinetuneDefault,
                },
                seed,
            },
            seed,
        };
        for cell in run_grid(&data, &settings, &[]).unwrap() {
            weakest = weakest.min(cell.slot_accuracy / cell.random_baseline);
            println!(
                "    seed {seed} ({}) {:<6} {:<8} slot accuracy {:.3}, random {:.4}",
                cell.id,
                cell.pretraining.to_string(),
                format!("{:?}", cell.model),
                cell.slot_accuracy,
                cell.random_baseline
            );
            acc.entry(cell.id.clone()).or_default().push(cell.slot_accuracy);
        }
    }
    let mean = |id: &str| acc[id].iter().sum::<f64>() / acc[id].len() as f64;
    let means: Vec<String> = acc.keys().map(|id| format!("{id} {:.3}", mean(id))).collect();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mean("k") > mean("g") && weakest >= 5.0 && secs < 1800.0,
        format!(
            "means [{}]; k {:.3} vs g {:.3}; weakest cell {:.1}x random; {:.0}s",
            means.join(", "),
            mean("k"),
            mean("g"),
            weakest,
            secs
        ),
    )
}

fn overfit() -> Outcome {
    let cfg = ModelConfig {
        vocab_size: 40,
        dim: 32,
        max_len: 32,
        layers: 2,
        heads: 2,
        ff_dim: 64,
    };
    let inst = PzeroInstance {
        doc_id: "one".into(),
        token_ids: vec![vocab::CLS, 10, 11, 12, vocab::SEP, 13, 10, 14, vocab::SEP, vocab::MASK, 15, vocab::SEP],
        mask_index: 10,
        answer_positions: vec![2, 7],
    };
    let mut params = Params::<f32>::init(cfg, 7);
    let log = pretrain(
        &mut params,
        &PretrainData::Pzero(vec![inst]),
        &PretrainConfig {
            batch_size: 1,
            updates: 500,
            eval_interval: 1,
            schedule: Schedule {
                max_lr: 1e-2,
                warmup_steps: 10,
                kind: ScheduleKind::InverseSqrt,
            },
            seed: 7,
        },
    )
    .unwrap();
    let reached = log.iter().find(|m| m.loss < 1e-3).map(|m| m.step);

    let mut r = rng(8);
    let train: Vec<_> = (0..8).map(|_| random_zar_instance(&mut r, 16, 40)).collect();
    let mut accs = Vec::new();
    for model in [FinetuneModel::As, FinetuneModel::AsPzero] {
        let mut p = Params::<f32>::init(cfg, 9);
        prepare_for_finetuning(&mut p, 9);
        let out = finetune(
            model,
            p,
            &train,
            &[],
            &FinetuneConfig {
                batch_size: 4,
                max_epochs: 200,
                patience: 200,
                schedule: Schedule {
                    max_lr: 3e-3,
                    warmup_steps: 10,
                    kind: ScheduleKind::FinetuneDefault,
                },
                seed: 9,
            },
        )
        .unwrap();
        let preds = predict(model, &out.params, &train).unwrap();
        accs.push(slot_accuracy(&preds, &train).unwrap());
    }
    outcome(
        reached.is_some() && accs.iter().all(|&a| a == 1.0),
        format!(
            "PZero loss < 1e-3 at step {}; 8-instance accuracy AS {:.3}, AS-PZero {:.3}",
            reached.map_or("never".to_string(), |s| s.to_string()),
            accs[0],
            accs[1]
        ),
    )
}

fn permutation_calibration() -> Outcome {
    let mut r = rng(9);
    let trials = 1000;
    let n = 20_000;
    let mut ps: Vec<f64> = (0..trials)
        .map(|i| {
            let rate = 0.6;
            let a: Vec<bool> = (0..n).map(|_| r.random_bool(rate)).collect();
            let b: Vec<bool> = (0..n).map(|_| r.random_bool(rate)).collect();
            paired_permutation_test(&a, &b, 999, 10_000 + i as u64).unwrap()
        })
        .collect();
    ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = ps.len() as f64;
    let d = ps
        .iter()
        .enumerate()
        .map(|(i, &p)| (p - i as f64 / m).abs().max(((i + 1) as f64 / m - p).abs()))
        .fold(0.0, f64::max);
    let critical = 1.358 / m.sqrt();
    outcome(d < critical, format!("KS statistic {d:.4} vs 5% critical value {critical:.4} over {trials} null trials"))
}

fn run(bin: &str, dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin).current_dir(dir).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_pzero");
    let small = ["--set", "D=16", "--set", "ff_dim=32", "--set", "T_max=48", "--seed", "5"];
    let steps: Vec<Vec<&str>> = vec![
        vec!["gen-synthetic", "--out-dir", "syn", "--docs", "60", "--train", "12", "--dev", "6", "--test", "12"],
        vec!["gen-pzero", "--corpus", "syn/corpus.jsonl", "--vocab", "syn/vocab.tsv", "--out", "pz.jsonl", "--cloze-out", "cl.jsonl", "--stats", "stats.json"],
        vec!["pretrain", "--task", "pzero", "--instances", "pz.jsonl", "--vocab", "syn/vocab.tsv", "--out", "pz.ckpt", "--metrics", "pz.metrics.jsonl", "--set", "updates=30", "--set", "eval_interval=10"],
        vec!["pretrain", "--task", "cloze", "--instances", "cl.jsonl", "--vocab", "syn/vocab.tsv", "--out", "cl.ckpt", "--set", "updates=10"],
        vec!["finetune", "--model", "as-pzero", "--train", "syn/train.jsonl", "--dev", "syn/dev.jsonl", "--init", "pz.ckpt", "--out", "k.ckpt", "--metrics", "k.metrics.jsonl", "--set", "max_epochs=3", "--set", "batch_size=4"],
        vec!["predict", "--checkpoint", "k.ckpt", "--instances", "syn/test.jsonl", "--out", "k.pred.jsonl"],
        vec!["evaluate", "--instances", "syn/test.jsonl", "--predictions", "k.pred.jsonl", "--compare", "k.pred.jsonl", "--permutations", "99", "--out", "k.report.json"],
    ];
    let mut dirs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        for s in &steps {
            let mut args = s.clone();
            args.extend_from_slice(&small);
            if let Err(e) = run(bin, dir.path(), &args) {
                return outcome(false, e);
            }
        }
        dirs.push(dir);
    }
    let files = [
        "pz.jsonl",
        "pz.jsonl.meta.json",
        "cl.jsonl",
        "stats.json",
        "pz.ckpt",
        "pz.metrics.jsonl",
        "cl.ckpt",
        "k.ckpt",
        "k.metrics.jsonl",
        "k.pred.jsonl",
        "k.report.json",
    ];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| std::fs::read(dirs[0].path().join(f)).ok() != std::fs::read(dirs[1].path().join(f)).ok())
        .collect();
    outcome(
        differing.is_empty(),
        format!("{} artifacts from gen-pzero, pretrain, finetune, predict, evaluate; differing {differing:?}", files.len()),
    )
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("datagen brute-force oracle", datagen_oracle),
        ("noun phrase reference", np_oracle),
        ("gradient fidelity", gradient_fidelity),
        ("normalization", normalization),
        ("structural equalities", structural_equalities),
        ("synthetic direction of effect", synthetic_grid),
        ("overfit smoke tests", overfit),
        ("permutation test calibration", permutation_calibration),
        ("determinism", determinism),
    ];
    let only: Vec<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        println!(
            "criterion {id} [{}] {name}: {} ({:.1}s)",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.passed {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
