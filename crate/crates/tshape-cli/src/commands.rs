//! Implementations of the five subcommands.

use crate::config::{parse_list, ConfigDoc};
use crate::manifest::Manifest;
use crate::{svg, EvalArgs, ExportAttnArgs, ModelFlags, ScoreArgs, SynthArgs, TrainArgs};
use anyhow::{Context, Result};
use std::fmt::Write as _;
use std::path::Path;
use tshape::baselines::{ar_fit, ar_score, subseq_index, subseq_score};
use tshape::data::{load_csv, write_csv, zscore_normalize, AnomalyKind, SynthConfig, TimeSeries};
use tshape::metrics::{score_series, EvalReport, ScoreSeries};
use tshape::model::{forward, Ablation, Mode, ModelConfig};
use tshape::tensor::{Tape, Tensor};
use tshape::training::{load_checkpoint, save_checkpoint, train as run_training, TrainConfig};

/// Command-level misuse (bad flag combinations, out-of-range indices).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn load_series(path: &Path, split_override: Option<usize>) -> Result<TimeSeries> {
    let mut series = load_csv(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(split) = split_override {
        if split > series.len() {
            return Err(UsageError(format!(
                "--split-index {split} exceeds series length {}",
                series.len()
            ))
            .into());
        }
        series.split_index = split;
    }
    Ok(series)
}

// ── synth ───────────────────────────────────────────────────────────────

pub fn synth(args: SynthArgs) -> Result<()> {
    let mut doc = ConfigDoc::load(args.config.as_deref())?;
    let defaults = SynthConfig::default();
    let kinds = match args.kinds.as_deref() {
        Some(raw) => parse_list::<AnomalyKind>(raw)?,
        None => match doc.take::<String>("anomaly_kinds")? {
            Some(raw) => parse_list::<AnomalyKind>(&raw)?,
            None => defaults.anomaly_kinds.clone(),
        },
    };
    let config = SynthConfig {
        period_len: pick(args.period_len, doc.take("period_len")?, defaults.period_len),
        n_periods: pick(args.periods, doc.take("n_periods")?, defaults.n_periods),
        peak1_amp: pick(args.peak1, doc.take("peak1_amp")?, defaults.peak1_amp),
        peak2_amp: pick(args.peak2, doc.take("peak2_amp")?, defaults.peak2_amp),
        noise_sigma: pick(args.noise, doc.take("noise_sigma")?, defaults.noise_sigma),
        anomaly_count: pick(args.anomalies, doc.take("anomaly_count")?, defaults.anomaly_count),
        anomaly_kinds: kinds,
        seed: pick(args.seed, doc.take("seed")?, defaults.seed),
    };
    doc.finish()?;

    let series = tshape::data::synth_generate(&config)?;
    write_csv(&series, &args.output)?;

    let mut manifest = Manifest::new("synth");
    manifest.record("seed", config.seed);
    manifest.record("output.series", args.output.display());
    manifest.record("config.period_len", config.period_len);
    manifest.record("config.n_periods", config.n_periods);
    manifest.record("config.peak1_amp", config.peak1_amp);
    manifest.record("config.peak2_amp", config.peak2_amp);
    manifest.record("config.noise_sigma", config.noise_sigma);
    manifest.record("config.anomaly_count", config.anomaly_count);
    manifest.record(
        "config.anomaly_kinds",
        config
            .anomaly_kinds
            .iter()
            .map(|k| k.as_str())
            .collect::<Vec<_>>()
            .join(","),
    );
    manifest.artifact(&args.output);
    manifest.write(&args.output)?;
    println!(
        "wrote {} ({} points, split {})",
        args.output.display(),
        series.len(),
        series.split_index
    );
    Ok(())
}

fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

// ── train ───────────────────────────────────────────────────────────────

fn resolve_model_config(flags: &ModelFlags, doc: &mut ConfigDoc) -> Result<ModelConfig> {
    let defaults = ModelConfig::default();
    let kernel_sizes = match flags.kernels.as_deref() {
        Some(raw) => parse_list::<usize>(raw)?,
        None => match doc.take::<String>("kernel_sizes")? {
            Some(raw) => parse_list::<usize>(&raw)?,
            None => defaults.kernel_sizes.clone(),
        },
    };
    let ablation = match flags.ablation.as_deref() {
        Some(raw) => raw.parse::<Ablation>().map_err(UsageError)?,
        None => match doc.take::<String>("ablation")? {
            Some(raw) => raw.parse::<Ablation>().map_err(UsageError)?,
            None => defaults.ablation,
        },
    };
    let config = ModelConfig {
        window_t: pick(flags.window, doc.take("window_t")?, defaults.window_t),
        patch_s: pick(flags.patch, doc.take("patch_s")?, defaults.patch_s),
        kernel_sizes,
        channels_per_scale: pick(
            flags.channels,
            doc.take("channels_per_scale")?,
            defaults.channels_per_scale,
        ),
        heads_local: pick(flags.heads_local, doc.take("heads_local")?, defaults.heads_local),
        heads_global: pick(
            flags.heads_global,
            doc.take("heads_global")?,
            defaults.heads_global,
        ),
        ablation,
    };
    config.validate()?;
    Ok(config)
}

pub fn train(args: TrainArgs) -> Result<()> {
    let mut doc = ConfigDoc::load(args.config.as_deref())?;
    let model_config = resolve_model_config(&args.model, &mut doc)?;
    let defaults = TrainConfig::default();
    let train_config = TrainConfig {
        epochs: pick(args.epochs, doc.take("epochs")?, defaults.epochs),
        batch_size: pick(args.batch_size, doc.take("batch_size")?, defaults.batch_size),
        lr: pick(args.lr, doc.take("lr")?, defaults.lr),
        stride: args.stride.or(doc.take("stride")?),
        early_stop_patience: pick(
            args.patience,
            doc.take("early_stop_patience")?,
            defaults.early_stop_patience,
        ),
        validation_fraction: pick(
            args.val_fraction,
            doc.take("validation_fraction")?,
            defaults.validation_fraction,
        ),
        seed: pick(args.seed, doc.take("seed")?, defaults.seed),
    };
    let split_override = args.split_index.or(doc.take("split_index")?);
    doc.finish()?;

    let series = load_series(&args.input, split_override)?;
    let outcome = run_training(&series, &model_config, &train_config)?;
    save_checkpoint(&outcome.params, &model_config, &args.output)?;
    let history_path = args
        .loss_history
        .unwrap_or_else(|| args.output.with_extension("history.csv"));
    std::fs::write(&history_path, outcome.history_csv())?;

    let mut manifest = Manifest::new("train");
    manifest.record("seed", train_config.seed);
    manifest.record("input.series", args.input.display());
    manifest.record("output.checkpoint", args.output.display());
    manifest.record("output.history", history_path.display());
    manifest.record("config.window_t", model_config.window_t);
    manifest.record("config.patch_s", model_config.patch_s);
    manifest.record(
        "config.kernel_sizes",
        model_config
            .kernel_sizes
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    manifest.record("config.channels_per_scale", model_config.channels_per_scale);
    manifest.record("config.heads_local", model_config.heads_local);
    manifest.record("config.heads_global", model_config.heads_global);
    manifest.record("config.ablation", model_config.ablation);
    manifest.record("config.epochs", train_config.epochs);
    manifest.record("config.batch_size", train_config.batch_size);
    manifest.record("config.lr", train_config.lr);
    manifest.record(
        "config.stride",
        train_config.effective_stride(&model_config),
    );
    manifest.record("config.early_stop_patience", train_config.early_stop_patience);
    manifest.record("config.validation_fraction", train_config.validation_fraction);
    manifest.record("result.epochs_run", outcome.history.len());
    manifest.record("result.best_epoch", outcome.best_epoch);
    manifest.record("result.best_val_loss", outcome.best_val_loss);
    manifest.record("result.stopped_early", outcome.stopped_early);
    manifest.artifact(&args.output);
    manifest.artifact(&history_path);
    manifest.write(&args.output)?;
    println!(
        "trained {} epochs (best validation {:.6} at epoch {}); checkpoint {}",
        outcome.history.len(),
        outcome.best_val_loss,
        outcome.best_epoch,
        args.output.display()
    );
    Ok(())
}

// ── score ───────────────────────────────────────────────────────────────

pub fn score(args: ScoreArgs) -> Result<()> {
    let mut doc = ConfigDoc::load(args.config.as_deref())?;
    let split_override = args.split_index.or(doc.take("split_index")?);
    doc.finish()?;
    let (params, model_config) = load_checkpoint(&args.checkpoint)?;
    let series = load_series(&args.input, split_override)?;
    let scored = score_series(&params, &model_config, &series)?;
    std::fs::write(&args.output, scored.to_csv())?;

    let mut manifest = Manifest::new("score");
    manifest.record("input.series", args.input.display());
    manifest.record("input.checkpoint", args.checkpoint.display());
    manifest.record("output.scores", args.output.display());
    manifest.record("result.points", scored.scores.len());
    manifest.record("result.start_index", scored.start_index);
    manifest.artifact(&args.output);
    manifest.write(&args.output)?;
    println!(
        "scored {} test points from index {}",
        scored.scores.len(),
        scored.start_index
    );
    Ok(())
}

// ── eval ────────────────────────────────────────────────────────────────

fn read_scores_csv(path: &Path) -> Result<ScoreSeries> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("index,score") => {}
        other => {
            return Err(UsageError(format!(
                "{}: expected `index,score` header, found {:?}",
                path.display(),
                other.unwrap_or("<empty>")
            ))
            .into())
        }
    }
    let mut start_index = None;
    let mut scores = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (i, s) = line
            .split_once(',')
            .ok_or_else(|| UsageError(format!("{}:{}: bad row", path.display(), idx + 2)))?;
        let i: usize = i
            .trim()
            .parse()
            .map_err(|e| UsageError(format!("{}:{}: bad index: {e}", path.display(), idx + 2)))?;
        let s: f64 = s
            .trim()
            .parse()
            .map_err(|e| UsageError(format!("{}:{}: bad score: {e}", path.display(), idx + 2)))?;
        if start_index.is_none() {
            start_index = Some(i);
        }
        scores.push(s);
    }
    Ok(ScoreSeries {
        scores,
        start_index: start_index.unwrap_or(0),
        valid_from: 0,
    })
}

fn report_section(out: &mut String, prefix: &str, report: &EvalReport) {
    for line in report.to_document().lines() {
        let _ = writeln!(out, "{prefix}{line}");
    }
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let mut doc = ConfigDoc::load(args.config.as_deref())?;
    let split_override = args.split_index.or(doc.take("split_index")?);
    let ar_order = pick(args.ar_order, doc.take("ar_order")?, 16);
    let subseq_len = pick(args.subseq_len, doc.take("subseq_len")?, 32);
    doc.finish()?;

    let series = load_series(&args.series, split_override)?;
    let scored = read_scores_csv(&args.scores)?;
    let labels = series.test_labels();
    if scored.scores.len() != labels.len() {
        return Err(UsageError(format!(
            "score series has {} rows but the test region has {} points",
            scored.scores.len(),
            labels.len()
        ))
        .into());
    }
    let report = EvalReport::evaluate(&scored.scores, labels)?;
    let mut out = String::new();
    report_section(&mut out, "", &report);

    let baseline_name = match args.baseline.as_deref() {
        None => None,
        Some("ar") => {
            let (normalized, _) = zscore_normalize(&series)?;
            let params = ar_fit(&normalized.values[..series.split_index], ar_order)?;
            let base_scores = ar_score(&normalized.values, series.split_index, &params);
            let base_report = EvalReport::evaluate(&base_scores.scores, labels)?;
            report_section(&mut out, "baseline.ar.", &base_report);
            Some("ar")
        }
        Some("subseq") => {
            let (normalized, _) = zscore_normalize(&series)?;
            let index = subseq_index(&normalized.values[..series.split_index], subseq_len)?;
            let base_scores = subseq_score(&normalized.values, series.split_index, &index);
            let base_report = EvalReport::evaluate(&base_scores.scores, labels)?;
            report_section(&mut out, "baseline.subseq.", &base_report);
            Some("subseq")
        }
        Some(other) => {
            return Err(UsageError(format!(
                "unknown baseline `{other}` (expected ar or subseq)"
            ))
            .into())
        }
    };

    print!("{out}");
    let report_path = args.output.unwrap_or_else(|| {
        let mut p = args.scores.as_os_str().to_owned();
        p.push(".report.txt");
        p.into()
    });
    std::fs::write(&report_path, &out)?;

    let mut manifest = Manifest::new("eval");
    manifest.record("input.scores", args.scores.display());
    manifest.record("input.series", args.series.display());
    manifest.record("output.report", report_path.display());
    if let Some(name) = baseline_name {
        manifest.record("config.baseline", name);
    }
    manifest.record("result.point_best_f1", report.point.best_f1);
    manifest.record("result.event_best_f1", report.event.best_f1);
    manifest.artifact(&report_path);
    manifest.write(&report_path)?;
    Ok(())
}

// ── export-attn ─────────────────────────────────────────────────────────

fn matrix_csv(data: &[f64], rows: usize, cols: usize) -> String {
    let mut out = String::new();
    for r in 0..rows {
        let row: Vec<String> = data[r * cols..(r + 1) * cols]
            .iter()
            .map(|v| v.to_string())
            .collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Head-averaged attention matrix from per-head probability tensors.
fn head_average(heads: &[Tensor]) -> (Vec<f64>, usize, usize) {
    let (rows, cols) = heads[0].dims2();
    let mut avg = vec![0.0; rows * cols];
    for head in heads {
        for (a, v) in avg.iter_mut().zip(head.data()) {
            *a += v;
        }
    }
    let n = heads.len() as f64;
    avg.iter_mut().for_each(|v| *v /= n);
    (avg, rows, cols)
}

pub fn export_attn(args: ExportAttnArgs) -> Result<()> {
    let mut doc = ConfigDoc::load(args.config.as_deref())?;
    let split_override = args.split_index.or(doc.take("split_index")?);
    doc.finish()?;
    let (params, model_config) = load_checkpoint(&args.checkpoint)?;
    let series = load_series(&args.input, split_override)?;
    if args.index < series.split_index || args.index >= series.len() {
        return Err(UsageError(format!(
            "--index {} outside the test region [{}, {})",
            args.index,
            series.split_index,
            series.len()
        ))
        .into());
    }
    std::fs::create_dir_all(&args.output)?;

    let (normalized, _) = zscore_normalize(&series)?;
    let window =
        tshape::data::window_ending_at(&normalized.values, args.index, model_config.window_t);
    let mut tape = Tape::new();
    let wid = tape.leaf_from(vec![model_config.window_t], window, false)
        .map_err(tshape::model::ModelError::from)?;
    let pass = forward(&mut tape, wid, &params, &model_config, Mode::Eval)?;
    let trace = pass.trace(&tape);

    let mut manifest = Manifest::new("export-attn");
    manifest.record("input.series", args.input.display());
    manifest.record("input.checkpoint", args.checkpoint.display());
    manifest.record("config.index", args.index);
    let primary = args.output.join("global_attn.csv");

    if !trace.global_attn.is_empty() {
        let (avg, rows, cols) = head_average(&trace.global_attn);
        std::fs::write(&primary, matrix_csv(&avg, rows, cols))?;
        manifest.artifact(&primary);
        if args.svg {
            let path = args.output.join("global_attn.svg");
            std::fs::write(&path, svg::heatmap(&avg, rows, cols, "patch attention"))?;
            manifest.artifact(&path);
        }
    }
    if !trace.local_attn.is_empty() {
        let (avg, rows, cols) = head_average(&trace.local_attn);
        let path = args.output.join("local_attn.csv");
        std::fs::write(&path, matrix_csv(&avg, rows, cols))?;
        manifest.artifact(&path);
        if args.svg {
            let path = args.output.join("local_attn.svg");
            std::fs::write(&path, svg::heatmap(&avg, rows, cols, "channel attention"))?;
            manifest.artifact(&path);
        }
    }
    if let Some(gate) = &trace.gate {
        let (p, c) = gate.dims2();
        let mut out = String::from("patch,gate_mean\n");
        for i in 0..p {
            let mean: f64 = gate.data()[i * c..(i + 1) * c].iter().sum::<f64>() / c as f64;
            let _ = writeln!(out, "{i},{mean}");
        }
        let path = args.output.join("gate.csv");
        std::fs::write(&path, out)?;
        manifest.artifact(&path);
    }
    manifest.write(&primary)?;
    println!("exported attention for window ending at {}", args.index);
    Ok(())
}
