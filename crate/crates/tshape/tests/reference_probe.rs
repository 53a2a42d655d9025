//! Exploratory reference run for the synthetic detection target.
//! Run with: cargo test -p tshape --test reference_probe -- --ignored --nocapture

use std::time::Instant;
use tshape::baselines::{ar_fit, ar_score};
use tshape::data::{synth_generate, zscore_normalize, AnomalyKind, SynthConfig};
use tshape::metrics::{best_f1_sweep, score_series, MetricKind};
use tshape::model::ModelConfig;
use tshape::training::{train, TrainConfig};

#[test]
#[ignore]
fn reference_run() {
    let seed = 0u64;
    let synth = SynthConfig {
        period_len: 64,
        n_periods: 200,
        anomaly_count: 16,
        anomaly_kinds: vec![AnomalyKind::ShapeConvexity, AnomalyKind::AmpRatio],
        seed,
        ..SynthConfig::default()
    };
    let series = synth_generate(&synth).unwrap();
    println!("series: {} points, split {}", series.len(), series.split_index);

    let model_cfg = ModelConfig::default();
    let train_cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };

    let t0 = Instant::now();
    let outcome = train(&series, &model_cfg, &train_cfg).unwrap();
    println!(
        "train: {:.1}s, {} epochs, best val {:.6} at {}",
        t0.elapsed().as_secs_f64(),
        outcome.history.len(),
        outcome.best_val_loss,
        outcome.best_epoch
    );

    let t1 = Instant::now();
    let scored = score_series(&outcome.params, &model_cfg, &series).unwrap();
    println!("score: {:.1}s", t1.elapsed().as_secs_f64());

    let labels = series.test_labels();
    let tshape_event = best_f1_sweep(&scored.scores, labels, MetricKind::Event).unwrap();
    let tshape_point = best_f1_sweep(&scored.scores, labels, MetricKind::Point).unwrap();
    println!(
        "tshape: event F1 {:.4} (p={:.3} r={:.3}), point F1 {:.4}",
        tshape_event.best_f1, tshape_event.precision, tshape_event.recall, tshape_point.best_f1
    );

    // diagnostic: scores on anomalous vs clean points
    let mut clean: Vec<f64> = scored
        .scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == 0)
        .map(|(s, _)| *s)
        .collect();
    clean.sort_by(f64::total_cmp);
    let anom_max: Vec<f64> = {
        let mut v: Vec<f64> = scored
            .scores
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == 1)
            .map(|(s, _)| *s)
            .collect();
        v.sort_by(f64::total_cmp);
        v
    };
    println!(
        "clean scores: median {:.3e}, p99 {:.3e}, max {:.3e}",
        clean[clean.len() / 2],
        clean[clean.len() * 99 / 100],
        clean[clean.len() - 1]
    );
    println!(
        "anomalous scores: median {:.3e}, max {:.3e}",
        anom_max[anom_max.len() / 2],
        anom_max[anom_max.len() - 1]
    );

    // AR baseline
    let (normalized, _) = zscore_normalize(&series).unwrap();
    let ar = ar_fit(&normalized.values[..series.split_index], 16).unwrap();
    let ar_scored = ar_score(&normalized.values, series.split_index, &ar);
    let ar_event = best_f1_sweep(&ar_scored.scores, labels, MetricKind::Event).unwrap();
    println!(
        "ar: event F1 {:.4} (p={:.3} r={:.3})",
        ar_event.best_f1, ar_event.precision, ar_event.recall
    );
}
