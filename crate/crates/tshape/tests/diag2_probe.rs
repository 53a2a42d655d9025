//! Second diagnostics pass: BN train/eval gap, lr sensitivity, context
//! contamination. cargo test -p tshape --test diag2_probe -- --ignored --nocapture

use tshape::data::{synth_generate, zscore_normalize, AnomalyKind, SynthConfig};
use tshape::metrics::{best_f1_sweep, score_series, MetricKind};
use tshape::model::{forward, Mode, ModelConfig};
use tshape::tensor::Tape;
use tshape::training::{train, TrainConfig};

fn window_mse(
    params: &tshape::model::TShapeParams,
    cfg: &ModelConfig,
    window: &[f64],
    mode: Mode,
) -> f64 {
    let mut tape = Tape::new();
    let wid = tape
        .leaf_from(vec![window.len()], window.to_vec(), false)
        .unwrap();
    let pass = forward(&mut tape, wid, params, cfg, mode).unwrap();
    let recon = tape.data(pass.reconstruction);
    window
        .iter()
        .zip(recon)
        .map(|(x, r)| (x - r) * (x - r))
        .sum::<f64>()
        / window.len() as f64
}

#[test]
#[ignore]
fn probes() {
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
    let model_cfg = ModelConfig::default();

    for lr in [1e-3, 3e-4] {
        let train_cfg = TrainConfig {
            epochs: 120,
            early_stop_patience: 120,
            lr,
            seed,
            ..TrainConfig::default()
        };
        let outcome = train(&series, &model_cfg, &train_cfg).unwrap();
        let tail: Vec<f64> = outcome.history.iter().rev().take(10).map(|s| s.val_loss).collect();
        println!(
            "lr {lr}: best val {:.5} at {}, last-10 val range [{:.4}, {:.4}]",
            outcome.best_val_loss,
            outcome.best_epoch,
            tail.iter().cloned().fold(f64::INFINITY, f64::min),
            tail.iter().cloned().fold(0.0f64, f64::max),
        );

        // BN train/eval gap on held-out windows
        let (normalized, _) = zscore_normalize(&series).unwrap();
        let split = series.split_index;
        let mut train_mode_mse = 0.0;
        let mut eval_mode_mse = 0.0;
        let mut count = 0;
        for end in (split - 1280..split).step_by(97) {
            let window = &normalized.values[end + 1 - 256..end + 1];
            train_mode_mse += window_mse(&outcome.params, &model_cfg, window, Mode::Train);
            eval_mode_mse += window_mse(&outcome.params, &model_cfg, window, Mode::Eval);
            count += 1;
        }
        println!(
            "  bn gap on {count} val windows: train-mode {:.5}, eval-mode {:.5}",
            train_mode_mse / count as f64,
            eval_mode_mse / count as f64
        );

        let scored = score_series(&outcome.params, &model_cfg, &series).unwrap();
        let labels = series.test_labels();
        let event = best_f1_sweep(&scored.scores, labels, MetricKind::Event).unwrap();
        println!(
            "  event F1 {:.4} (p={:.3} r={:.3})",
            event.best_f1, event.precision, event.recall
        );

        // clean scores split by whether the window context holds an anomaly
        let mut contaminated = Vec::new();
        let mut pristine = Vec::new();
        for (i, (&s, &l)) in scored.scores.iter().zip(labels).enumerate() {
            if l == 1 {
                continue;
            }
            let t = split + i;
            let w_start = t.saturating_sub(255);
            let any_anom = (w_start..t).any(|u| u >= split && series.labels[u] == 1);
            if any_anom {
                contaminated.push(s);
            } else {
                pristine.push(s);
            }
        }
        let q = |v: &mut Vec<f64>, f: f64| -> f64 {
            v.sort_by(f64::total_cmp);
            v[((v.len() - 1) as f64 * f) as usize]
        };
        println!(
            "  clean scores with anomaly in context: n={}, p99 {:.4}, max {:.4}",
            contaminated.len(),
            q(&mut contaminated, 0.99),
            q(&mut contaminated, 1.0),
        );
        println!(
            "  clean scores pristine context:        n={}, p99 {:.4}, max {:.4}",
            pristine.len(),
            q(&mut pristine, 0.99),
            q(&mut pristine, 1.0),
        );
    }
}
