//! Classifier forward passes against a loop-based reference, gradients
//! against finite differences, and training behaviour on toy problems.

use girder_core::dataset::Sample;
use girder_core::models::{fit, predict_label, train, Approach, ModelConfig, Network, TrainedModel};
use girder_neural::layers::bce_loss;
use girder_neural::tape::sigmoid;
use girder_neural::{Activation, ParamId, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small(approach: Approach) -> ModelConfig {
    ModelConfig {
        approach,
        window: 8,
        layers: 3,
        filter_size: 3,
        filters: 8,
        hidden: vec![6, 5],
        seed: 11,
        ..ModelConfig::default()
    }
}

fn random_windows(rng: &mut ChaCha8Rng, count: usize, len: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..len).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

fn param(net: &Network, name: &str) -> Tensor {
    let store = net.store();
    store.value(store.id_of(name).unwrap()).clone()
}

/// Reference DOVI score written from the layer definitions with plain loops.
fn reference_dovi(net: &Network, window: &[f64]) -> f64 {
    let cfg = net.config();
    let (l, n, k, s) = (cfg.window, net.n_sensors(), cfg.filters, cfg.filter_size);
    let (mw, mb) = (param(net, "map.w"), param(net, "map.b"));
    let mut h = vec![vec![0.0; k]; l];
    for t in 0..l {
        for m in 0..k {
            let mut acc = mb.data()[m];
            for i in 0..n {
                acc += window[t * n + i] * mw.get2(i, m);
            }
            h[t][m] = acc.max(0.0);
        }
    }
    for j in 0..cfg.layers {
        let (w, b) = (param(net, &format!("temporal{j}.w")), param(net, &format!("temporal{j}.b")));
        let mut next = vec![vec![0.0; k]; l];
        for t in 0..l {
            for m in 0..k {
                let mut acc = b.data()[m];
                for q in 0..s {
                    let src = t as isize - (s - 1) as isize + q as isize;
                    if src < 0 {
                        continue;
                    }
                    for c in 0..k {
                        acc += h[src as usize][c] * w.get2(q * k + c, m);
                    }
                }
                next[t][m] = cfg.activation.eval(acc);
            }
        }
        h = next;
    }
    let (hw, hb) = (param(net, "head.w"), param(net, "head.b"));
    let z = hb.data()[0] + (0..k).map(|c| h[l - 1][c] * hw.get2(c, 0)).sum::<f64>();
    sigmoid(z)
}

/// Reference score of the fully connected models.
fn reference_dense(net: &Network, window: &[f64]) -> f64 {
    let cfg = net.config();
    let widths: Vec<usize> = if cfg.approach == Approach::Mlp {
        cfg.hidden.clone()
    } else {
        Vec::new()
    };
    let mut h = window.to_vec();
    for (j, &width) in widths.iter().enumerate() {
        let (w, b) = (param(net, &format!("dense{j}.w")), param(net, &format!("dense{j}.b")));
        h = (0..width)
            .map(|m| (b.data()[m] + h.iter().enumerate().map(|(i, x)| x * w.get2(i, m)).sum::<f64>()).max(0.0))
            .collect();
    }
    let (hw, hb) = (param(net, "head.w"), param(net, "head.b"));
    sigmoid(hb.data()[0] + h.iter().enumerate().map(|(i, x)| x * hw.get2(i, 0)).sum::<f64>())
}

#[test]
fn dovi_forward_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (layers, filter_size, act) in [(3, 3, Activation::Relu), (2, 4, Activation::Tanh), (1, 1, Activation::Relu)] {
        let cfg = ModelConfig {
            layers,
            filter_size,
            activation: act,
            ..small(Approach::Dovi)
        };
        let net = Network::new(&cfg, 4).unwrap();
        let windows = random_windows(&mut rng, 20, 32);
        let refs: Vec<&[f64]> = windows.iter().map(Vec::as_slice).collect();
        let scores = net.score_windows(&refs).unwrap();
        for (w, s) in windows.iter().zip(scores) {
            assert!((s - reference_dovi(&net, w)).abs() < 1e-12);
        }
    }
}

#[test]
fn dense_forward_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for approach in [Approach::Lr, Approach::Mlp] {
        let net = Network::new(&small(approach), 3).unwrap();
        for w in random_windows(&mut rng, 10, 24) {
            assert!((net.score(&w).unwrap() - reference_dense(&net, &w)).abs() < 1e-12);
        }
    }
}

/// Worst relative mismatch between tape gradients of the batch BCE loss
/// and central differences.
fn full_model_fd_error(cfg: &ModelConfig, n_sensors: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut net = Network::new(cfg, n_sensors).unwrap();
    let windows = random_windows(&mut rng, 6, cfg.window * n_sensors);
    let refs: Vec<&[f64]> = windows.iter().map(Vec::as_slice).collect();
    let targets = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
    let input = net.batch_input(&refs).unwrap();
    let loss_of = |net: &Network| {
        let mut tape = Tape::new();
        let x = tape.input(input.clone()).unwrap();
        let p = net.forward(&mut tape, x).unwrap();
        let loss = bce_loss(&mut tape, p, &targets).unwrap();
        (tape, loss)
    };
    let (tape, loss) = loss_of(&net);
    let grads = tape.backward(loss).unwrap();
    let h = 1e-5;
    let ids: Vec<ParamId> = net.store().ids().collect();
    let mut worst = 0.0_f64;
    for id in ids {
        for j in 0..net.store().value(id).len() {
            let orig = net.store().value(id).data()[j];
            let mut eval = |v: f64| {
                net.store_mut().value_mut(id).data_mut()[j] = v;
                let (tape, loss) = loss_of(&net);
                tape.value(loss).data()[0]
            };
            let numeric = (eval(orig + h) - eval(orig - h)) / (2.0 * h);
            net.store_mut().value_mut(id).data_mut()[j] = orig;
            let analytic = grads.get(id).map_or(0.0, |g| g.data()[j]);
            let scale = analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic - numeric).abs() / scale);
        }
    }
    worst
}

#[test]
fn full_model_gradients_match_finite_differences() {
    for approach in [Approach::Dovi, Approach::Lr, Approach::Mlp] {
        let err = full_model_fd_error(&small(approach), 4);
        assert!(err < 1e-4, "{approach:?}: {err}");
    }
}

/// Windows whose first sensor is shifted up for positives and down for
/// negatives.
fn separable(count: usize, seed: u64, l: usize, n: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut windows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..count {
        let label = u8::from(i % 3 == 0);
        let shift = if label == 1 { 0.8 } else { -0.8 };
        let w = (0..l * n)
            .map(|j| rng.random_range(-0.3..0.3) + if j % n == 0 { shift } else { 0.0 })
            .collect();
        windows.push(w);
        labels.push(label);
    }
    (windows, labels)
}

fn as_samples<'a>(windows: &'a [Vec<f64>], labels: &[u8], n: usize) -> Vec<Sample<'a>> {
    windows
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (w, &label))| Sample {
            window: w,
            n_sensors: n,
            label,
            end_instant: i,
        })
        .collect()
}

#[test]
fn separable_toy_is_learned_within_twenty_epochs() {
    let (tw, tl) = separable(300, 5, 8, 3);
    let (vw, vl) = separable(90, 6, 8, 3);
    for approach in [Approach::Dovi, Approach::Lr, Approach::Mlp] {
        let cfg = ModelConfig {
            epochs: 20,
            batch_size: 32,
            ..small(approach)
        };
        let model = fit(&cfg, 3, &as_samples(&tw, &tl, 3), &as_samples(&vw, &vl, 3)).unwrap();
        let metrics = model.evaluate(&as_samples(&vw, &vl, 3)).unwrap();
        assert_eq!(metrics.f1, 1.0, "{approach:?}");
        assert_eq!(model.report.f1_val, Some(1.0));
    }
}

#[test]
fn zero_epochs_keep_initial_parameters() {
    let (w, l) = separable(30, 7, 8, 2);
    let samples = as_samples(&w, &l, 2);
    let cfg = ModelConfig {
        epochs: 0,
        ..small(Approach::Dovi)
    };
    let (net, report) = train(&cfg, 2, &samples, &samples).unwrap();
    assert!(report.epochs.is_empty());
    assert_eq!(report.best_epoch, None);
    assert_eq!(report.f1_val, None);
    assert_eq!(report.threshold, cfg.threshold);
    let fresh = Network::new(&cfg, 2).unwrap();
    assert_eq!(net.store().values_by_name(), fresh.store().values_by_name());
}

#[test]
fn threshold_is_strict() {
    assert_eq!(predict_label(0.5, 0.5), 0);
    assert_eq!(predict_label(0.5000001, 0.5), 1);
    assert_eq!(predict_label(0.0, 0.1), 0);
}

#[test]
fn training_is_deterministic_and_checkpoints_round_trip() {
    let (tw, tl) = separable(120, 8, 8, 2);
    let (vw, vl) = separable(40, 9, 8, 2);
    let cfg = ModelConfig {
        epochs: 3,
        batch_size: 16,
        tune_threshold: true,
        ..small(Approach::Dovi)
    };
    let run = || fit(&cfg, 2, &as_samples(&tw, &tl, 2), &as_samples(&vw, &vl, 2)).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.network.store().values_by_name(), b.network.store().values_by_name());
    assert_eq!(a.report.epochs, b.report.epochs);

    let text = a.checkpoint(Some("abc".into())).unwrap().to_json().unwrap();
    let ckpt = girder_neural::Checkpoint::from_json(&text).unwrap();
    let (restored, meta) = TrainedModel::from_checkpoint(&ckpt).unwrap();
    assert_eq!(meta.config_digest.as_deref(), Some("abc"));
    assert_eq!(restored.threshold(), a.threshold());
    let val = as_samples(&vw, &vl, 2);
    let before = a.network.score_samples(&val).unwrap();
    let after = restored.network.score_samples(&val).unwrap();
    assert_eq!(before, after);
}

#[test]
fn best_epoch_is_restored() {
    let (tw, tl) = separable(120, 10, 8, 2);
    let (vw, vl) = separable(40, 12, 8, 2);
    let cfg = ModelConfig {
        epochs: 6,
        batch_size: 16,
        ..small(Approach::Lr)
    };
    let val = as_samples(&vw, &vl, 2);
    let model = fit(&cfg, 2, &as_samples(&tw, &tl, 2), &val).unwrap();
    let best = model.report.best_epoch.unwrap();
    let record = &model.report.epochs[best - 1];
    let max = model.report.epochs.iter().map(|e| e.val_f1).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(record.val_f1, max);
    assert!(model.report.epochs[..best - 1].iter().all(|e| e.val_f1 < max));
    assert_eq!(model.evaluate(&val).unwrap().f1, max);
}

#[test]
fn malformed_inputs_are_rejected() {
    let net = Network::new(&small(Approach::Dovi), 4).unwrap();
    assert!(net.score(&[0.0; 31]).is_err());
    let bad = ModelConfig {
        filter_size: 9,
        ..small(Approach::Dovi)
    };
    assert!(Network::new(&bad, 4).is_err());
    assert!(Network::new(&small(Approach::Dovi), 0).is_err());
    assert!(train(&small(Approach::Lr), 4, &[], &[]).is_err());
}
