//! Labels against a brute-force scan of the automaton cells, and the
//! windowing, normalization and split properties of prepared datasets.

use girder_core::dataset::{labels_for, prepare, split, PrepareParams, SectionMap, SplitSpec};
use girder_core::pipeline::run_simulation;
use girder_core::presets::BridgePreset;
use girder_core::structure::ResponseMatrix;
use girder_core::traffic::{simulate, CaParams, SamplingPlan};
use proptest::prelude::*;

/// Label from the raw cells: positions are cell centres, moved halfway to
/// the next tick's cell on half-tick instants. A vehicle that leaves moves
/// at its previous speed, or at least far enough to clear the last cell.
fn brute_force_labels(preset: &BridgePreset, seed: u64, n_ticks: usize, target: usize) -> Vec<u8> {
    let params = CaParams {
        seed,
        ..preset.traffic.clone()
    };
    let traj = simulate(&params, n_ticks).unwrap();
    let cell = params.cell_length;
    let len = params.n_cells as f64 * cell;
    let centre = |c: u32| (c as f64 + 0.5) * cell;
    let on_target = |x: f64| {
        if !(0.0..=len).contains(&x) {
            return false;
        }
        let s = ((x / preset.section_length).floor() as usize).min(preset.n_sections() - 1);
        s == target
    };
    let steps = (params.tick_duration / preset.sample_dt).round() as usize;
    let mut labels = Vec::new();
    for t in 0..n_ticks {
        let now = &traj.states[t];
        for sub in 0..steps {
            if sub > 0 && t + 1 == n_ticks {
                break;
            }
            let frac = sub as f64 / steps as f64;
            let mut hit = false;
            for v in now.vehicles() {
                if v.weight_kg < preset.threshold_kg {
                    continue;
                }
                let from = centre(v.position);
                let x = if sub == 0 {
                    from
                } else {
                    let to = traj.states[t + 1]
                        .vehicles()
                        .iter()
                        .find(|w| w.id == v.id)
                        .map_or_else(
                            || centre(v.position + v.velocity.max(params.n_cells - v.position)),
                            |w| centre(w.position),
                        );
                    from + frac * (to - from)
                };
                hit |= on_target(x);
            }
            labels.push(u8::from(hit));
        }
    }
    labels
}

#[test]
fn labels_match_brute_force_scan() {
    let sbm = BridgePreset::sbm();
    let n_ticks = 3_000;
    for target in 0..sbm.n_sections() {
        let params = CaParams {
            seed: 17,
            ..sbm.traffic.clone()
        };
        let traj = simulate(&params, n_ticks).unwrap();
        let plan = SamplingPlan::new(&traj, sbm.sample_dt).unwrap();
        let ours = labels_for(&traj, &plan, &sbm.sections(target).unwrap());
        let brute = brute_force_labels(&sbm, 17, n_ticks, target);
        assert_eq!(ours.len(), 2 * n_ticks - 1);
        assert_eq!(ours, brute, "section {target}");
        assert!(ours.contains(&1));
    }
}

fn random_response(n_instants: usize, n_sensors: usize, seed: u64) -> ResponseMatrix {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n_instants * n_sensors).map(|_| rng.random_range(-0.2..0.0)).collect();
    ResponseMatrix::new(values, n_sensors, 0.5, (0..n_sensors).map(|i| i as f64).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn windows_reassemble_the_series(
        n_instants in 30usize..200,
        n_sensors in 1usize..5,
        window in 1usize..12,
        seed in any::<u64>(),
    ) {
        let resp = random_response(n_instants, n_sensors, seed);
        let labels: Vec<u8> = (0..n_instants).map(|t| u8::from(t % 7 == 3)).collect();
        let prepared = prepare(&resp, &labels, &PrepareParams { window, ..PrepareParams::default() });
        // split sizes count instants, so a long window can leave too few samples
        let fits = (n_instants * 6 / 10) + (n_instants * 2 / 10) <= n_instants - window + 1;
        prop_assert_eq!(prepared.is_ok(), fits);
        let Ok(data) = prepared else { return Ok(()) };
        prop_assert_eq!(data.n_samples(), n_instants - window + 1);
        let mut rebuilt = data.sample(0).window.to_vec();
        for k in 0..data.n_samples() {
            let s = data.sample(k);
            prop_assert_eq!(s.window, &data.series.values[k * n_sensors..(k + window) * n_sensors]);
            prop_assert_eq!(s.label, labels[k + window - 1]);
            prop_assert_eq!(s.end_instant, k + window - 1);
            if k > 0 {
                rebuilt.extend_from_slice(&s.window[(window - 1) * n_sensors..]);
            }
        }
        prop_assert_eq!(rebuilt, data.series.values.clone());
    }

    #[test]
    fn normalization_uses_training_instants_only(
        n_instants in 40usize..200,
        window in 1usize..10,
        seed in any::<u64>(),
    ) {
        let resp = random_response(n_instants, 3, seed);
        let labels = vec![0u8; n_instants];
        let data = prepare(&resp, &labels, &PrepareParams { window, ..PrepareParams::default() }).unwrap();
        let fit_end = data.split.train.end + window - 1;
        for i in 0..3 {
            let col: Vec<f64> = (0..fit_end).map(|t| resp.get(t, i)).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let max_abs = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!((data.norm.mean[i] - mean).abs() < 1e-15);
            prop_assert_eq!(data.norm.max_abs[i], max_abs);
            for t in 0..n_instants {
                let expected = (resp.get(t, i) - mean) / max_abs;
                prop_assert!((data.series.get(t, i) - expected).abs() < 1e-12);
            }
            let norm_mean = (0..fit_end).map(|t| data.series.get(t, i)).sum::<f64>() / fit_end as f64;
            prop_assert!(norm_mean.abs() < 1e-12);
        }
    }

    #[test]
    fn splits_tile_the_samples_in_order(
        n_samples in 1usize..5_000,
        extra in 0usize..20,
        r in prop::array::uniform3(0.0..10.0f64),
    ) {
        prop_assume!(r.iter().sum::<f64>() > 0.1);
        let basis = n_samples + extra;
        let Ok(spec) = SplitSpec::from_ratios(n_samples, basis, r) else {
            return Ok(());
        };
        spec.validate(n_samples).unwrap();
        let items: Vec<usize> = (0..n_samples).collect();
        let (a, b, c) = split(&items, &spec).unwrap();
        let joined: Vec<usize> = a.iter().chain(b).chain(c).copied().collect();
        let total: f64 = r.iter().sum();
        prop_assert_eq!(a.len(), (basis as f64 * r[0] / total + 1e-9).floor() as usize);
        prop_assert_eq!(b.len(), (basis as f64 * r[1] / total + 1e-9).floor() as usize);
        prop_assert_eq!(joined, items);
    }

    #[test]
    fn section_lookup_agrees_with_division(x in 0.0..60.0f64) {
        let map = SectionMap::uniform(60.0, 16.0, 0, 30_000.0).unwrap();
        let expected = ((x / 16.0).floor() as usize).min(3);
        prop_assert_eq!(map.section_of(x), Some(expected));
    }
}

#[test]
fn full_length_counts() {
    let preset = BridgePreset::sbm();
    let sim = run_simulation(&preset, 1).unwrap();
    assert_eq!(sim.response.n_instants(), 100_000);
    let data = sim
        .dataset(&preset.sections(1).unwrap(), &PrepareParams::default())
        .unwrap();
    assert_eq!(data.n_samples(), 99_993);
    assert_eq!(data.split.sizes(), [60_000, 20_000, 19_993]);
    let rate = data.positive_rate();
    assert!((0.05..=0.5).contains(&rate), "{rate}");
}

#[test]
fn noise_is_seeded_and_added_after_normalization() {
    let resp = random_response(500, 2, 4);
    let labels = vec![0u8; 500];
    let clean = prepare(&resp, &labels, &PrepareParams::default()).unwrap();
    let noisy = |seed| {
        prepare(
            &resp,
            &labels,
            &PrepareParams {
                sigma: 0.3,
                noise_seed: seed,
                ..PrepareParams::default()
            },
        )
        .unwrap()
    };
    let (a, b, c) = (noisy(1), noisy(1), noisy(2));
    assert_eq!(a, b);
    assert_ne!(a.series, c.series);
    assert_eq!(a.norm, clean.norm);
    let diffs: Vec<f64> = a
        .series
        .values
        .iter()
        .zip(&clean.series.values)
        .map(|(x, y)| x - y)
        .collect();
    let sd = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
    assert!((sd - 0.3).abs() < 0.03, "{sd}");
}
