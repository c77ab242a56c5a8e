//! Metric definitions and case selection of the false-positive analyses
//! against direct counting.

use girder_core::dataset::PrepareParams;
use girder_core::evaluation::{
    case_study, neighbor_fp_study, prf1, section_length_study, total_weight_fp_study, StudyMeta,
};
use girder_core::models::{fit, predict_label, Approach, ModelConfig};
use girder_core::pipeline::run_simulation;
use girder_core::presets::BridgePreset;
use girder_core::traffic::loads_at;
use proptest::prelude::*;

proptest! {
    #[test]
    fn metrics_match_direct_counts(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..300)) {
        let (preds, labels): (Vec<u8>, Vec<u8>) = pairs.iter().copied().unzip();
        let m = prf1(&preds, &labels).unwrap();
        let count = |p: u8, y: u8| pairs.iter().filter(|&&(a, b)| a == p && b == y).count();
        prop_assert_eq!((m.tp, m.fp, m.fn_, m.tn), (count(1, 1), count(1, 0), count(0, 1), count(0, 0)));
        prop_assert_eq!(m.total(), pairs.len());
        let predicted = count(1, 1) + count(1, 0);
        let actual = count(1, 1) + count(0, 1);
        if predicted > 0 && actual > 0 && count(1, 1) > 0 {
            let p = count(1, 1) as f64 / predicted as f64;
            let r = count(1, 1) as f64 / actual as f64;
            prop_assert!((m.f1 - 2.0 * p * r / (p + r)).abs() < 1e-15);
            let harmonic = 1.0 / (0.5 / p + 0.5 / r);
            prop_assert!((m.f1 - harmonic).abs() < 1e-12);
        } else {
            prop_assert_eq!(m.f1, 0.0);
        }
        prop_assert!((0.0..=1.0).contains(&m.f1));
    }
}

#[test]
fn mismatched_lengths_are_rejected() {
    assert!(prf1(&[1, 0], &[1]).is_err());
}

#[test]
fn false_positive_cases_match_direct_scan() {
    let preset = BridgePreset {
        n_instants: 4_000,
        ..BridgePreset::sbm()
    };
    let sim = run_simulation(&preset, 3).unwrap();
    let sections = preset.sections(1).unwrap();
    let data = sim.dataset(&sections, &PrepareParams::default()).unwrap();
    let cfg = ModelConfig {
        approach: Approach::Lr,
        epochs: 2,
        ..ModelConfig::default()
    };
    let model = fit(
        &cfg,
        data.n_sensors(),
        &data.samples(data.split.train.clone()),
        &data.samples(data.split.val.clone()),
    )
    .unwrap();

    // direct scan with sections from plain division of the 60 m deck
    let section = |x: f64| (0.0..=60.0).contains(&x).then(|| ((x / 16.0).floor() as usize).min(3));
    let (mut any, mut left, mut right) = ((0, 0), (0, 0), (0, 0));
    let mut heavy: Vec<(f64, u8)> = Vec::new();
    for k in data.split.test.clone() {
        let sample = data.sample(k);
        let loads = loads_at(&sim.trajectory, &sim.plan, sample.end_instant);
        let pred = predict_label(model.network.score(sample.window).unwrap(), model.threshold());
        let over = |s: usize| {
            loads
                .iter()
                .any(|l| section(l.position_m) == Some(s) && l.weight_kg >= 30_000.0)
        };
        if !over(1) {
            let fp = usize::from(pred);
            if over(0) || over(2) {
                any = (any.0 + 1, any.1 + fp);
            }
            if over(0) {
                left = (left.0 + 1, left.1 + fp);
            }
            if over(2) {
                right = (right.0 + 1, right.1 + fp);
            }
            let total: f64 = loads
                .iter()
                .filter(|l| section(l.position_m) == Some(1))
                .map(|l| l.weight_kg)
                .sum();
            if total > 30_000.0 {
                heavy.push((total, pred));
            }
        }
    }

    let rates = neighbor_fp_study(&model, &data, &sim, &sections).unwrap();
    let got: Vec<(&str, usize, usize)> = rates
        .iter()
        .map(|r| (r.label.as_str(), r.cases, r.false_positives))
        .collect();
    assert_eq!(got, [("any", any.0, any.1), ("1", left.0, left.1), ("3", right.0, right.1)]);
    assert!(any.0 > 0);

    let rates = total_weight_fp_study(&model, &data, &sim, &sections, 10_000.0).unwrap();
    assert_eq!(rates[0].cases, heavy.len());
    assert_eq!(rates[0].false_positives, heavy.iter().filter(|(_, p)| *p == 1).count());
    let binned: usize = rates[1..].iter().map(|r| r.cases).sum();
    assert_eq!(binned, heavy.len());
    for r in &rates[1..] {
        let lo: f64 = r.label.split('-').next().unwrap().parse().unwrap();
        let in_bin = heavy
            .iter()
            .filter(|(w, _)| *w / 1000.0 >= lo && *w / 1000.0 < lo + 10.0)
            .count();
        assert_eq!(r.cases, in_bin, "{}", r.label);
    }

    let meta = StudyMeta {
        preset: "sbm".into(),
        traffic_seed: 3,
        noise_seed: 0,
        model_seed: 0,
        config_digest: None,
        dataset_digest: None,
    };
    let table = case_study("weight_fp", "total_weight", Approach::Lr, &rates, meta);
    let csv = table.to_csv();
    assert_eq!(csv.lines().count(), rates.len() + 1);
    let r = &rates[0];
    let row = csv.lines().nth(1).unwrap();
    assert!(row.starts_with("any,lr,"), "{row}");
    let tail = format!(",0,{},0,{}", r.false_positives, r.cases - r.false_positives);
    assert!(row.ends_with(&tail), "{row}");
}

#[test]
fn section_length_survey_grows_with_length() {
    let preset = BridgePreset {
        n_instants: 2_000,
        ..BridgePreset::sbm()
    };
    let sim = run_simulation(&preset, 8).unwrap();
    let rows = section_length_study(&sim, &[2.0, 16.0, 30.0]).unwrap();
    assert!(rows[0].avg_vehicles < rows[1].avg_vehicles && rows[1].avg_vehicles < rows[2].avg_vehicles);
    assert!(section_length_study(&sim, &[3.0]).is_err());
}
