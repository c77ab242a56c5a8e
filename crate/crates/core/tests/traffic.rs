//! Automaton invariants, a brute-force replay of deterministic traffic, and
//! weight sampler fidelity against the analytic mixture.

use girder_core::presets::BridgePreset;
use girder_core::traffic::{
    avg_vehicles_per_section, default_weight_specs, nasch_step, sample_vehicle_weight, simulate, CaParams, IdSource,
    RoadState, Vehicle, VehicleType,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Published mixture parameters per class: (w1, mu1, s1), (w2, mu2, s2),
/// (mu3, s3), with w3 = 1 - w1 - w2.
const TABLE: [[f64; 8]; 5] = [
    [0.337, 4.970, 0.130, 0.545, 7.144, 0.211, 7.883, 0.373],
    [0.056, 8.010, 0.670, 0.065, 4.061, 0.060, 8.111, 0.543],
    [0.572, 9.067, 0.370, 0.293, 5.815, 0.006, 9.371, 0.100],
    [0.134, 9.390, 0.385, 0.311, 9.345, 0.149, 4.936, 0.184],
    [0.558, 9.762, 0.256, 0.352, 16.050, 0.317, 10.690, 0.258],
];

fn components(row: &[f64; 8]) -> [(f64, f64, f64); 3] {
    [
        (row[0], row[1], row[2]),
        (row[3], row[4], row[5]),
        (1.0 - row[0] - row[3], row[6], row[7]),
    ]
}

fn oracle_cdf(row: &[f64; 8], x: f64) -> f64 {
    components(row)
        .iter()
        .map(|&(w, mu, s)| w * 0.5 * (1.0 + libm::erf((x.ln() - mu) / (s * std::f64::consts::SQRT_2))))
        .sum()
}

fn oracle_mean(row: &[f64; 8]) -> f64 {
    components(row).iter().map(|&(w, mu, s)| w * (mu + s * s / 2.0).exp()).sum()
}

fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[test]
fn weight_samples_follow_the_mixture() {
    let specs = default_weight_specs();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (row, spec) in TABLE.iter().zip(&specs) {
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_vehicle_weight(spec, None, &mut rng).unwrap())
            .collect();
        let d = ks_statistic(xs.clone(), |x| oracle_cdf(row, x));
        assert!(d < 0.01, "{:?}: KS {d}", spec.type_id);
        if spec.type_id == VehicleType::I {
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let expected = oracle_mean(row);
            assert!((mean / expected - 1.0).abs() < 0.02, "mean {mean} vs {expected}");
        }
    }
}

#[test]
fn capped_weights_never_exceed_the_cap() {
    let spec = &default_weight_specs()[4];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20_000 {
        let w = sample_vehicle_weight(spec, Some(60_000.0), &mut rng).unwrap();
        assert!(w > 0.0 && w <= 60_000.0);
    }
}

fn random_params(seed: u64, p_slow: f64, p_inject: f64, v_max: u32, n_cells: u32) -> CaParams {
    CaParams {
        n_cells,
        v_max,
        p_slow,
        p_inject,
        seed,
        weight_cap: Some(60_000.0),
        ..CaParams::default()
    }
}

fn check_step(before: &RoadState, after: &RoadState, injected: bool, exited: usize, v_max: u32) {
    let positions: Vec<u32> = after.vehicles().iter().map(|v| v.position).collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]), "two vehicles share a cell");
    assert!(after.vehicles().iter().all(|v| v.velocity <= v_max));
    assert!(positions.iter().all(|&p| p < after.n_cells));
    assert_eq!(after.len(), before.len() + usize::from(injected) - exited);
}

#[test]
fn long_random_run_keeps_invariants() {
    let params = random_params(9, 0.3, 0.5, 5, 40);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut ids = IdSource::default();
    let mut state = RoadState::empty(params.n_cells, params.cell_length);
    for _ in 0..100_000 {
        let (next, events) = nasch_step(&state, &params, &mut ids, &mut rng).unwrap();
        check_step(&state, &next, events.injected.is_some(), events.exited.len(), params.v_max);
        state = next;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_steps_keep_invariants(
        seed in any::<u64>(),
        p_slow in 0.0..1.0f64,
        p_inject in 0.0..1.0f64,
        v_max in 1u32..8,
        n_cells in 1u32..60,
    ) {
        let params = random_params(seed, p_slow, p_inject, v_max, n_cells);
        let traj = simulate(&params, 300).unwrap();
        traj.validate().unwrap();
        for pair in traj.states.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let ids_a: Vec<u64> = a.vehicles().iter().map(|v| v.id).collect();
            let stayed = b.vehicles().iter().filter(|v| ids_a.contains(&v.id)).count();
            let injected = b.len() - stayed;
            prop_assert!(injected <= 1);
            check_step(a, b, injected == 1, a.len() - stayed, v_max);
            // vehicles never overtake and never move backwards
            for v in b.vehicles().iter().filter(|v| ids_a.contains(&v.id)) {
                let old = a.vehicles().iter().find(|o| o.id == v.id).unwrap();
                prop_assert_eq!(v.position, old.position + v.velocity);
                prop_assert!(v.velocity <= old.velocity + 1);
            }
        }
    }

    #[test]
    fn same_seed_same_trajectory(seed in any::<u64>()) {
        let params = random_params(seed, 0.3, 0.4, 4, 30);
        prop_assert_eq!(simulate(&params, 200).unwrap(), simulate(&params, 200).unwrap());
    }
}

#[test]
fn hand_traced_acceleration() {
    let params = random_params(0, 0.0, 0.0, 4, 30);
    let v = Vehicle {
        id: 0,
        type_id: VehicleType::II,
        weight_kg: 5_000.0,
        velocity: 2,
        position: 3,
    };
    let state = RoadState::from_vehicles(30, 2.0, vec![v]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (next, _) = nasch_step(&state, &params, &mut IdSource::starting_at(1), &mut rng).unwrap();
    assert_eq!((next.vehicles()[0].position, next.vehicles()[0].velocity), (6, 3));
}

/// Deterministic replay with a plain cell array: with no random slowdown
/// and injection whenever the entry is free, the automaton has exactly one
/// possible evolution.
fn brute_force_counts(n_cells: usize, v_max: usize, ticks: usize, warmup: usize) -> Vec<Vec<Option<usize>>> {
    let mut road: Vec<Option<usize>> = vec![None; n_cells];
    let mut history = Vec::new();
    for tick in 0..warmup + ticks {
        if tick >= warmup {
            history.push(road.clone());
        }
        let mut next = vec![None; n_cells];
        for cell in (0..n_cells).rev() {
            let Some(v) = road[cell] else { continue };
            let gap = (cell + 1..n_cells).find(|&c| road[c].is_some()).map_or(usize::MAX, |c| c - cell - 1);
            let speed = (v + 1).min(v_max).min(gap);
            if cell + speed < n_cells {
                next[cell + speed] = Some(speed);
            }
        }
        if next[0].is_none() {
            next[0] = Some(0);
        }
        road = next;
    }
    history
}

#[test]
fn saturated_deterministic_flow_matches_brute_force() {
    for (n_cells, v_max) in [(30u32, 4u32), (141, 6), (7, 1)] {
        let params = CaParams {
            n_cells,
            v_max,
            p_slow: 0.0,
            p_inject: 1.0,
            warmup_ticks: 50,
            weight_cap: Some(60_000.0),
            ..CaParams::default()
        };
        let traj = simulate(&params, 500).unwrap();
        let expected = brute_force_counts(n_cells as usize, v_max as usize, 500, 50);
        for (state, cells) in traj.states.iter().zip(&expected) {
            let mut actual = vec![None; n_cells as usize];
            for v in state.vehicles() {
                actual[v.position as usize] = Some(v.velocity as usize);
            }
            assert_eq!(&actual, cells);
        }
        let occupancy = traj.states.iter().map(RoadState::len).sum::<usize>() as f64 / 500.0;
        let brute = expected.iter().flatten().filter(|c| c.is_some()).count() as f64 / 500.0;
        assert_eq!(occupancy, brute);
    }
}

#[test]
fn preset_traffic_is_physical() {
    for preset in [BridgePreset::sbm(), BridgePreset::cbm()] {
        let params = CaParams {
            seed: 4,
            ..preset.traffic.clone()
        };
        let traj = simulate(&params, 5_000).unwrap();
        let mut counts = [0usize; 5];
        for s in &traj.states {
            for v in s.vehicles() {
                assert!(v.weight_kg > 0.0 && v.weight_kg <= 60_000.0);
                counts[v.type_id.index()] += 1;
            }
        }
        assert!(counts.iter().all(|&c| c > 0), "{counts:?}");
        let per_section = avg_vehicles_per_section(&traj, preset.section_length).unwrap();
        assert!(per_section > 0.3 && per_section < 8.0, "{}: {per_section}", preset.name);
    }
}

#[test]
fn sbm_sixteen_metre_sections_hold_about_one_vehicle() {
    let preset = BridgePreset::sbm();
    let traj = simulate(&CaParams { seed: 1, ..preset.traffic.clone() }, 20_000).unwrap();
    let avg = avg_vehicles_per_section(&traj, 16.0).unwrap();
    assert!((avg - 1.0).abs() < 0.35, "{avg}");
    assert!(avg_vehicles_per_section(&traj, 15.0).is_err());
    let mut last = 0.0;
    for k in 1..=15 {
        let v = avg_vehicles_per_section(&traj, 2.0 * k as f64).unwrap();
        assert!(v >= last - 0.05, "section length {}: {v} after {last}", 2 * k);
        last = v;
    }
}
