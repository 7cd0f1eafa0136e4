use std::collections::BTreeSet;

use mpsqd_core::eigen::fci_ground_state;
use mpsqd_core::fcidump::make_hubbard_chain;
use mpsqd_core::multiprog::{bundled_plan, graph_distance, validate_partition};
use mpsqd_core::sampler::{
    register_seed, sample_counts, sample_parallel, CrosstalkPairs, NoiseModel, SampleSet, Wavefunction,
};
use proptest::prelude::*;

fn hubbard_wavefunction(u: f64) -> Wavefunction {
    let fci = fci_ground_state(&make_hubbard_chain(4, u, 1.0, 2, 2).unwrap()).unwrap();
    Wavefunction::from_fci(4, &fci).unwrap()
}

/// Two-sample chi-squared statistic over the union of observed keys.
fn chi_squared(a: &SampleSet, b: &SampleSet) -> (f64, usize) {
    let keys: BTreeSet<&String> = a.counts.keys().chain(b.counts.keys()).collect();
    let stat = keys
        .iter()
        .map(|k| {
            let x = *a.counts.get(*k).unwrap_or(&0) as f64;
            let y = *b.counts.get(*k).unwrap_or(&0) as f64;
            (x - y).powi(2) / (x + y)
        })
        .sum();
    (stat, keys.len() - 1)
}

/// Wilson–Hilferty approximation of the 0.999 chi-squared quantile.
fn chi_squared_999(df: usize) -> f64 {
    let k = df as f64;
    let z = 3.090232306167813;
    k * (1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt()).powi(3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn counts_sum_to_shots_under_any_noise(p in 0.0f64..=1.0, shots in 1u64..3000, seed in any::<u64>()) {
        let wf = hubbard_wavefunction(4.0);
        let noise = NoiseModel { p_readout: p, ..NoiseModel::default() };
        let set = sample_counts("x", &wf, shots, &noise, seed).unwrap();
        prop_assert_eq!(set.counts.values().sum::<u64>(), shots);
        prop_assert_eq!(set.shots, shots);

        let plan = bundled_plan(1).unwrap();
        let pair = [("a".to_string(), wf.clone()), ("b".to_string(), wf)];
        let noise = NoiseModel { p_readout: p, p_xtalk: p, ..NoiseModel::default() };
        for set in sample_parallel(&pair, &plan, shots, &noise, seed).unwrap() {
            prop_assert_eq!(set.counts.values().sum::<u64>(), shots);
        }
    }
}

#[test]
fn same_seed_same_samples() {
    let wf = hubbard_wavefunction(4.0);
    let noise = NoiseModel::default();
    let a = sample_counts("x", &wf, 5000, &noise, 42).unwrap();
    assert_eq!(a, sample_counts("x", &wf, 5000, &noise, 42).unwrap());
    assert_ne!(a, sample_counts("x", &wf, 5000, &noise, 43).unwrap());
}

#[test]
fn parallel_registers_follow_the_serial_distribution() {
    let plan = bundled_plan(2).unwrap();
    let pair = [("a".to_string(), hubbard_wavefunction(4.0)), ("b".to_string(), hubbard_wavefunction(6.0))];
    let noise = NoiseModel { p_xtalk: 0.0, ..NoiseModel::default() };
    for seed in 0..3u64 {
        let parallel = sample_parallel(&pair, &plan, 50_000, &noise, seed).unwrap();
        for (i, (label, wf)) in pair.iter().enumerate() {
            let serial = sample_counts(label, wf, 50_000, &noise, 1000 + seed).unwrap();
            let (stat, df) = chi_squared(&parallel[i], &serial);
            assert!(stat < chi_squared_999(df), "seed {seed} register {i}: chi2 {stat} with {df} dof");
            assert_eq!(parallel[i], sample_counts(label, wf, 50_000, &noise, register_seed(seed, i)).unwrap());
        }
    }
}

#[test]
fn crosstalk_only_acts_beyond_the_validated_buffer() {
    let noise = NoiseModel { xtalk_max_hops: 6, ..NoiseModel::default() };
    let mut previous = f64::INFINITY;
    for buffer in 1..=3 {
        let plan = bundled_plan(buffer).unwrap();
        assert!(validate_partition(&plan).is_empty());
        let pairs = CrosstalkPairs::new(&plan, &noise).unwrap();
        assert!(!pairs.pairs.is_empty());
        for &(_, _, hops, _) in &pairs.pairs {
            assert!(hops > plan.min_buffer);
        }
        let a = &plan.layouts[0].system_qubits;
        let b = &plan.layouts[1].system_qubits;
        let closest = a.iter().flat_map(|&u| b.iter().map(move |&v| (u, v)));
        let min = closest.map(|(u, v)| graph_distance(&plan.map, u, v).unwrap()).min().unwrap();
        assert_eq!(min, buffer + 1);
        assert!(pairs.expected_flips() <= previous);
        previous = pairs.expected_flips();
    }
}

#[test]
fn sample_sets_survive_json() {
    let set = sample_counts("x", &hubbard_wavefunction(4.0), 100, &NoiseModel::default(), 1).unwrap();
    assert_eq!(SampleSet::from_json(&set.to_json()).unwrap(), set);
    assert!(SampleSet::from_json(r#"{"label":"x","shots":3,"counts":{"01":1,"10":1}}"#).is_err());
}
