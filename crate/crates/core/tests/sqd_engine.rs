use std::collections::BTreeSet;

use mpsqd_core::eigen::fci_ground_state;
use mpsqd_core::fcidump::make_hubbard_chain;
use mpsqd_core::fermion::{decode_bitstring, encode_determinant, full_basis, Determinant};
use mpsqd_core::rng::StreamRng;
use mpsqd_core::sampler::{sample_counts, NoiseModel, SampleSet, Wavefunction};
use mpsqd_core::sqd::{
    extsqd_from_trace, make_batches, recover_configuration, recover_determinant, sqd_run, Convergence, OccupancyVector,
    SqdConfig, SqdTrace,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn noisy_hubbard(
    sites: usize,
    p: f64,
    shots: u64,
    seed: u64,
) -> (mpsqd_core::fcidump::FermionHamiltonian, f64, SampleSet) {
    let half = sites / 2;
    let ham = make_hubbard_chain(sites, 4.0, 1.0, half, sites - half).unwrap();
    let fci = fci_ground_state(&ham).unwrap();
    let wf = Wavefunction::from_fci(sites, &fci).unwrap();
    let noise = NoiseModel { p_readout: p, ..NoiseModel::noiseless() };
    let samples = sample_counts("t", &wf, shots, &noise, seed).unwrap();
    (ham, fci.energy, samples)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recovery_is_identity_on_physical_input(seed in any::<u64>(), i in 0usize..100) {
        let basis = full_basis(5, 2, 3);
        let det = basis[i % basis.len()];
        let bits = encode_determinant(&det, 5).unwrap();
        let mut rng = StreamRng::seed_from_u64(seed);
        let occ = OccupancyVector((0..10).map(|_| rng.gen_range(0.0..=1.0)).collect());
        prop_assert_eq!(recover_configuration(&bits, &occ, 5, 2, 3, &mut rng).unwrap(), bits);
    }

    #[test]
    fn recovery_always_reaches_the_target_weights(
        alpha in 0u64..64, beta in 0u64..64, na in 0usize..=6, nb in 0usize..=6, seed in any::<u64>()
    ) {
        let mut rng = StreamRng::seed_from_u64(seed);
        let occ = OccupancyVector((0..12).map(|_| rng.gen_range(0.0..=1.0)).collect());
        let out = recover_determinant(Determinant::new(alpha, beta), &occ, 6, na, nb, &mut rng);
        prop_assert!(out.is_physical(na, nb));
        prop_assert!(out.check(6).is_ok());
    }
}

#[test]
fn batches_only_hold_physical_determinants() {
    let (_, _, samples) = noisy_hubbard(5, 0.05, 4000, 3);
    let mut rng = StreamRng::seed_from_u64(9);
    let occ = OccupancyVector(vec![0.4; 10]);
    let mut recovered = std::collections::BTreeMap::new();
    for (bits, &c) in &samples.counts {
        *recovered.entry(recover_configuration(bits, &occ, 5, 2, 3, &mut rng).unwrap()).or_insert(0) += c;
    }
    let recovered = SampleSet::from_counts("r", recovered).unwrap();
    let carry: BTreeSet<Determinant> = full_basis(5, 2, 3).into_iter().take(3).collect();
    let cfg = SqdConfig { n_batches: 6, batch_size: 30, ..SqdConfig::default() };
    for batch in make_batches(&recovered, 5, &cfg, &carry, 2).unwrap() {
        assert!(batch.iter().all(|d| d.is_physical(2, 3)));
        assert!(carry.iter().all(|d| batch.contains(d)));
    }
}

#[test]
fn trace_obeys_the_variational_chain_and_occupancy_bounds() {
    for seed in 0..8u64 {
        let (ham, exact, samples) = noisy_hubbard(5, 0.03, 3000, seed);
        let cfg = SqdConfig { batch_size: 25, n_batches: 4, seed, ..SqdConfig::default() };
        let trace = sqd_run(&ham, &samples, &cfg).unwrap();
        for rec in &trace.iterations {
            assert!(rec.batch_energies.iter().all(|&e| e >= exact - 1e-10));
            assert!(rec.occupancies.0.iter().all(|&n| (-1e-12..=1.0 + 1e-12).contains(&n)));
            assert!((rec.occupancies.alpha(5).iter().sum::<f64>() - 2.0).abs() < 1e-9);
            assert!((rec.occupancies.beta(5).iter().sum::<f64>() - 3.0).abs() < 1e-9);
        }
        assert!(trace.e_ext <= trace.e_last + 1e-10);
        assert!(trace.final_basis.iter().all(|b| decode_bitstring(b, 5).unwrap().is_physical(2, 3)));
    }
}

#[test]
fn runs_are_deterministic_and_traces_round_trip() {
    let (ham, _, samples) = noisy_hubbard(4, 0.02, 2000, 1);
    let cfg = SqdConfig { batch_size: 10, seed: 77, ..SqdConfig::default() };
    let trace = sqd_run(&ham, &samples, &cfg).unwrap();
    assert_eq!(trace, sqd_run(&ham, &samples, &cfg).unwrap());
    let back: SqdTrace = serde_json::from_str(&trace.to_json()).unwrap();
    assert_eq!(back, trace);
    let (e_ext, dim) = extsqd_from_trace(&ham, &back, &cfg).unwrap();
    assert_eq!((e_ext, dim), (trace.e_ext, trace.ext_dimension));
}

#[test]
fn converges_before_the_iteration_cap_on_exact_samples() {
    let (ham, exact, samples) = noisy_hubbard(4, 0.0, 20_000, 4);
    let trace = sqd_run(&ham, &samples, &SqdConfig::default()).unwrap();
    assert_eq!(trace.convergence, Convergence::Energy);
    assert!(trace.iterations.len() < 5);
    assert!(trace.e_last >= exact - 1e-10 && trace.e_last - exact < 1e-2);
    assert!((trace.e_ext - exact).abs() < 1e-8);
}
