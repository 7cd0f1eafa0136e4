//! Configuration recovery, subspace batching and diagonalization (SQD), plus
//! the single-excitation subspace expansion (ext-SQD).
//!
//! One run:
//!
//! 1. keep samples with the right per-sector Hamming weights;
//! 2. estimate spin-orbital occupancies from them;
//! 3. each iteration, repair every unphysical sample against the current
//!    occupancies, draw `K` batches from the repaired distribution (plus the
//!    carried-over determinants), diagonalize each batch, average the batch
//!    ground-state occupancies, and carry the important determinants of the
//!    best batch forward;
//! 4. stop on an energy or occupancy plateau, or after `max_iterations`;
//! 5. expand the best final batch by single excitations of its dominant
//!    determinants and diagonalize once more.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigen::{lowest_eigenpair, EigenError};
use crate::fcidump::FermionHamiltonian;
use crate::fermion::{encode_determinant, project_hamiltonian, single_excitations, Determinant, FermionError};
use crate::rng::{stream, tag};
use crate::sampler::{SampleSet, SamplerError};

/// Residual tolerance handed to the eigensolver.
pub const EIGEN_TOL: f64 = 1e-8;
/// Additive floor in the recovery flip weights.
const FLIP_EPSILON: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SqdError {
    #[error("no physical samples survived post-selection")]
    Empty,
    #[error("sample width {got} does not match 2 x {norb} spin orbitals")]
    Width { got: usize, norb: usize },
    #[error("{0}")]
    Argument(String),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Fermion(#[from] FermionError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SqdConfig {
    pub n_batches: usize,
    pub batch_size: usize,
    pub max_iterations: usize,
    pub energy_tol: f64,
    pub occupancy_tol: f64,
    pub carryover_threshold: f64,
    pub extsqd_ci_threshold: f64,
    pub seed: u64,
}

impl Default for SqdConfig {
    fn default() -> Self {
        Self {
            n_batches: 10,
            batch_size: 3000,
            max_iterations: 5,
            energy_tol: 1e-8,
            occupancy_tol: 1e-5,
            carryover_threshold: 1e-4,
            extsqd_ci_threshold: 1e-5,
            seed: 0,
        }
    }
}

impl SqdConfig {
    pub fn check(&self) -> Result<(), SqdError> {
        if self.n_batches == 0 || self.batch_size == 0 || self.max_iterations == 0 {
            return Err(SqdError::Argument("n_batches, batch_size and max_iterations must be >= 1".into()));
        }
        let thresholds = [self.energy_tol, self.occupancy_tol, self.carryover_threshold, self.extsqd_ci_threshold];
        if thresholds.iter().any(|t| t.is_nan() || *t <= 0.0) {
            return Err(SqdError::Argument("all thresholds must be > 0".into()));
        }
        Ok(())
    }
}

/// Mean occupation of each spin orbital, α block then β block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OccupancyVector(pub Vec<f64>);

impl OccupancyVector {
    pub fn alpha(&self, norb: usize) -> &[f64] {
        &self.0[..norb]
    }

    pub fn beta(&self, norb: usize) -> &[f64] {
        &self.0[norb..]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convergence {
    Energy,
    Occupancy,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub batch_energies: Vec<f64>,
    pub min_energy: f64,
    pub best_batch: usize,
    pub occupancies: OccupancyVector,
    pub batch_dimensions: Vec<usize>,
    pub carryover_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqdTrace {
    pub norb: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub physical_shots: u64,
    pub discarded_shots: u64,
    pub iterations: Vec<IterationRecord>,
    pub convergence: Convergence,
    /// Best batch of the final iteration, as bitstrings.
    pub final_basis: Vec<String>,
    pub final_vector: Vec<f64>,
    pub e_first: f64,
    pub e_last: f64,
    pub e_ext: f64,
    pub ext_dimension: usize,
}

impl SqdTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("traces always serialize")
    }
}

fn check_width(samples: &SampleSet, norb: usize) -> Result<(), SqdError> {
    match samples.width() {
        Some(w) if w != 2 * norb => Err(SqdError::Width { got: w, norb }),
        _ => Ok(()),
    }
}

/// Keeps the samples whose per-sector weights are `(n_alpha, n_beta)`.
pub fn postselect(
    samples: &SampleSet,
    norb: usize,
    n_alpha: usize,
    n_beta: usize,
) -> Result<(SampleSet, u64), SqdError> {
    check_width(samples, norb)?;
    let mut kept = BTreeMap::new();
    for ((key, &count), (word, _)) in samples.counts.iter().zip(samples.words()?) {
        if Determinant::from_spin_orbitals(word, norb).is_physical(n_alpha, n_beta) {
            kept.insert(key.clone(), count);
        }
    }
    let physical = SampleSet::from_counts(&samples.label, kept)?;
    let discarded = samples.shots - physical.shots;
    Ok((physical, discarded))
}

/// Count-weighted fraction of samples with each logical bit set.
pub fn estimate_occupancies(physical: &SampleSet, norb: usize) -> Result<OccupancyVector, SqdError> {
    check_width(physical, norb)?;
    if physical.shots == 0 {
        return Err(SqdError::Empty);
    }
    let mut n = vec![0.0; 2 * norb];
    for (word, count) in physical.words()? {
        for (k, nk) in n.iter_mut().enumerate() {
            if word >> k & 1 == 1 {
                *nk += count as f64;
            }
        }
    }
    let total = physical.shots as f64;
    n.iter_mut().for_each(|x| *x /= total);
    Ok(OccupancyVector(n))
}

/// Draws `k` distinct positions from `candidates` with probability
/// proportional to `weights`, without replacement.
fn weighted_picks<R: Rng>(mut candidates: Vec<usize>, mut weights: Vec<f64>, k: usize, rng: &mut R) -> Vec<usize> {
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = weights.iter().sum();
        let target = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = weights.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                chosen = i;
                break;
            }
        }
        picked.push(candidates.remove(chosen));
        weights.remove(chosen);
    }
    picked
}

fn repair_sector<R: Rng>(mask: u64, occ: &[f64], target: usize, rng: &mut R) -> u64 {
    let weight = mask.count_ones() as usize;
    let norb = occ.len();
    if weight > target {
        let set: Vec<usize> = (0..norb).filter(|&p| mask >> p & 1 == 1).collect();
        let w = set.iter().map(|&p| (1.0 - occ[p]) + FLIP_EPSILON).collect();
        weighted_picks(set, w, weight - target, rng).into_iter().fold(mask, |m, p| m & !(1 << p))
    } else if weight < target {
        let clear: Vec<usize> = (0..norb).filter(|&p| mask >> p & 1 == 0).collect();
        let w = clear.iter().map(|&p| occ[p] + FLIP_EPSILON).collect();
        weighted_picks(clear, w, target - weight, rng).into_iter().fold(mask, |m, p| m | (1 << p))
    } else {
        mask
    }
}

/// Repairs one determinant to weights `(n_alpha, n_beta)`.
///
/// In a sector with too many electrons, occupied orbitals are emptied with
/// weight `1 - n_p`; with too few, empty orbitals are filled with weight
/// `n_p`. The α sector is repaired before the β sector. Physical inputs are
/// returned untouched and consume no randomness.
pub fn recover_determinant<R: Rng>(
    det: Determinant,
    occ: &OccupancyVector,
    norb: usize,
    n_alpha: usize,
    n_beta: usize,
    rng: &mut R,
) -> Determinant {
    if det.is_physical(n_alpha, n_beta) {
        return det;
    }
    let alpha = repair_sector(det.alpha, occ.alpha(norb), n_alpha, rng);
    let beta = repair_sector(det.beta, occ.beta(norb), n_beta, rng);
    Determinant::new(alpha, beta)
}

/// Bitstring form of [`recover_determinant`].
pub fn recover_configuration<R: Rng>(
    bits: &str,
    occ: &OccupancyVector,
    norb: usize,
    n_alpha: usize,
    n_beta: usize,
    rng: &mut R,
) -> Result<String, SqdError> {
    if occ.0.len() != 2 * norb {
        return Err(SqdError::Argument(format!("occupancy vector has {} entries, expected {}", occ.0.len(), 2 * norb)));
    }
    let det = crate::fermion::decode_bitstring(bits, norb)?;
    let out = recover_determinant(det, occ, norb, n_alpha, n_beta, rng);
    Ok(encode_determinant(&out, norb)?)
}

/// Empirical distribution over determinants, drawn by cumulative count.
struct Pool {
    dets: Vec<Determinant>,
    cumulative: Vec<u64>,
}

impl Pool {
    fn new(counts: &BTreeMap<Determinant, u64>) -> Result<Self, SqdError> {
        let mut dets = Vec::with_capacity(counts.len());
        let mut cumulative = Vec::with_capacity(counts.len());
        let mut total = 0u64;
        for (d, &c) in counts {
            if c > 0 {
                total += c;
                dets.push(*d);
                cumulative.push(total);
            }
        }
        if total == 0 {
            return Err(SqdError::Empty);
        }
        Ok(Self { dets, cumulative })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Determinant {
        let total = *self.cumulative.last().expect("pool is non-empty");
        let u = rng.gen_range(0..total);
        self.dets[self.cumulative.partition_point(|&c| c <= u)]
    }
}

fn batches_from_pool(
    pool: &Pool,
    cfg: &SqdConfig,
    carryover: &BTreeSet<Determinant>,
    iteration: usize,
) -> Vec<Vec<Determinant>> {
    (0..cfg.n_batches)
        .map(|b| {
            let mut rng = stream(cfg.seed, &[tag::BATCH, iteration as u64, b as u64]);
            let mut batch: BTreeSet<Determinant> = carryover.clone();
            for _ in 0..cfg.batch_size {
                batch.insert(pool.draw(&mut rng));
            }
            batch.into_iter().collect()
        })
        .collect()
}

/// Draws `cfg.n_batches` batches of `cfg.batch_size` samples (with
/// replacement) from `recovered`, deduplicates them, and adds `carryover`.
/// Batch `b` uses the stream `(cfg.seed, BATCH, iteration, b)`.
pub fn make_batches(
    recovered: &SampleSet,
    norb: usize,
    cfg: &SqdConfig,
    carryover: &BTreeSet<Determinant>,
    iteration: usize,
) -> Result<Vec<Vec<Determinant>>, SqdError> {
    check_width(recovered, norb)?;
    let counts: BTreeMap<Determinant, u64> =
        recovered.words()?.into_iter().map(|(w, c)| (Determinant::from_spin_orbitals(w, norb), c)).collect();
    Ok(batches_from_pool(&Pool::new(&counts)?, cfg, carryover, iteration))
}

struct BatchSolution {
    energy: f64,
    basis: Vec<Determinant>,
    vector: Vec<f64>,
}

fn solve_batches(ham: &FermionHamiltonian, batches: &[Vec<Determinant>]) -> Result<Vec<BatchSolution>, SqdError> {
    batches
        .par_iter()
        .map(|basis| {
            let matrix = project_hamiltonian(ham, basis)?;
            let result = lowest_eigenpair(&matrix, EIGEN_TOL)?;
            Ok(BatchSolution { energy: result.energy, basis: basis.clone(), vector: result.vector })
        })
        .collect()
}

/// `Σ_x |ψ_x|² bit_k(x)` averaged over batches.
fn average_occupancies(solutions: &[BatchSolution], norb: usize) -> OccupancyVector {
    let mut n = vec![0.0; 2 * norb];
    for sol in solutions {
        for (det, c) in sol.basis.iter().zip(&sol.vector) {
            let w = c * c;
            for (k, nk) in n.iter_mut().enumerate() {
                if det.bit(k, norb) {
                    *nk += w;
                }
            }
        }
    }
    let k = solutions.len() as f64;
    n.iter_mut().for_each(|x| *x /= k);
    OccupancyVector(n)
}

/// Runs the full recovery / diagonalization loop and the final expansion.
pub fn sqd_run(ham: &FermionHamiltonian, samples: &SampleSet, cfg: &SqdConfig) -> Result<SqdTrace, SqdError> {
    cfg.check()?;
    let norb = ham.norb();
    let (na, nb) = (ham.n_alpha(), ham.n_beta());
    check_width(samples, norb)?;

    let mut physical: BTreeMap<Determinant, u64> = BTreeMap::new();
    let mut unphysical: Vec<(Determinant, u64)> = Vec::new();
    for (word, count) in samples.words()? {
        let det = Determinant::from_spin_orbitals(word, norb);
        if det.is_physical(na, nb) {
            physical.insert(det, count);
        } else {
            unphysical.push((det, count));
        }
    }
    let physical_shots: u64 = physical.values().sum();
    let discarded_shots = samples.shots - physical_shots;
    if physical_shots == 0 {
        return Err(SqdError::Empty);
    }
    let mut occ = {
        let mut n = vec![0.0; 2 * norb];
        for (det, &c) in &physical {
            for (k, nk) in n.iter_mut().enumerate() {
                if det.bit(k, norb) {
                    *nk += c as f64;
                }
            }
        }
        n.iter_mut().for_each(|x| *x /= physical_shots as f64);
        OccupancyVector(n)
    };

    let mut carryover: BTreeSet<Determinant> = BTreeSet::new();
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut best: Option<BatchSolution> = None;
    let mut convergence = Convergence::MaxIter;

    for iteration in 1..=cfg.max_iterations {
        let mut rng = stream(cfg.seed, &[tag::RECOVERY, iteration as u64]);
        let mut pool_counts = physical.clone();
        for &(det, count) in &unphysical {
            for _ in 0..count {
                let fixed = recover_determinant(det, &occ, norb, na, nb, &mut rng);
                *pool_counts.entry(fixed).or_default() += 1;
            }
        }
        let pool = Pool::new(&pool_counts)?;
        let batches = batches_from_pool(&pool, cfg, &carryover, iteration);
        let solutions = solve_batches(ham, &batches)?;

        let best_batch = solutions
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.energy.total_cmp(&b.1.energy).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
            .expect("at least one batch");
        let new_occ = average_occupancies(&solutions, norb);
        let winner = &solutions[best_batch];
        carryover = winner
            .basis
            .iter()
            .zip(&winner.vector)
            .filter(|(_, c)| c.abs() > cfg.carryover_threshold)
            .map(|(d, _)| *d)
            .collect();

        let min_energy = winner.energy;
        let record = IterationRecord {
            iteration,
            batch_energies: solutions.iter().map(|s| s.energy).collect(),
            min_energy,
            best_batch,
            occupancies: new_occ.clone(),
            batch_dimensions: solutions.iter().map(|s| s.basis.len()).collect(),
            carryover_size: carryover.len(),
        };
        let stop = match records.last() {
            Some(prev) if (min_energy - prev.min_energy).abs() < cfg.energy_tol => Some(Convergence::Energy),
            Some(_) if new_occ.max_abs_diff(&occ) < cfg.occupancy_tol => Some(Convergence::Occupancy),
            _ => None,
        };
        records.push(record);
        best = solutions.into_iter().nth(best_batch);
        occ = new_occ;
        if let Some(reason) = stop {
            convergence = reason;
            break;
        }
    }

    let best = best.expect("at least one iteration ran");
    let (e_ext, ext_dimension) = extsqd_expand(ham, &best.basis, &best.vector, cfg)?;
    Ok(SqdTrace {
        norb,
        n_alpha: na,
        n_beta: nb,
        physical_shots,
        discarded_shots,
        e_first: records[0].min_energy,
        e_last: records.last().expect("non-empty").min_energy,
        iterations: records,
        convergence,
        final_basis: best.basis.iter().map(|d| encode_determinant(d, norb)).collect::<Result<_, _>>()?,
        final_vector: best.vector,
        e_ext,
        ext_dimension,
    })
}

/// Adds every single excitation of the determinants with `|c| >
/// cfg.extsqd_ci_threshold` to `basis` and returns the lowest eigenvalue of
/// the enlarged subspace with its dimension.
pub fn extsqd_expand(
    ham: &FermionHamiltonian,
    basis: &[Determinant],
    coefficients: &[f64],
    cfg: &SqdConfig,
) -> Result<(f64, usize), SqdError> {
    if basis.is_empty() {
        return Err(SqdError::Argument("ext-SQD needs a non-empty basis".into()));
    }
    if basis.len() != coefficients.len() {
        return Err(SqdError::Argument(format!(
            "{} coefficients for {} determinants",
            coefficients.len(),
            basis.len()
        )));
    }
    let present: BTreeSet<Determinant> = basis.iter().copied().collect();
    let mut extra: BTreeSet<Determinant> = BTreeSet::new();
    for (det, c) in basis.iter().zip(coefficients) {
        if c.abs() > cfg.extsqd_ci_threshold {
            extra.extend(single_excitations(det, ham.norb()).into_iter().filter(|d| !present.contains(d)));
        }
    }
    let mut expanded = basis.to_vec();
    expanded.extend(extra);
    let matrix = project_hamiltonian(ham, &expanded)?;
    let result = lowest_eigenpair(&matrix, EIGEN_TOL)?;
    Ok((result.energy, expanded.len()))
}

/// Bitstring-level entry point for ext-SQD on a saved trace.
pub fn extsqd_from_trace(
    ham: &FermionHamiltonian,
    trace: &SqdTrace,
    cfg: &SqdConfig,
) -> Result<(f64, usize), SqdError> {
    let basis: Vec<Determinant> =
        trace.final_basis.iter().map(|b| crate::fermion::decode_bitstring(b, ham.norb())).collect::<Result<_, _>>()?;
    extsqd_expand(ham, &basis, &trace.final_vector, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::fci_ground_state;
    use crate::fcidump::make_hubbard_chain;
    use crate::fermion::{full_basis, hartree_fock_det, slater_condon_element};
    use crate::rng::StreamRng;
    use crate::sampler::{sample_counts, NoiseModel, Wavefunction};
    use rand::SeedableRng;

    fn set(pairs: &[(&str, u64)]) -> SampleSet {
        SampleSet::from_counts("t", pairs.iter().map(|(k, c)| (k.to_string(), *c)).collect()).unwrap()
    }

    #[test]
    fn postselect_examples() {
        let (phys, dropped) = postselect(&set(&[("0101", 50), ("0111", 50)]), 2, 1, 1).unwrap();
        assert_eq!(phys.counts, BTreeMap::from([("0101".to_string(), 50)]));
        assert_eq!(dropped, 50);
        let (_, dropped) = postselect(&set(&[("0101", 5), ("1010", 5)]), 2, 1, 1).unwrap();
        assert_eq!(dropped, 0);
        assert!(matches!(postselect(&set(&[("01", 1)]), 2, 1, 1), Err(SqdError::Width { .. })));
    }

    #[test]
    fn occupancy_examples() {
        assert_eq!(estimate_occupancies(&set(&[("0101", 10)]), 2).unwrap().0, vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(estimate_occupancies(&set(&[("0101", 5), ("1010", 5)]), 2).unwrap().0, vec![0.5; 4]);
        assert_eq!(estimate_occupancies(&set(&[]), 2), Err(SqdError::Empty));
    }

    #[test]
    fn recovery_leaves_physical_alone() {
        let occ = OccupancyVector(vec![0.5; 4]);
        let mut rng = StreamRng::seed_from_u64(1);
        assert_eq!(recover_configuration("0110", &occ, 2, 1, 1, &mut rng).unwrap(), "0110");
    }

    #[test]
    fn recovery_zero_weight_orbital() {
        // α sector "11" (both set), target 1, n_α = (1, 0): orbital 1 is always emptied.
        let occ = OccupancyVector(vec![1.0, 0.0, 1.0, 0.0]);
        let mut rng = StreamRng::seed_from_u64(2);
        for _ in 0..1000 {
            let out = recover_configuration("0111", &occ, 2, 1, 1, &mut rng).unwrap();
            assert_eq!(out, "0101");
        }
    }

    #[test]
    fn recovery_fills_missing_electrons() {
        let occ = OccupancyVector(vec![0.0, 1.0, 1.0, 0.0]);
        let mut rng = StreamRng::seed_from_u64(2);
        // Both sectors empty: α gets orbital 1, β gets orbital 0.
        assert_eq!(recover_configuration("0000", &occ, 2, 1, 1, &mut rng).unwrap(), "0110");
    }

    #[test]
    fn batches_examples() {
        let cfg = SqdConfig { n_batches: 2, batch_size: 3, ..SqdConfig::default() };
        let one = set(&[("0101", 9)]);
        let batches = make_batches(&one, 2, &cfg, &BTreeSet::new(), 1).unwrap();
        let d = Determinant::from_occupied(&[0], &[0]);
        assert_eq!(batches, vec![vec![d], vec![d]]);

        let many = set(&[("0101", 1), ("0110", 1), ("1001", 1), ("1010", 1)]);
        let star = Determinant::from_occupied(&[1], &[1]);
        let carry = BTreeSet::from([star]);
        let cfg = SqdConfig { n_batches: 4, batch_size: 1, ..SqdConfig::default() };
        let batches = make_batches(&many, 2, &cfg, &carry, 1).unwrap();
        assert!(batches.iter().all(|b| b.contains(&star)));
        assert_eq!(batches, make_batches(&many, 2, &cfg, &carry, 1).unwrap());
    }

    #[test]
    fn dimer_exact_sampling_recovers_fci() {
        let ham = make_hubbard_chain(2, 4.0, 1.0, 1, 1).unwrap();
        let fci = fci_ground_state(&ham).unwrap();
        let wf = Wavefunction::from_fci(2, &fci).unwrap();
        let samples = sample_counts("dimer", &wf, 20_000, &NoiseModel::noiseless(), 5).unwrap();
        let cfg = SqdConfig { batch_size: 100, ..SqdConfig::default() };
        let trace = sqd_run(&ham, &samples, &cfg).unwrap();
        assert_eq!(trace.discarded_shots, 0);
        assert!((trace.e_first - fci.energy).abs() < 1e-10);
        assert!((trace.e_ext - fci.energy).abs() < 1e-10);
        assert_eq!(trace.convergence, Convergence::Energy);
    }

    #[test]
    fn hartree_fock_only_samples() {
        let ham = make_hubbard_chain(4, 4.0, 1.0, 2, 2).unwrap();
        let hf = hartree_fock_det(4, 2, 2).unwrap();
        let samples =
            sample_counts("hf", &Wavefunction::single(4, hf).unwrap(), 100, &NoiseModel::noiseless(), 1).unwrap();
        let cfg = SqdConfig { n_batches: 1, ..SqdConfig::default() };
        let trace = sqd_run(&ham, &samples, &cfg).unwrap();
        assert_eq!(trace.e_first, slater_condon_element(&ham, &hf, &hf).unwrap());
        assert!(trace.e_ext <= trace.e_last + 1e-10);
    }

    #[test]
    fn nothing_physical_is_an_error() {
        let ham = make_hubbard_chain(2, 4.0, 1.0, 1, 1).unwrap();
        assert_eq!(sqd_run(&ham, &set(&[("0000", 10)]), &SqdConfig::default()), Err(SqdError::Empty));
        assert!(matches!(sqd_run(&ham, &set(&[("000000", 10)]), &SqdConfig::default()), Err(SqdError::Width { .. })));
    }

    #[test]
    fn extsqd_examples() {
        let ham = make_hubbard_chain(2, 4.0, 1.0, 1, 1).unwrap();
        let fci = fci_ground_state(&ham).unwrap();
        let cfg = SqdConfig::default();

        let full = full_basis(2, 1, 1);
        let coeffs: Vec<f64> = full.iter().map(|d| fci.coefficients[d]).collect();
        let (e, dim) = extsqd_expand(&ham, &full, &coeffs, &cfg).unwrap();
        assert!((e - fci.energy).abs() < 1e-12);
        assert_eq!(dim, 4);

        // HF plus its two singles: H = [[4,-1,-1],[-1,0,0],[-1,0,0]] in basis
        // (HF, α 0→1, β 0→1) → lowest eigenvalue 2 - sqrt(6).
        let hf = hartree_fock_det(2, 1, 1).unwrap();
        let (e, dim) = extsqd_expand(&ham, &[hf], &[1.0], &cfg).unwrap();
        assert_eq!(dim, 3);
        assert!((e - (2.0 - 6f64.sqrt())).abs() < 1e-12, "{e}");
        assert!(e <= 4.0);

        let tiny = SqdConfig { extsqd_ci_threshold: 2.0, ..cfg };
        let (e, dim) = extsqd_expand(&ham, &[hf], &[1.0], &tiny).unwrap();
        assert_eq!((e, dim), (4.0, 1));
        assert!(extsqd_expand(&ham, &[], &[], &cfg).is_err());
    }

    #[test]
    fn eq4_occupancies_conserve_particles() {
        let ham = make_hubbard_chain(4, 4.0, 1.0, 2, 2).unwrap();
        let fci = fci_ground_state(&ham).unwrap();
        let wf = Wavefunction::from_fci(4, &fci).unwrap();
        let noise = NoiseModel { p_readout: 0.05, p_xtalk: 0.0, ..NoiseModel::default() };
        let samples = sample_counts("h4", &wf, 5000, &noise, 9).unwrap();
        let cfg = SqdConfig { batch_size: 20, seed: 3, ..SqdConfig::default() };
        let trace = sqd_run(&ham, &samples, &cfg).unwrap();
        for rec in &trace.iterations {
            let occ = &rec.occupancies;
            assert!(occ.0.iter().all(|x| (0.0..=1.0 + 1e-12).contains(x)));
            assert!((occ.alpha(4).iter().sum::<f64>() - 2.0).abs() < 1e-9);
            assert!((occ.beta(4).iter().sum::<f64>() - 2.0).abs() < 1e-9);
        }
        assert_eq!(trace, sqd_run(&ham, &samples, &cfg).unwrap());
    }
}
