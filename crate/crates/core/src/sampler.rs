//! Measurement sampling from a reference wavefunction with readout and
//! cross-talk noise.
//!
//! Each shot of a sub-experiment draws a determinant with probability `|c|²`.
//! In a parallel job the per-register draws are concatenated into a composite
//! word (first layout in the least-significant block), cross-talk flips pairs
//! of bits that sit on nearby qubits of different layouts, and finally every
//! bit suffers an independent symmetric readout flip.
//!
//! Cross-talk: a pair of measured qubits from different layouts at graph
//! distance `d <= xtalk_max_hops` flips jointly with probability
//! `p_xtalk * xtalk_decay^(d-1)`. Pairs are visited in ascending
//! `(bit, bit)` order. Ancilla qubits are never measured.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigen::FciSolution;
use crate::fermion::{format_bits, parse_bits, Determinant, FermionError};
use crate::multiprog::{validate_partition, PartitionPlan, PlanError, Violation};
use crate::rng::{derive_seed, tag, StreamRng};

pub const DEFAULT_SHOTS: u64 = 200_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("wavefunction norm² is {0}, expected 1 within 1e-8")]
    Normalization(f64),
    #[error("invalid noise model: {0}")]
    Noise(String),
    #[error("invalid sample set: {0}")]
    Samples(String),
    #[error("{0}")]
    Argument(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Fermion(#[from] FermionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub p_readout: f64,
    pub p_xtalk: f64,
    pub xtalk_decay: f64,
    pub xtalk_max_hops: usize,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { p_readout: 0.01, p_xtalk: 0.01, xtalk_decay: 0.25, xtalk_max_hops: 3 }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self { p_readout: 0.0, p_xtalk: 0.0, ..Self::default() }
    }

    pub fn without_crosstalk(self) -> Self {
        Self { p_xtalk: 0.0, ..self }
    }

    pub fn check(&self) -> Result<(), SamplerError> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(SamplerError::Noise(format!("{name}={p} outside [0, 1]")))
            }
        };
        prob("p_readout", self.p_readout)?;
        prob("p_xtalk", self.p_xtalk)?;
        if !(self.xtalk_decay > 0.0 && self.xtalk_decay <= 1.0) {
            return Err(SamplerError::Noise(format!("xtalk_decay={} outside (0, 1]", self.xtalk_decay)));
        }
        if self.xtalk_max_hops < 1 {
            return Err(SamplerError::Noise("xtalk_max_hops must be >= 1".into()));
        }
        Ok(())
    }

    /// Joint-flip probability for a pair `hops` apart.
    pub fn pair_probability(&self, hops: usize) -> f64 {
        if hops == 0 || hops > self.xtalk_max_hops {
            0.0
        } else {
            self.p_xtalk * self.xtalk_decay.powi(hops as i32 - 1)
        }
    }
}

/// Multiset of measured bitstrings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SampleSetData")]
pub struct SampleSet {
    pub label: String,
    pub shots: u64,
    pub counts: BTreeMap<String, u64>,
}

#[derive(Deserialize)]
struct SampleSetData {
    label: String,
    shots: u64,
    counts: BTreeMap<String, u64>,
}

impl TryFrom<SampleSetData> for SampleSet {
    type Error = SamplerError;

    fn try_from(data: SampleSetData) -> Result<Self, Self::Error> {
        let set = SampleSet::from_counts(&data.label, data.counts)?;
        if set.shots != data.shots {
            return Err(SamplerError::Samples(format!("shots={} but counts sum to {}", data.shots, set.shots)));
        }
        Ok(set)
    }
}

impl SampleSet {
    /// Validates key width and alphabet; zero counts are dropped.
    pub fn from_counts(label: &str, counts: BTreeMap<String, u64>) -> Result<Self, SamplerError> {
        let mut width = None;
        for key in counts.keys() {
            if key.chars().any(|c| c != '0' && c != '1') {
                return Err(SamplerError::Samples(format!("key {key:?} is not a bitstring")));
            }
            match width {
                None => width = Some(key.len()),
                Some(w) if w != key.len() => {
                    return Err(SamplerError::Samples(format!("mixed key widths {w} and {}", key.len())))
                }
                _ => {}
            }
        }
        let counts: BTreeMap<String, u64> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
        let shots = counts.values().sum();
        Ok(Self { label: label.to_string(), shots, counts })
    }

    pub fn width(&self) -> Option<usize> {
        self.counts.keys().next().map(String::len)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sample sets always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, SamplerError> {
        serde_json::from_str(text).map_err(|e| SamplerError::Samples(e.to_string()))
    }

    pub(crate) fn from_words(label: &str, width: usize, words: HashMap<u128, u64>) -> Self {
        let counts: BTreeMap<String, u64> = words.into_iter().map(|(w, c)| (format_bits(w, width), c)).collect();
        let shots = counts.values().sum();
        Self { label: label.to_string(), shots, counts }
    }

    /// Keys as integers (bit `k` = logical bit `k`) with their counts, in key order.
    pub fn words(&self) -> Result<Vec<(u128, u64)>, SamplerError> {
        let Some(width) = self.width() else {
            return Ok(Vec::new());
        };
        self.counts.iter().map(|(k, &c)| Ok((parse_bits(k, width)?, c))).collect()
    }
}

/// Real amplitudes over determinants of `norb` spatial orbitals.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    pub norb: usize,
    pub amplitudes: BTreeMap<Determinant, f64>,
}

impl Wavefunction {
    pub fn new(norb: usize, amplitudes: BTreeMap<Determinant, f64>) -> Result<Self, SamplerError> {
        for d in amplitudes.keys() {
            d.check(norb)?;
        }
        if 2 * norb > 128 {
            return Err(SamplerError::Argument("at most 64 orbitals can be sampled".into()));
        }
        Ok(Self { norb, amplitudes })
    }

    pub fn from_fci(norb: usize, fci: &FciSolution) -> Result<Self, SamplerError> {
        Self::new(norb, fci.coefficients.clone())
    }

    pub fn single(norb: usize, det: Determinant) -> Result<Self, SamplerError> {
        Self::new(norb, BTreeMap::from([(det, 1.0)]))
    }

    pub fn width(&self) -> usize {
        2 * self.norb
    }
}

/// Inverse-CDF sampler over a wavefunction's `|c|²`.
struct Distribution {
    words: Vec<u128>,
    cumulative: Vec<f64>,
}

impl Distribution {
    fn new(wf: &Wavefunction) -> Result<Self, SamplerError> {
        let mut words = Vec::new();
        let mut cumulative = Vec::new();
        let mut total = 0.0;
        for (det, c) in &wf.amplitudes {
            let p = c * c;
            if p > 0.0 {
                total += p;
                words.push(det.spin_orbitals(wf.norb));
                cumulative.push(total);
            }
        }
        if (total - 1.0).abs() > 1e-8 {
            return Err(SamplerError::Normalization(total));
        }
        cumulative.iter_mut().for_each(|c| *c /= total);
        Ok(Self { words, cumulative })
    }

    #[inline]
    fn draw<R: Rng>(&self, rng: &mut R) -> u128 {
        let u: f64 = rng.gen();
        let idx = self.cumulative.partition_point(|&c| c <= u).min(self.words.len() - 1);
        self.words[idx]
    }
}

#[inline]
fn readout<R: Rng>(word: u128, width: usize, p: f64, rng: &mut R) -> u128 {
    if p == 0.0 {
        return word;
    }
    let mut out = word;
    for k in 0..width {
        if rng.gen::<f64>() < p {
            out ^= 1u128 << k;
        }
    }
    out
}

/// Draws `shots` measurements from `wf` with readout noise only.
pub fn sample_counts(
    label: &str,
    wf: &Wavefunction,
    shots: u64,
    noise: &NoiseModel,
    seed: u64,
) -> Result<SampleSet, SamplerError> {
    noise.check()?;
    if shots == 0 {
        return Err(SamplerError::Argument("shots must be >= 1".into()));
    }
    let dist = Distribution::new(wf)?;
    let width = wf.width();
    let mut rng = StreamRng::seed_from_u64(seed);
    let mut counts: HashMap<u128, u64> = HashMap::new();
    for _ in 0..shots {
        let word = dist.draw(&mut rng);
        *counts.entry(readout(word, width, noise.p_readout, &mut rng)).or_default() += 1;
    }
    Ok(SampleSet::from_words(label, width, counts))
}

/// Seed used for register `index` of a parallel job seeded with `seed`.
/// Passing it to [`sample_counts`] reproduces that register without cross-talk.
pub fn register_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, &[tag::REGISTER, index as u64])
}

/// Cross-talk pairs of a plan, in composite-bit coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkPairs {
    pub width: usize,
    /// `(low bit, high bit, hops, flip probability)`, sorted by bits.
    pub pairs: Vec<(usize, usize, usize, f64)>,
}

impl CrosstalkPairs {
    pub fn new(plan: &PartitionPlan, noise: &NoiseModel) -> Result<Self, SamplerError> {
        noise.check()?;
        let overlaps: Vec<Violation> = validate_partition(&PartitionPlan { min_buffer: 0, ..plan.clone() });
        if !overlaps.is_empty() {
            return Err(PlanError::Violations(overlaps).into());
        }
        let offsets: Vec<usize> = plan
            .layouts
            .iter()
            .scan(0, |acc, l| {
                let start = *acc;
                *acc += l.system_qubits.len();
                Some(start)
            })
            .collect();
        let width = plan.layouts.iter().map(|l| l.system_qubits.len()).sum();
        if width > 128 {
            return Err(SamplerError::Argument(format!("composite width {width} exceeds 128 bits")));
        }
        let mut pairs = Vec::new();
        if noise.p_xtalk > 0.0 {
            for (i, a) in plan.layouts.iter().enumerate() {
                for (ka, &u) in a.system_qubits.iter().enumerate() {
                    let dist = plan.map.distances_from(u);
                    for (j, b) in plan.layouts.iter().enumerate().skip(i + 1) {
                        for (kb, &v) in b.system_qubits.iter().enumerate() {
                            if let Some(d) = dist[v] {
                                let p = noise.pair_probability(d);
                                if p > 0.0 {
                                    pairs.push((offsets[i] + ka, offsets[j] + kb, d, p));
                                }
                            }
                        }
                    }
                }
            }
        }
        pairs.sort_by_key(|p| (p.0, p.1));
        Ok(Self { width, pairs })
    }

    /// Expected number of flipped pairs per shot.
    pub fn expected_flips(&self) -> f64 {
        self.pairs.iter().map(|p| p.3).sum()
    }

    /// Variance of the per-shot flipped-pair count.
    pub fn flip_variance(&self) -> f64 {
        self.pairs.iter().map(|p| p.3 * (1.0 - p.3)).sum()
    }

    /// Applies the pair flips; returns the new word and the number of flipped pairs.
    #[inline]
    pub fn apply<R: Rng>(&self, word: u128, rng: &mut R) -> (u128, usize) {
        let mut out = word;
        let mut flipped = 0;
        for &(a, b, _, p) in &self.pairs {
            if rng.gen::<f64>() < p {
                out ^= (1u128 << a) | (1u128 << b);
                flipped += 1;
            }
        }
        (out, flipped)
    }
}

/// String-level cross-talk on one composite bitstring.
pub fn apply_crosstalk<R: Rng>(
    joint_bits: &str,
    plan: &PartitionPlan,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<String, SamplerError> {
    let pairs = CrosstalkPairs::new(plan, noise)?;
    if joint_bits.len() != pairs.width {
        return Err(PlanError::Format(format!(
            "composite bitstring has {} bits, plan measures {}",
            joint_bits.len(),
            pairs.width
        ))
        .into());
    }
    let word = parse_bits(joint_bits, pairs.width)?;
    Ok(format_bits(pairs.apply(word, rng).0, pairs.width))
}

/// Runs the shots of a multi-programmed job and hands each final composite
/// word (after cross-talk and readout) to `record`. Returns the register widths.
fn run_parallel(
    wavefns: &[(String, Wavefunction)],
    plan: &PartitionPlan,
    shots: u64,
    noise: &NoiseModel,
    seed: u64,
    mut record: impl FnMut(u128),
) -> Result<Vec<usize>, SamplerError> {
    if shots == 0 {
        return Err(SamplerError::Argument("shots must be >= 1".into()));
    }
    if wavefns.len() != plan.layouts.len() {
        return Err(
            PlanError::Invalid(format!("{} wavefunctions for {} layouts", wavefns.len(), plan.layouts.len())).into()
        );
    }
    for ((label, wf), layout) in wavefns.iter().zip(&plan.layouts) {
        if wf.width() != layout.system_qubits.len() {
            return Err(PlanError::Invalid(format!(
                "'{label}' needs {} qubits, layout '{}' has {}",
                wf.width(),
                layout.label,
                layout.system_qubits.len()
            ))
            .into());
        }
    }
    let xtalk = CrosstalkPairs::new(plan, noise)?;
    let dists: Vec<Distribution> = wavefns.iter().map(|(_, wf)| Distribution::new(wf)).collect::<Result<_, _>>()?;
    let widths: Vec<usize> = wavefns.iter().map(|(_, wf)| wf.width()).collect();
    let offsets: Vec<usize> = widths
        .iter()
        .scan(0, |acc, w| {
            let s = *acc;
            *acc += w;
            Some(s)
        })
        .collect();
    let mut reg_rngs: Vec<StreamRng> =
        (0..wavefns.len()).map(|i| StreamRng::seed_from_u64(register_seed(seed, i))).collect();
    let mut xtalk_rng = StreamRng::seed_from_u64(derive_seed(seed, &[tag::CROSSTALK]));

    for _ in 0..shots {
        let mut composite = 0u128;
        for (i, dist) in dists.iter().enumerate() {
            composite |= dist.draw(&mut reg_rngs[i]) << offsets[i];
        }
        if !xtalk.pairs.is_empty() {
            composite = xtalk.apply(composite, &mut xtalk_rng).0;
        }
        let mut measured = 0u128;
        for (i, rng) in reg_rngs.iter_mut().enumerate() {
            let mask = if widths[i] == 128 { u128::MAX } else { (1u128 << widths[i]) - 1 };
            let block = (composite >> offsets[i]) & mask;
            measured |= readout(block, widths[i], noise.p_readout, rng) << offsets[i];
        }
        record(measured);
    }
    Ok(widths)
}

/// Samples a multi-programmed job: layout `i` of `plan` runs `wavefns[i]`.
///
/// Register `i` draws from the stream seeded by [`register_seed`]`(seed, i)`,
/// cross-talk from its own stream, so with `p_xtalk = 0` each output equals a
/// serial [`sample_counts`] run with the register seed.
pub fn sample_parallel(
    wavefns: &[(String, Wavefunction)],
    plan: &PartitionPlan,
    shots: u64,
    noise: &NoiseModel,
    seed: u64,
) -> Result<Vec<SampleSet>, SamplerError> {
    let mut counts: Vec<HashMap<u128, u64>> = vec![HashMap::new(); wavefns.len()];
    let widths: Vec<usize> = wavefns.iter().map(|(_, wf)| wf.width()).collect();
    run_parallel(wavefns, plan, shots, noise, seed, |word| {
        let mut offset = 0;
        for (c, &w) in counts.iter_mut().zip(&widths) {
            let mask = if w == 128 { u128::MAX } else { (1u128 << w) - 1 };
            *c.entry((word >> offset) & mask).or_default() += 1;
            offset += w;
        }
    })?;
    Ok(wavefns.iter().zip(counts).zip(widths).map(|(((label, _), c), w)| SampleSet::from_words(label, w, c)).collect())
}

/// Same job as [`sample_parallel`], reported as composite counts over all
/// registers (first layout in the least-significant block).
pub fn sample_joint(
    label: &str,
    wavefns: &[(String, Wavefunction)],
    plan: &PartitionPlan,
    shots: u64,
    noise: &NoiseModel,
    seed: u64,
) -> Result<SampleSet, SamplerError> {
    let mut counts: HashMap<u128, u64> = HashMap::new();
    let widths = run_parallel(wavefns, plan, shots, noise, seed, |word| *counts.entry(word).or_default() += 1)?;
    Ok(SampleSet::from_words(label, widths.iter().sum(), counts))
}
