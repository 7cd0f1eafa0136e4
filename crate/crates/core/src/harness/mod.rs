//! Randomized-block experiment driver, statistics and reports.
//!
//! Each replicate permutes the layout order, then shuffles the
//! `[parallel, serial]` order inside every layout. A parallel run samples all
//! molecules together on the plan (cross-talk on); a serial run samples each
//! molecule alone on the same geometry (cross-talk off). Every run goes through
//! SQD and ext-SQD, and its three checkpoint energies are compared with the
//! exact ground-state energy.

mod report;
mod stats;

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigen::{fci_ground_state, EigenError};
use crate::fcidump::{make_hubbard_chain, parse_fcidump, FcidumpError, FermionHamiltonian};
use crate::multiprog::{bundled_plan, PartitionPlan, PlanError};
use crate::rng::{derive_seed, shuffle, stream, tag};
use crate::sampler::{
    register_seed, sample_counts, sample_parallel, NoiseModel, SamplerError, Wavefunction, DEFAULT_SHOTS,
};
use crate::sqd::{sqd_run, SqdConfig, SqdError};

pub use report::{records_csv, records_json, summaries_csv, summaries_json};
pub use stats::{box_stats, quantile_sorted, summarize, summarize_all, BoxStats, GroupKey, StatsSummary};

pub const HARTREE_TO_KCAL_PER_MOL: f64 = 627.5094740631;

pub fn to_kcal_per_mol(delta_hartree: f64) -> f64 {
    delta_hartree * HARTREE_TO_KCAL_PER_MOL
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("{0}")]
    Argument(String),
    #[error("{0}")]
    Io(String),
    #[error("report error: {0}")]
    Report(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Sqd(#[from] SqdError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Fcidump(#[from] FcidumpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Parallel,
    Serial,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Parallel => "parallel",
            Modality::Serial => "serial",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Checkpoint {
    #[default]
    First,
    Last,
    Ext,
}

impl Checkpoint {
    pub const ALL: [Checkpoint; 3] = [Checkpoint::First, Checkpoint::Last, Checkpoint::Ext];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub layout: String,
    /// Position of the layout in this replicate's execution order.
    pub layout_position: usize,
    pub modality: Modality,
    /// 0 if this modality ran first within its layout, else 1.
    pub modality_position: usize,
    pub molecule: String,
    pub e_first: f64,
    pub e_last: f64,
    pub e_ext: f64,
    pub reference: f64,
    pub dev_first_kcal: f64,
    pub dev_last_kcal: f64,
    pub dev_ext_kcal: f64,
    pub iterations: usize,
    pub ext_dimension: usize,
}

impl ReplicateRecord {
    pub fn energy(&self, checkpoint: Checkpoint) -> f64 {
        match checkpoint {
            Checkpoint::First => self.e_first,
            Checkpoint::Last => self.e_last,
            Checkpoint::Ext => self.e_ext,
        }
    }

    pub fn deviation(&self, checkpoint: Checkpoint) -> f64 {
        match checkpoint {
            Checkpoint::First => self.dev_first_kcal,
            Checkpoint::Last => self.dev_last_kcal,
            Checkpoint::Ext => self.dev_ext_kcal,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Molecule {
    pub label: String,
    pub hamiltonian: FermionHamiltonian,
}

/// A fully resolved experiment. Layout `j` of every plan hosts molecule `j`.
#[derive(Debug, Clone)]
pub struct RbdSpec {
    pub molecules: Vec<Molecule>,
    pub plans: Vec<(String, PartitionPlan)>,
    pub noise: NoiseModel,
    pub sqd: SqdConfig,
    pub shots: u64,
    pub replicates: usize,
    pub seed: u64,
    /// Parallel and serial runs of a (replicate, layout) share their seeds.
    pub shared_seeds: bool,
}

/// Execution order of one replicate: `(plan index, [first modality, second])`.
pub fn replicate_order(seed: u64, replicate: usize, n_plans: usize) -> Vec<(usize, [Modality; 2])> {
    let mut rng = stream(seed, &[tag::ORDER, replicate as u64]);
    let mut layouts: Vec<usize> = (0..n_plans).collect();
    shuffle(&mut rng, &mut layouts);
    layouts
        .into_iter()
        .map(|p| {
            let mut modes = [Modality::Parallel, Modality::Serial];
            shuffle(&mut rng, &mut modes);
            (p, modes)
        })
        .collect()
}

fn run_seed(spec: &RbdSpec, replicate: usize, plan: usize, modality: Modality) -> u64 {
    if spec.shared_seeds {
        derive_seed(spec.seed, &[tag::RUN, replicate as u64, plan as u64])
    } else {
        derive_seed(spec.seed, &[tag::RUN, replicate as u64, plan as u64, modality as u64])
    }
}

struct Task {
    replicate: usize,
    plan: usize,
    layout_position: usize,
    modality: Modality,
    modality_position: usize,
}

fn check_spec(spec: &RbdSpec) -> Result<(), HarnessError> {
    if spec.molecules.is_empty() || spec.plans.is_empty() {
        return Err(HarnessError::Argument("an experiment needs at least one molecule and one plan".into()));
    }
    if spec.replicates == 0 || spec.shots == 0 {
        return Err(HarnessError::Argument("replicates and shots must be >= 1".into()));
    }
    for (id, plan) in &spec.plans {
        if plan.layouts.len() != spec.molecules.len() {
            return Err(PlanError::Invalid(format!(
                "plan '{id}' has {} layouts for {} molecules",
                plan.layouts.len(),
                spec.molecules.len()
            ))
            .into());
        }
    }
    spec.noise.check()?;
    spec.sqd.check()?;
    Ok(())
}

/// Runs the whole randomized-block experiment.
///
/// Records come out in execution order: replicate, layout position, modality
/// position, molecule. Runs execute concurrently; every run draws only from
/// streams derived from `spec.seed`, so the output does not depend on the
/// thread count.
pub fn run_rbd(spec: &RbdSpec) -> Result<Vec<ReplicateRecord>, HarnessError> {
    check_spec(spec)?;
    let references: Vec<(f64, Wavefunction)> = spec
        .molecules
        .iter()
        .map(|m| {
            let fci = fci_ground_state(&m.hamiltonian)?;
            let wf = Wavefunction::from_fci(m.hamiltonian.norb(), &fci)?;
            Ok((fci.energy, wf))
        })
        .collect::<Result<_, HarnessError>>()?;
    let wavefns: Vec<(String, Wavefunction)> =
        spec.molecules.iter().zip(&references).map(|(m, r)| (m.label.clone(), r.1.clone())).collect();

    let mut tasks = Vec::new();
    for replicate in 0..spec.replicates {
        for (layout_position, (plan, modes)) in
            replicate_order(spec.seed, replicate, spec.plans.len()).into_iter().enumerate()
        {
            for (modality_position, modality) in modes.into_iter().enumerate() {
                tasks.push(Task { replicate, plan, layout_position, modality, modality_position });
            }
        }
    }

    let per_task: Vec<Vec<ReplicateRecord>> = tasks
        .par_iter()
        .map(|task| {
            let (plan_id, plan) = &spec.plans[task.plan];
            let seed = run_seed(spec, task.replicate, task.plan, task.modality);
            let samples = match task.modality {
                Modality::Parallel => sample_parallel(&wavefns, plan, spec.shots, &spec.noise, seed)?,
                Modality::Serial => {
                    let noise = spec.noise.without_crosstalk();
                    wavefns
                        .iter()
                        .enumerate()
                        .map(|(j, (label, wf))| sample_counts(label, wf, spec.shots, &noise, register_seed(seed, j)))
                        .collect::<Result<_, _>>()?
                }
            };
            spec.molecules
                .iter()
                .zip(&samples)
                .zip(&references)
                .enumerate()
                .map(|(j, ((molecule, set), (reference, _)))| {
                    let cfg = SqdConfig { seed: derive_seed(seed, &[tag::SQD, j as u64]), ..spec.sqd };
                    let trace = sqd_run(&molecule.hamiltonian, set, &cfg)?;
                    let dev = |e: f64| to_kcal_per_mol((e - reference).abs());
                    Ok(ReplicateRecord {
                        replicate: task.replicate,
                        layout: plan_id.clone(),
                        layout_position: task.layout_position,
                        modality: task.modality,
                        modality_position: task.modality_position,
                        molecule: molecule.label.clone(),
                        e_first: trace.e_first,
                        e_last: trace.e_last,
                        e_ext: trace.e_ext,
                        reference: *reference,
                        dev_first_kcal: dev(trace.e_first),
                        dev_last_kcal: dev(trace.e_last),
                        dev_ext_kcal: dev(trace.e_ext),
                        iterations: trace.iterations.len(),
                        ext_dimension: trace.ext_dimension,
                    })
                })
                .collect::<Result<Vec<_>, HarnessError>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(per_task.into_iter().flatten().collect())
}

/// Molecule entry of an experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeEntry {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fcidump: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hubbard: Option<HubbardEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HubbardEntry {
    pub sites: usize,
    pub u: f64,
    #[serde(default = "unit_hopping")]
    pub t: f64,
    pub n_alpha: usize,
    pub n_beta: usize,
}

fn unit_hopping() -> f64 {
    1.0
}

/// Plan entry of an experiment file: a bundled plan or a plan JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundled: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<String>,
}

fn default_replicates() -> usize {
    10
}

fn default_shots() -> u64 {
    DEFAULT_SHOTS
}

/// On-disk experiment description (JSON or TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbdFile {
    pub molecules: Vec<MoleculeEntry>,
    pub plans: Vec<PlanEntry>,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub sqd: SqdConfig,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub shared_seeds: bool,
}

impl RbdFile {
    /// Loads the referenced FCIDUMP and plan files, relative paths taken from `base`.
    pub fn resolve(&self, base: &Path) -> Result<RbdSpec, HarnessError> {
        let read = |p: &str| {
            let path = base.join(p);
            std::fs::read_to_string(&path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
        };
        let molecules = self
            .molecules
            .iter()
            .map(|m| {
                let hamiltonian = match (&m.fcidump, &m.hubbard) {
                    (Some(path), None) => parse_fcidump(&read(path)?)?,
                    (None, Some(h)) => make_hubbard_chain(h.sites, h.u, h.t, h.n_alpha, h.n_beta)?,
                    _ => {
                        return Err(HarnessError::Argument(format!(
                            "molecule '{}' needs exactly one of `fcidump` or `hubbard`",
                            m.label
                        )))
                    }
                };
                Ok(Molecule { label: m.label.clone(), hamiltonian })
            })
            .collect::<Result<_, HarnessError>>()?;
        let plans = self
            .plans
            .iter()
            .map(|p| {
                let plan = match (p.bundled, &p.plan) {
                    (Some(buffer), None) => bundled_plan(buffer)?,
                    (None, Some(path)) => {
                        serde_json::from_str(&read(path)?).map_err(|e| PlanError::Format(e.to_string()))?
                    }
                    _ => {
                        return Err(HarnessError::Argument(format!(
                            "plan '{}' needs exactly one of `bundled` or `plan`",
                            p.id
                        )))
                    }
                };
                Ok((p.id.clone(), plan))
            })
            .collect::<Result<_, HarnessError>>()?;
        Ok(RbdSpec {
            molecules,
            plans,
            noise: self.noise,
            sqd: self.sqd,
            shots: self.shots,
            replicates: self.replicates,
            seed: self.seed,
            shared_seeds: self.shared_seeds,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiprog::{CouplingMap, QubitLayout};

    fn dimer_spec(replicates: usize) -> RbdSpec {
        let map = CouplingMap::new(10, (0..9).map(|i| (i, i + 1))).unwrap();
        let layout = |label: &str, qubits: [usize; 4]| QubitLayout {
            label: label.into(),
            system_qubits: qubits.to_vec(),
            ancilla_qubits: vec![],
        };
        let plan =
            PartitionPlan { map, layouts: vec![layout("A", [0, 1, 2, 3]), layout("B", [6, 7, 8, 9])], min_buffer: 1 };
        RbdSpec {
            molecules: vec![
                Molecule { label: "u4".into(), hamiltonian: make_hubbard_chain(2, 4.0, 1.0, 1, 1).unwrap() },
                Molecule { label: "u2".into(), hamiltonian: make_hubbard_chain(2, 2.0, 1.0, 1, 1).unwrap() },
            ],
            plans: vec![("p0".into(), plan.clone()), ("p1".into(), plan.clone()), ("p2".into(), plan)],
            noise: NoiseModel::noiseless(),
            sqd: SqdConfig { batch_size: 50, n_batches: 2, ..SqdConfig::default() },
            shots: 2000,
            replicates,
            seed: 11,
            shared_seeds: false,
        }
    }

    #[test]
    fn kcal_conversion() {
        assert_eq!(to_kcal_per_mol(0.0), 0.0);
        assert_eq!(to_kcal_per_mol(1.0), 627.5094740631);
        assert!((to_kcal_per_mol(0.0223) - 14.0).abs() < 0.1);
    }

    #[test]
    fn record_count_and_zero_noise_accuracy() {
        let records = run_rbd(&dimer_spec(4)).unwrap();
        assert_eq!(records.len(), 4 * 3 * 2 * 2);
        assert!(records.iter().all(|r| r.dev_last_kcal < 1e-6));
        assert_eq!(records, run_rbd(&dimer_spec(4)).unwrap());
    }

    #[test]
    fn every_replicate_covers_every_layout_and_modality() {
        for r in 0..20 {
            let order = replicate_order(5, r, 4);
            let mut layouts: Vec<usize> = order.iter().map(|o| o.0).collect();
            layouts.sort_unstable();
            assert_eq!(layouts, vec![0, 1, 2, 3]);
            for (_, modes) in order {
                assert_ne!(modes[0], modes[1]);
            }
        }
    }

    #[test]
    fn plan_molecule_mismatch() {
        let mut spec = dimer_spec(1);
        spec.molecules.pop();
        assert!(matches!(run_rbd(&spec), Err(HarnessError::Plan(_))));
    }
}
