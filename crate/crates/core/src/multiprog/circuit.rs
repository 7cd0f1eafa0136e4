use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::layout::{validate_partition, PartitionPlan, QubitLayout};
use super::PlanError;
use crate::sampler::SampleSet;

/// Default tolerance (radians) below which a rotation counts as identity.
pub const DEFAULT_ANGLE_TOL: f64 = 1e-8;

/// Opaque gate: the composer never interprets names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
}

impl Gate {
    pub fn new(name: &str, qubits: &[usize]) -> Self {
        Self { name: name.to_string(), qubits: qubits.to_vec(), angle: None }
    }

    pub fn rotation(name: &str, qubits: &[usize], angle: f64) -> Self {
        Self { name: name.to_string(), qubits: qubits.to_vec(), angle: Some(angle) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalRegister {
    pub label: String,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Measurement {
    pub qubit: usize,
    pub register: String,
    pub bit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractCircuit {
    pub qubits: Vec<usize>,
    pub gates: Vec<Gate>,
    pub registers: Vec<ClassicalRegister>,
    pub measurements: Vec<Measurement>,
    /// Sub-experiment labels, in register order.
    #[serde(default)]
    pub metadata: Vec<String>,
}

impl AbstractCircuit {
    /// Circuit over a layout's qubits whose system qubits are measured, in
    /// order, into a register named after the layout.
    pub fn for_layout(layout: &QubitLayout, gates: Vec<Gate>) -> Result<Self, PlanError> {
        let mut qubits: Vec<usize> = layout.all_qubits().collect();
        qubits.sort_unstable();
        let circuit = Self {
            qubits,
            gates,
            registers: vec![ClassicalRegister { label: layout.label.clone(), size: layout.system_qubits.len() }],
            measurements: layout
                .system_qubits
                .iter()
                .enumerate()
                .map(|(bit, &qubit)| Measurement { qubit, register: layout.label.clone(), bit })
                .collect(),
            metadata: vec![layout.label.clone()],
        };
        circuit.check()?;
        Ok(circuit)
    }

    /// Total measured bits; width of composite sample keys.
    pub fn measured_width(&self) -> usize {
        self.registers.iter().map(|r| r.size).sum()
    }

    /// Offset of each register's block in a composite key (first register is
    /// least significant).
    pub fn register_offsets(&self) -> Vec<usize> {
        self.registers
            .iter()
            .scan(0, |acc, r| {
                let start = *acc;
                *acc += r.size;
                Some(start)
            })
            .collect()
    }

    pub fn check(&self) -> Result<(), PlanError> {
        let used: BTreeSet<usize> = self.qubits.iter().copied().collect();
        if used.len() != self.qubits.len() {
            return Err(PlanError::Invalid("circuit lists a qubit twice".into()));
        }
        for gate in &self.gates {
            if let Some(q) = gate.qubits.iter().find(|q| !used.contains(q)) {
                return Err(PlanError::Invalid(format!("gate {} acts on undeclared qubit {q}", gate.name)));
            }
        }
        let sizes: BTreeMap<&str, usize> = self.registers.iter().map(|r| (r.label.as_str(), r.size)).collect();
        if sizes.len() != self.registers.len() {
            return Err(PlanError::Naming("register labels are not unique".into()));
        }
        let mut measured_qubits = BTreeSet::new();
        let mut bits = BTreeSet::new();
        for m in &self.measurements {
            if !used.contains(&m.qubit) {
                return Err(PlanError::Invalid(format!("measured qubit {} is not in the circuit", m.qubit)));
            }
            if !measured_qubits.insert(m.qubit) {
                return Err(PlanError::Invalid(format!("qubit {} is measured twice", m.qubit)));
            }
            let size = sizes
                .get(m.register.as_str())
                .ok_or_else(|| PlanError::Invalid(format!("unknown register '{}'", m.register)))?;
            if m.bit >= *size || !bits.insert((m.register.as_str(), m.bit)) {
                return Err(PlanError::Invalid(format!("register '{}' bit {} mapped badly", m.register, m.bit)));
            }
        }
        if bits.len() != self.measured_width() {
            return Err(PlanError::Invalid("register sizes do not match measurement count".into()));
        }
        Ok(())
    }
}

/// Merges labeled sub-circuits into one job over `plan`.
///
/// Gates are concatenated in layout order. Each label gets its own register,
/// and the layout's system qubits are measured into it in order.
pub fn compose_experiments(
    subcircuits: &[(String, AbstractCircuit)],
    plan: &PartitionPlan,
) -> Result<AbstractCircuit, PlanError> {
    let mut by_label: BTreeMap<&str, &AbstractCircuit> = BTreeMap::new();
    for (label, circuit) in subcircuits {
        if by_label.insert(label.as_str(), circuit).is_some() {
            return Err(PlanError::Naming(format!("duplicate sub-experiment label '{label}'")));
        }
    }
    let violations = validate_partition(plan);
    if !violations.is_empty() {
        return Err(PlanError::Violations(violations));
    }
    if subcircuits.len() != plan.layouts.len() {
        return Err(PlanError::Invalid(format!(
            "{} sub-circuits for {} layouts",
            subcircuits.len(),
            plan.layouts.len()
        )));
    }
    let mut out = AbstractCircuit {
        qubits: Vec::new(),
        gates: Vec::new(),
        registers: Vec::new(),
        measurements: Vec::new(),
        metadata: Vec::new(),
    };
    for layout in &plan.layouts {
        let circuit = by_label
            .get(layout.label.as_str())
            .ok_or_else(|| PlanError::Invalid(format!("no sub-circuit labeled '{}'", layout.label)))?;
        circuit.check()?;
        let allowed: BTreeSet<usize> = layout.all_qubits().collect();
        if let Some(q) = circuit.qubits.iter().find(|q| !allowed.contains(q)) {
            return Err(PlanError::Invalid(format!(
                "sub-circuit '{}' uses qubit {q} outside its layout",
                layout.label
            )));
        }
        if circuit.measured_width() != layout.system_qubits.len() {
            return Err(PlanError::Invalid(format!(
                "sub-circuit '{}' measures {} bits, layout has {} system qubits",
                layout.label,
                circuit.measured_width(),
                layout.system_qubits.len()
            )));
        }
        out.qubits.extend(layout.all_qubits());
        out.gates.extend(circuit.gates.iter().cloned());
        out.registers.push(ClassicalRegister { label: layout.label.clone(), size: layout.system_qubits.len() });
        out.measurements.extend(layout.system_qubits.iter().enumerate().map(|(bit, &qubit)| Measurement {
            qubit,
            register: layout.label.clone(),
            bit,
        }));
        out.metadata.push(layout.label.clone());
    }
    out.qubits.sort_unstable();
    out.check()?;
    Ok(out)
}

/// Distance from `angle` to the nearest multiple of 2π.
fn angle_from_identity(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    r.min(TAU - r)
}

/// Drops near-identity rotations and folds consecutive same-name rotations on
/// identical operands, repeating until nothing changes.
///
/// Two rotations are consecutive when no gate between them touches any of
/// their qubits. Gates without an angle are never changed.
pub fn peephole_simplify(circuit: &AbstractCircuit, angle_tol: f64) -> AbstractCircuit {
    let mut gates = circuit.gates.clone();
    loop {
        let before = gates.len();
        let mut out: Vec<Gate> = Vec::with_capacity(gates.len());
        // Index in `out` of the last gate touching each qubit.
        let mut last_on: BTreeMap<usize, usize> = BTreeMap::new();
        for gate in gates {
            if let Some(angle) = gate.angle {
                if angle_from_identity(angle) <= angle_tol {
                    continue;
                }
                let previous: BTreeSet<Option<&usize>> = gate.qubits.iter().map(|q| last_on.get(q)).collect();
                if previous.len() == 1 {
                    if let Some(Some(&idx)) = previous.iter().next() {
                        let prev = &mut out[idx];
                        if prev.name == gate.name && prev.qubits == gate.qubits {
                            if let Some(a) = prev.angle.as_mut() {
                                *a += angle;
                                continue;
                            }
                        }
                    }
                }
            }
            let idx = out.len();
            for &q in &gate.qubits {
                last_on.insert(q, idx);
            }
            out.push(gate);
        }
        // Folding can produce new identities.
        out.retain(|g| g.angle.is_none_or(|a| angle_from_identity(a) > angle_tol));
        gates = out;
        if gates.len() == before {
            break;
        }
    }
    AbstractCircuit { gates, ..circuit.clone() }
}

/// Marginalizes composite counts onto each register.
pub fn split_results(samples: &SampleSet, circuit: &AbstractCircuit) -> Result<Vec<SampleSet>, PlanError> {
    let width = circuit.measured_width();
    let offsets = circuit.register_offsets();
    let mut outputs: Vec<BTreeMap<String, u64>> = vec![BTreeMap::new(); circuit.registers.len()];
    for (key, &count) in &samples.counts {
        if key.len() != width {
            return Err(PlanError::Format(format!("sample key width {} != measured width {width}", key.len())));
        }
        for ((reg, &offset), out) in circuit.registers.iter().zip(&offsets).zip(outputs.iter_mut()) {
            // Block [offset, offset + size) counted from the right.
            let end = width - offset;
            let part = &key[end - reg.size..end];
            *out.entry(part.to_string()).or_default() += count;
        }
    }
    circuit
        .registers
        .iter()
        .zip(outputs)
        .map(|(reg, counts)| SampleSet::from_counts(&reg.label, counts).map_err(|e| PlanError::Format(e.to_string())))
        .collect()
}
