use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::coupling::{heavy_hex_map, CouplingMap};
use super::PlanError;

/// Maximum DFS expansions per anchor when searching for a chain.
const SEARCH_BUDGET: usize = 200_000;

/// Physical placement of one sub-experiment.
///
/// `system_qubits[k]` carries logical bit `k` of the measured bitstring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitLayout {
    pub label: String,
    pub system_qubits: Vec<usize>,
    #[serde(default)]
    pub ancilla_qubits: Vec<usize>,
}

impl QubitLayout {
    pub fn all_qubits(&self) -> impl Iterator<Item = usize> + '_ {
        self.system_qubits.iter().chain(&self.ancilla_qubits).copied()
    }

    /// Checks the per-layout invariants against `map`.
    pub fn check(&self, map: &CouplingMap) -> Result<(), PlanError> {
        let mut seen = BTreeSet::new();
        for q in self.all_qubits() {
            map.check(q)?;
            if map.is_faulty(q) {
                return Err(PlanError::Invalid(format!("layout '{}' uses faulty qubit {q}", self.label)));
            }
            if !seen.insert(q) {
                return Err(PlanError::Invalid(format!("layout '{}' repeats qubit {q}", self.label)));
            }
        }
        Ok(())
    }
}

/// A set of co-scheduled layouts on one device.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub map: CouplingMap,
    pub layouts: Vec<QubitLayout>,
    /// Required idle-qubit separation: layouts must be at least
    /// `min_buffer + 1` hops apart.
    pub min_buffer: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// A layout breaks its own invariants (unknown, faulty or repeated qubit).
    Layout {
        label: String,
        reason: String,
    },
    Overlap {
        qubit: usize,
        first: String,
        second: String,
    },
    Distance {
        first: String,
        second: String,
        qubits: (usize, usize),
        distance: usize,
        required: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Layout { label, reason } => write!(f, "layout '{label}': {reason}"),
            Violation::Overlap { qubit, first, second } => {
                write!(f, "qubit {qubit} shared by '{first}' and '{second}'")
            }
            Violation::Distance { first, second, qubits, distance, required } => write!(
                f,
                "'{first}' qubit {} and '{second}' qubit {} are {distance} hops apart (need >= {required})",
                qubits.0, qubits.1
            ),
        }
    }
}

/// Every overlap and every cross-layout pair closer than `min_buffer + 1` hops.
pub fn validate_partition(plan: &PartitionPlan) -> Vec<Violation> {
    let mut out = Vec::new();
    for layout in &plan.layouts {
        if let Err(e) = layout.check(&plan.map) {
            out.push(Violation::Layout { label: layout.label.clone(), reason: e.to_string() });
        }
    }
    if !out.is_empty() {
        return out;
    }
    let required = plan.min_buffer + 1;
    for (i, a) in plan.layouts.iter().enumerate() {
        for b in &plan.layouts[i + 1..] {
            let b_qubits: BTreeSet<usize> = b.all_qubits().collect();
            for q in a.all_qubits() {
                if b_qubits.contains(&q) {
                    out.push(Violation::Overlap { qubit: q, first: a.label.clone(), second: b.label.clone() });
                }
            }
            for u in a.all_qubits() {
                let dist = plan.map.distances_from(u);
                for v in b.all_qubits() {
                    if let Some(d) = dist[v] {
                        if d > 0 && d < required {
                            out.push(Violation::Distance {
                                first: a.label.clone(),
                                second: b.label.clone(),
                                qubits: (u, v),
                                distance: d,
                                required,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Minimum hop count between any qubit of `a` and any qubit of `b`.
pub fn layout_distance(map: &CouplingMap, a: &QubitLayout, b: &QubitLayout) -> Option<usize> {
    a.all_qubits()
        .filter_map(|u| {
            let dist = map.distances_from(u);
            b.all_qubits().filter_map(|v| dist[v]).min()
        })
        .min()
}

fn chains_from(map: &CouplingMap, anchor: usize, length: usize, accept: &mut dyn FnMut(&[usize]) -> bool) -> bool {
    let mut path = vec![anchor];
    let mut used = vec![false; map.num_qubits()];
    used[anchor] = true;
    let mut budget = SEARCH_BUDGET;
    fn walk(
        map: &CouplingMap,
        path: &mut Vec<usize>,
        used: &mut [bool],
        length: usize,
        budget: &mut usize,
        accept: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        if path.len() == length {
            return accept(path);
        }
        let last = *path.last().expect("path starts at the anchor");
        for &next in map.neighbors(last) {
            if used[next] || map.is_faulty(next) {
                continue;
            }
            if *budget == 0 {
                return false;
            }
            *budget -= 1;
            used[next] = true;
            path.push(next);
            if walk(map, path, used, length, budget, accept) {
                return true;
            }
            path.pop();
            used[next] = false;
        }
        false
    }
    walk(map, &mut path, &mut used, length, &mut budget, accept)
}

/// Ancilla sites for `chain`: for each chain qubit of degree 3 (in chain
/// order), its lowest-numbered free neighbor off the chain.
fn ancilla_sites(map: &CouplingMap, chain: &[usize]) -> Vec<usize> {
    let on_chain: BTreeSet<usize> = chain.iter().copied().collect();
    let mut taken = BTreeSet::new();
    let mut sites = Vec::new();
    for &q in chain {
        if map.degree(q) != 3 {
            continue;
        }
        if let Some(&a) =
            map.neighbors(q).iter().find(|&&n| !on_chain.contains(&n) && !map.is_faulty(n) && !taken.contains(&n))
        {
            taken.insert(a);
            sites.push(a);
        }
    }
    sites
}

/// Places a connected chain of `2 * norb` system qubits plus `n_ancilla`
/// ancillas hanging off the chain.
///
/// The chain is a depth-first walk from `anchor` (lowest-numbered neighbor
/// first). When no walk from an anchor admits enough ancilla sites, the next
/// anchor (`anchor + 1`, wrapping) is tried.
pub fn plan_zigzag_layout(
    map: &CouplingMap,
    label: &str,
    norb: usize,
    n_ancilla: usize,
    anchor: usize,
) -> Result<QubitLayout, PlanError> {
    place_layout(map, label, norb, n_ancilla, anchor, true, &mut |_| true)
}

/// Shared search behind [`plan_zigzag_layout`]: the first candidate layout
/// that `accept` approves wins. With `wrap`, anchors after `anchor` are tried
/// too.
fn place_layout(
    map: &CouplingMap,
    label: &str,
    norb: usize,
    n_ancilla: usize,
    anchor: usize,
    wrap: bool,
    accept: &mut dyn FnMut(&QubitLayout) -> bool,
) -> Result<QubitLayout, PlanError> {
    map.check(anchor)?;
    let length = 2 * norb;
    let healthy = (0..map.num_qubits()).filter(|&q| !map.is_faulty(q)).count();
    if length == 0 || healthy < length + n_ancilla {
        return Err(PlanError::Placement(format!(
            "need {} healthy qubits for {length} system + {n_ancilla} ancilla, map has {healthy}",
            length + n_ancilla
        )));
    }
    let mut best_sites = 0;
    let mut any_chain = false;
    let anchors = if wrap { map.num_qubits() } else { 1 };
    for offset in 0..anchors {
        let start = (anchor + offset) % map.num_qubits();
        if map.is_faulty(start) {
            continue;
        }
        let mut found = None;
        chains_from(map, start, length, &mut |chain| {
            any_chain = true;
            let sites = ancilla_sites(map, chain);
            best_sites = best_sites.max(sites.len());
            if sites.len() < n_ancilla {
                return false;
            }
            let layout = QubitLayout {
                label: label.to_string(),
                system_qubits: chain.to_vec(),
                ancilla_qubits: sites[..n_ancilla].to_vec(),
            };
            if accept(&layout) {
                found = Some(layout);
                true
            } else {
                false
            }
        });
        if let Some(layout) = found {
            return Ok(layout);
        }
    }
    Err(PlanError::Placement(if any_chain {
        format!("chains of {length} qubits offer at most {best_sites} ancilla sites, {n_ancilla} requested")
    } else {
        format!("no connected chain of {length} healthy qubits exists")
    }))
}

/// Two-layout plans of the kind used for cross-talk studies: two chains of
/// `2 * norb` qubits with `n_ancilla` ancillas each, separated by exactly
/// `buffer` idle qubits, on a `rows x cols` heavy-hex device.
///
/// The first layout is anchored at the start of the middle chain, moving to
/// later anchors when no partner fits; the second
/// takes the first chain (by anchor in qubit order, then walk order) that sits
/// exactly `buffer + 1` hops away, counting both all qubits and system qubits
/// only.
pub fn buffered_pair_plan(
    labels: [&str; 2],
    norb: usize,
    n_ancilla: usize,
    buffer: usize,
    rows: usize,
    cols: usize,
) -> Result<PartitionPlan, PlanError> {
    let map = heavy_hex_map(rows, cols)?;
    let middle_row = rows / 2;
    // Index of the first qubit of chain `middle_row`.
    let mut anchor = 0;
    for r in 0..middle_row {
        let offset = if r % 2 == 0 { 0 } else { 2 };
        anchor += cols + (offset..cols).step_by(4).count();
    }
    let systems = |l: &QubitLayout| QubitLayout { ancilla_qubits: Vec::new(), ..l.clone() };
    let required = Some(buffer + 1);
    for offset in 0..map.num_qubits() {
        let first = plan_zigzag_layout(&map, labels[0], norb, n_ancilla, (anchor + offset) % map.num_qubits())?;
        if first.system_qubits[0] != (anchor + offset) % map.num_qubits() {
            continue;
        }
        let mut blocked = map.clone();
        for q in first.all_qubits() {
            blocked.set_faulty(q, true)?;
        }
        let first_systems = systems(&first);
        for start in 0..map.num_qubits() {
            if blocked.is_faulty(start) {
                continue;
            }
            let placed = place_layout(&blocked, labels[1], norb, n_ancilla, start, false, &mut |candidate| {
                layout_distance(&map, &first, candidate) == required
                    && layout_distance(&map, &first_systems, &systems(candidate)) == required
            });
            if let Ok(second) = placed {
                let plan = PartitionPlan { map, layouts: vec![first, second], min_buffer: buffer };
                debug_assert!(validate_partition(&plan).is_empty());
                return Ok(plan);
            }
        }
    }
    Err(PlanError::Placement(format!(
        "no second layout at exactly {buffer} buffer qubits on a {rows}x{cols} heavy-hex map"
    )))
}
