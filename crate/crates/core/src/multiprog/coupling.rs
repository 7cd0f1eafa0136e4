use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::PlanError;

/// Undirected qubit connectivity with optional per-qubit fault flags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CouplingMapData", into = "CouplingMapData")]
pub struct CouplingMap {
    num_qubits: usize,
    edges: Vec<(usize, usize)>,
    faulty: Vec<bool>,
    adjacency: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CouplingMapData {
    num_qubits: usize,
    edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    faulty: Vec<usize>,
}

impl TryFrom<CouplingMapData> for CouplingMap {
    type Error = PlanError;

    fn try_from(data: CouplingMapData) -> Result<Self, Self::Error> {
        let mut map = CouplingMap::new(data.num_qubits, data.edges)?;
        for q in data.faulty {
            map.set_faulty(q, true)?;
        }
        Ok(map)
    }
}

impl From<CouplingMap> for CouplingMapData {
    fn from(map: CouplingMap) -> Self {
        let faulty = (0..map.num_qubits).filter(|&q| map.faulty[q]).collect();
        Self { num_qubits: map.num_qubits, edges: map.edges, faulty }
    }
}

impl CouplingMap {
    /// Edges are normalized to `(min, max)`, sorted and deduplicated.
    pub fn new(num_qubits: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, PlanError> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= num_qubits || b >= num_qubits {
                return Err(PlanError::UnknownQubit(a.max(b)));
            }
            if a == b {
                return Err(PlanError::Invalid(format!("self-loop on qubit {a}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); num_qubits];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        adjacency.iter_mut().for_each(|n| n.sort_unstable());
        Ok(Self { num_qubits, edges, faulty: vec![false; num_qubits], adjacency })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.adjacency[q]
    }

    pub fn degree(&self, q: usize) -> usize {
        self.adjacency[q].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_faulty(&self, q: usize) -> bool {
        self.faulty.get(q).copied().unwrap_or(false)
    }

    pub fn set_faulty(&mut self, q: usize, faulty: bool) -> Result<(), PlanError> {
        self.check(q)?;
        self.faulty[q] = faulty;
        Ok(())
    }

    pub fn check(&self, q: usize) -> Result<(), PlanError> {
        if q < self.num_qubits {
            Ok(())
        } else {
            Err(PlanError::UnknownQubit(q))
        }
    }

    pub fn is_connected(&self) -> bool {
        self.num_qubits == 0 || self.distances_from(0).iter().all(Option::is_some)
    }

    /// Breadth-first hop counts from `source`; `None` for unreachable qubits.
    pub fn distances_from(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.num_qubits];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].expect("queued vertices have a distance");
            for &v in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

/// Shortest-path hop count between two qubits.
pub fn graph_distance(map: &CouplingMap, u: usize, v: usize) -> Result<usize, PlanError> {
    map.check(u)?;
    map.check(v)?;
    map.distances_from(u)[v].ok_or(PlanError::Disconnected(u, v))
}

/// Heavy-hex lattice: `rows` horizontal chains of `cols` qubits, consecutive
/// chains joined by bridge qubits. Between chain `r` and `r+1` the bridges sit
/// on columns `c ≡ 0 (mod 4)` when `r` is even and `c ≡ 2 (mod 4)` when `r` is
/// odd, so no chain qubit touches two bridges.
///
/// Numbering is row-major: chain 0, the bridges below it (left to right),
/// chain 1, and so on.
pub fn heavy_hex_map(rows: usize, cols: usize) -> Result<CouplingMap, PlanError> {
    if rows < 1 || cols < 2 || (rows > 1 && cols < 3) {
        return Err(PlanError::Invalid(format!(
            "heavy-hex needs rows >= 1 and cols >= 2 (cols >= 3 with several rows), got ({rows}, {cols})"
        )));
    }
    let mut edges = Vec::new();
    let mut next = 0;
    let mut prev_chain: Option<usize> = None;
    let mut pending_bridges: Vec<(usize, usize)> = Vec::new();
    for r in 0..rows {
        let start = next;
        next += cols;
        for c in 0..cols - 1 {
            edges.push((start + c, start + c + 1));
        }
        if prev_chain.is_some() {
            for &(bridge, col) in &pending_bridges {
                edges.push((bridge, start + col));
            }
        }
        pending_bridges.clear();
        if r + 1 < rows {
            let offset = if r % 2 == 0 { 0 } else { 2 };
            for col in (offset..cols).step_by(4) {
                let bridge = next;
                next += 1;
                edges.push((start + col, bridge));
                pending_bridges.push((bridge, col));
            }
        }
        prev_chain = Some(start);
    }
    CouplingMap::new(next, edges)
}
