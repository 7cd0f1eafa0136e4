//! Multi-programming: device graphs, layout planning, circuit composition and
//! result splitting.

mod circuit;
mod coupling;
mod layout;

use thiserror::Error;

pub use circuit::{
    compose_experiments, peephole_simplify, split_results, AbstractCircuit, ClassicalRegister, Gate, Measurement,
    DEFAULT_ANGLE_TOL,
};
pub use coupling::{graph_distance, heavy_hex_map, CouplingMap};
pub use layout::{
    buffered_pair_plan, layout_distance, plan_zigzag_layout, validate_partition, PartitionPlan, QubitLayout, Violation,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("unknown qubit {0}")]
    UnknownQubit(usize),
    #[error("qubits {0} and {1} are not connected")]
    Disconnected(usize, usize),
    #[error("placement failed: {0}")]
    Placement(String),
    #[error("naming error: {0}")]
    Naming(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("invalid plan: {0}")]
    Invalid(String),
    #[error("partition violates {} constraint(s): {}", .0.len(), .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Violations(Vec<Violation>),
}

const BUNDLED_PLANS: [&str; 3] = [
    include_str!("../../plans/buffer1.json"),
    include_str!("../../plans/buffer2.json"),
    include_str!("../../plans/buffer3.json"),
];

/// Shipped two-layout plans (8 system + 3 ancilla qubits each) with 1, 2 and
/// 3 buffer qubits between the layouts.
pub fn bundled_plan(buffer: usize) -> Result<PartitionPlan, PlanError> {
    let text = BUNDLED_PLANS
        .get(buffer.wrapping_sub(1))
        .ok_or_else(|| PlanError::Invalid(format!("no bundled plan with {buffer} buffer qubits")))?;
    serde_json::from_str(text).map_err(|e| PlanError::Format(e.to_string()))
}

/// Parameters the bundled plans were generated with.
pub const BUNDLED_LABELS: [&str; 2] = ["A", "B"];
pub const BUNDLED_GRID: (usize, usize) = (3, 20);

/// Regenerates the plan that `bundled_plan(buffer)` ships.
pub fn generate_bundled_plan(buffer: usize) -> Result<PartitionPlan, PlanError> {
    buffered_pair_plan(BUNDLED_LABELS, 4, 3, buffer, BUNDLED_GRID.0, BUNDLED_GRID.1)
}
