use std::collections::HashMap;

use serde::Serialize;

use crate::alloc::{QubitId, UsageSegment};
use crate::ir::{FuncId, GateKind};
use crate::machine::{BraidRoute, Cell};

/// Marks an unused operand slot or an empty cell taking part in a swap.
pub const NO_QUBIT: QubitId = QubitId::MAX;

/// One scheduled primitive gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GateEvent {
    pub kind: GateKind,
    pub arity: u8,
    pub qubits: [QubitId; 3],
    /// Cells at issue time, after any routing swaps.
    pub cells: [Cell; 3],
    pub start: u64,
    pub end: u64,
    /// Routing swaps inserted immediately before this gate.
    pub inserted_swaps: u32,
    pub braid_retries: u32,
    /// Inserted by the router rather than taken from the program.
    pub routing: bool,
    /// Part of a decomposed Toffoli.
    pub toffoli_piece: bool,
}

impl GateEvent {
    pub fn cells(&self) -> &[Cell] {
        &self.cells[..self.arity as usize]
    }

    pub fn qubits(&self) -> &[QubitId] {
        &self.qubits[..self.arity as usize]
    }
}

/// A program Toffoli realized as 15 Clifford+T events. `cells` hold the
/// operand positions when the first piece was issued.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ToffoliGroup {
    pub first_event: usize,
    pub cells: [Cell; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockRunKind {
    Compute,
    Store,
    StoreInverse,
    Uncompute,
}

/// One execution of a block, in program order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockRun {
    pub func: FuncId,
    pub kind: BlockRunKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataQubit {
    pub name: String,
    pub qubit: QubitId,
    pub initial_cell: Cell,
    pub final_cell: Cell,
}

#[derive(Clone, Debug, Default)]
pub struct Timeline {
    pub events: Vec<GateEvent>,
    pub segments: Vec<UsageSegment>,
    pub makespan: u64,
    pub toffoli_groups: Vec<ToffoliGroup>,
    pub braids: Vec<BraidRoute>,
    /// Entry-module parameters followed by its data registers.
    pub data: Vec<DataQubit>,
    pub block_runs: Vec<BlockRun>,
}

impl Timeline {
    /// How often each function's compute logic ran, forward or inverted.
    pub fn compute_executions(&self) -> HashMap<FuncId, u64> {
        let mut out = HashMap::new();
        for r in &self.block_runs {
            if matches!(r.kind, BlockRunKind::Compute | BlockRunKind::Uncompute) {
                *out.entry(r.func).or_insert(0) += 1;
            }
        }
        out
    }
}
