//! Target architectures and their distance and routing primitives.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::GateKind;

/// Row-major cell index on the machine grid.
pub type Cell = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CommMode {
    /// 2D lattice, nearest-neighbor CNOTs, SWAP chains for distant operands.
    LatticeSwap,
    /// Ideal all-to-all connectivity.
    FullyConnected,
    /// Error-corrected grid; two-qubit gates are constant-latency braids that
    /// may not cross.
    FtBraid,
}

impl CommMode {
    pub fn cli_name(self) -> &'static str {
        match self {
            CommMode::LatticeSwap => "lattice",
            CommMode::FullyConnected => "full",
            CommMode::FtBraid => "ft",
        }
    }
}

impl fmt::Display for CommMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for CommMode {
    type Err = MachineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lattice" => Ok(CommMode::LatticeSwap),
            "full" => Ok(CommMode::FullyConnected),
            "ft" => Ok(CommMode::FtBraid),
            _ => Err(MachineError::Invalid(format!("unknown architecture {s:?} (expected lattice, full or ft)"))),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MachineError {
    #[error("invalid machine: {0}")]
    Invalid(String),
    #[error("cell ({row}, {col}) is outside the {width}x{height} grid")]
    OutOfGrid { row: u32, col: u32, width: u32, height: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineModel {
    pub mode: CommMode,
    pub width: u32,
    pub height: u32,
    pub max_qubits: u32,
    /// Duration in cycles per gate kind, indexed by [`GateKind::index`].
    gate_cycles: [u32; 7],
}

/// Cells a moving qubit traverses to become adjacent to its partner.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwapChain {
    /// From the mover's cell to the partner's cell, both inclusive.
    pub path: Vec<Cell>,
    pub swap_count: u32,
    pub duration_cycles: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BraidRoute {
    pub cells: Vec<Cell>,
    pub start_cycle: u64,
    pub end_cycle: u64,
}

impl MachineModel {
    /// A grid machine. `max_qubits` defaults to the number of cells.
    pub fn grid(mode: CommMode, width: u32, height: u32, max_qubits: Option<u32>) -> Result<Self, MachineError> {
        if width == 0 || height == 0 {
            return Err(MachineError::Invalid(format!("grid {width}x{height} must have positive dimensions")));
        }
        let cells = width
            .checked_mul(height)
            .ok_or_else(|| MachineError::Invalid(format!("grid {width}x{height} is too large")))?;
        let max_qubits = max_qubits.unwrap_or(cells);
        if max_qubits == 0 {
            return Err(MachineError::Invalid("max_qubits must be positive".into()));
        }
        if mode != CommMode::FullyConnected && max_qubits > cells {
            return Err(MachineError::Invalid(format!(
                "max_qubits {max_qubits} exceeds the {cells} cells of a {width}x{height} grid"
            )));
        }
        Ok(MachineModel { mode, width, height, max_qubits, gate_cycles: [1; 7] })
    }

    /// An all-to-all machine with `max_qubits` slots and no geometry.
    pub fn fully_connected(max_qubits: u32) -> Result<Self, MachineError> {
        Self::grid(CommMode::FullyConnected, max_qubits, 1, Some(max_qubits))
    }

    pub fn with_gate_cycles(mut self, kind: GateKind, cycles: u32) -> Result<Self, MachineError> {
        if cycles == 0 {
            return Err(MachineError::Invalid(format!("duration of {kind} must be at least one cycle")));
        }
        self.gate_cycles[kind.index()] = cycles;
        Ok(self)
    }

    pub fn num_cells(&self) -> u32 {
        self.width * self.height
    }

    /// Duration of one gate. A SWAP is three back-to-back CNOTs.
    pub fn gate_cycles(&self, kind: GateKind) -> u32 {
        match kind {
            GateKind::Swap => 3 * self.gate_cycles[GateKind::Cnot.index()],
            k => self.gate_cycles[k.index()],
        }
    }

    pub fn is_grid(&self) -> bool {
        self.mode != CommMode::FullyConnected
    }

    pub fn coords(&self, c: Cell) -> (u32, u32) {
        (c / self.width, c % self.width)
    }

    pub fn cell(&self, row: u32, col: u32) -> Result<Cell, MachineError> {
        if row >= self.height || col >= self.width {
            return Err(MachineError::OutOfGrid { row, col, width: self.width, height: self.height });
        }
        Ok(row * self.width + col)
    }

    /// Manhattan distance between two grid positions; always 0 when fully
    /// connected.
    pub fn distance(&self, a: (u32, u32), b: (u32, u32)) -> Result<u32, MachineError> {
        let a = self.cell(a.0, a.1)?;
        let b = self.cell(b.0, b.1)?;
        Ok(self.cell_distance(a, b))
    }

    pub fn cell_distance(&self, a: Cell, b: Cell) -> u32 {
        if !self.is_grid() {
            return 0;
        }
        let (ar, ac) = self.coords(a);
        let (br, bc) = self.coords(b);
        ar.abs_diff(br) + ac.abs_diff(bc)
    }

    /// Shortest path from `a` to `b`, moving along the row first and then
    /// along the column. The mover swaps through every cell but the last.
    pub fn swap_route(&self, a: Cell, b: Cell) -> SwapChain {
        let path = self.l_path(a, b, true);
        let swap_count = (path.len() as u32).saturating_sub(2);
        SwapChain { duration_cycles: swap_count * self.gate_cycles(GateKind::Swap), path, swap_count }
    }

    /// L-shaped path from `a` to `b` inclusive. `row_first` walks along
    /// `a`'s row (changing column) before changing row.
    pub fn l_path(&self, a: Cell, b: Cell, row_first: bool) -> Vec<Cell> {
        let (ar, ac) = self.coords(a);
        let (br, bc) = self.coords(b);
        let mut path = Vec::with_capacity((ar.abs_diff(br) + ac.abs_diff(bc) + 1) as usize);
        let (mut r, mut c) = (ar, ac);
        path.push(a);
        let step_col = |r: u32, c: &mut u32, path: &mut Vec<Cell>| {
            while *c != bc {
                *c = if *c < bc { *c + 1 } else { *c - 1 };
                path.push(r * self.width + *c);
            }
        };
        let step_row = |r: &mut u32, c: u32, path: &mut Vec<Cell>| {
            while *r != br {
                *r = if *r < br { *r + 1 } else { *r - 1 };
                path.push(*r * self.width + c);
            }
        };
        if row_first {
            step_col(r, &mut c, &mut path);
            step_row(&mut r, c, &mut path);
        } else {
            step_row(&mut r, c, &mut path);
            step_col(r, &mut c, &mut path);
        }
        path
    }

    /// The two L-shaped braid candidates, horizontal-first then
    /// vertical-first. Straight segments yield the same path twice.
    pub fn braid_candidates(&self, a: Cell, b: Cell) -> [Vec<Cell>; 2] {
        [self.l_path(a, b, true), self.l_path(a, b, false)]
    }

    /// Routes a braid starting at `start_cycle`, avoiding every cell used by
    /// `active` routes that overlap in time. `None` means blocked.
    pub fn braid_route(&self, a: Cell, b: Cell, start_cycle: u64, active: &[BraidRoute]) -> Option<BraidRoute> {
        let end_cycle = start_cycle + self.gate_cycles(GateKind::Cnot) as u64;
        let busy = |cell: Cell| {
            active
                .iter()
                .any(|r| r.start_cycle < end_cycle && start_cycle < r.end_cycle && r.cells.contains(&cell))
        };
        self.braid_candidates(a, b)
            .into_iter()
            .find(|cells| !cells.iter().any(|&c| busy(c)))
            .map(|cells| BraidRoute { cells, start_cycle, end_cycle })
    }

    /// All cells ordered by distance from the grid center, ties by index.
    /// Used for default placement so that programs grow outward compactly.
    pub fn center_out_order(&self) -> Vec<Cell> {
        let mut cells: Vec<Cell> = (0..self.num_cells()).collect();
        if self.is_grid() {
            let (w, h) = (self.width as i64, self.height as i64);
            cells.sort_by_key(|&c| {
                let (r, col) = self.coords(c);
                ((2 * r as i64 - (h - 1)).abs() + (2 * col as i64 - (w - 1)).abs(), c)
            });
        }
        cells
    }
}
