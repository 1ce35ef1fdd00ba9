//! Reclamation and allocation policies: Eager, Lazy and the cost-driven
//! Square policy (locality-aware allocation plus cost-effective reclamation).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alloc::{AllocError, AllocOutcome, AllocationState, QubitId};
use crate::machine::{Cell, MachineModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    /// Uncompute at the end of every module.
    Eager,
    /// Hand garbage to the caller; only the entry module cleans up.
    Lazy,
    /// Locality-aware allocation with cost-effective reclamation.
    Square,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Eager, PolicyKind::Lazy, PolicyKind::Square];

    pub fn cli_name(self) -> &'static str {
        match self {
            PolicyKind::Eager => "eager",
            PolicyKind::Lazy => "lazy",
            PolicyKind::Square => "square",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "eager" => Ok(PolicyKind::Eager),
            "lazy" => Ok(PolicyKind::Lazy),
            "square" => Ok(PolicyKind::Square),
            _ => Err(format!("unknown policy {s:?} (expected eager, lazy or square)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Uncompute,
    TransferToParent,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("cost of holding ancilla is undefined with no active qubits")]
    NoActiveQubits,
}

/// Operands of the reclamation cost model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CostInputs {
    /// Live qubits at the decision point.
    pub n_active: u32,
    /// Ancilla the module would keep alive: its own plus inherited garbage.
    pub n_anc: u32,
    /// Gates needed to uncompute the module, children included.
    pub g_uncomp: u64,
    /// Gates executed before the caller's own uncompute would reclaim them.
    pub g_p: u64,
    /// Communication factor.
    pub s: f64,
    pub level: u32,
}

/// Cost of uncomputing now: `n_active * g_uncomp * s * 2^level`.
pub fn cost_uncompute(c: &CostInputs) -> f64 {
    c.n_active as f64 * c.g_uncomp as f64 * c.s * 2f64.powi(c.level as i32)
}

/// Cost of holding the ancilla until the caller reclaims them:
/// `n_anc * g_p * s * sqrt((n_active + n_anc) / n_active)`.
pub fn cost_no_uncompute(c: &CostInputs) -> Result<f64, PolicyError> {
    if c.n_active == 0 {
        return Err(PolicyError::NoActiveQubits);
    }
    let growth = ((c.n_active as f64 + c.n_anc as f64) / c.n_active as f64).sqrt();
    Ok(c.n_anc as f64 * c.g_p as f64 * c.s * growth)
}

/// Uncompute iff the uncompute cost does not exceed the holding cost. With
/// no active qubits holding is free of contention, so the decision falls
/// back to reclaiming.
pub fn cer_decide(c: &CostInputs) -> Decision {
    match cost_no_uncompute(c) {
        Ok(c0) if cost_uncompute(c) > c0 => Decision::TransferToParent,
        _ => Decision::Uncompute,
    }
}

/// The reclamation decision of `kind` at a Free marker at `level`. `costs`
/// is only evaluated for the Square policy.
pub fn policy_free(kind: PolicyKind, level: u32, costs: impl FnOnce() -> CostInputs) -> Decision {
    match kind {
        PolicyKind::Eager => Decision::Uncompute,
        PolicyKind::Lazy if level == 0 => Decision::Uncompute,
        PolicyKind::Lazy => Decision::TransferToParent,
        PolicyKind::Square => cer_decide(&costs()),
    }
}

/// Running mean of per-gate communication overhead: swap-chain length on
/// lattices, braid retries on fault-tolerant grids.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CommEstimator {
    pub count: u64,
    pub sum: f64,
}

impl CommEstimator {
    pub fn record(&mut self, overhead: f64) {
        self.count += 1;
        self.sum += overhead;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            1.0
        } else {
            self.sum / self.count as f64
        }
    }
}

/// Communication factor for the cost model, clamped to at least 1.
pub fn estimate_comm_factor(est: &CommEstimator) -> f64 {
    est.mean().max(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaaWeights {
    /// Weight of the wait for a busy candidate, per cycle.
    pub alpha: f64,
    /// Weight of bounding-box growth, per cell.
    pub beta: f64,
}

impl Default for LaaWeights {
    fn default() -> Self {
        LaaWeights { alpha: 0.5, beta: 1.0 }
    }
}

/// Live-cell bounding box as (min row, max row, min col, max col).
type BBox = (u32, u32, u32, u32);

fn live_bbox(state: &AllocationState, m: &MachineModel) -> Option<BBox> {
    let mut bb: Option<BBox> = None;
    for q in state.live_qubits() {
        let (r, c) = m.coords(state.cell_of(q));
        bb = Some(match bb {
            None => (r, r, c, c),
            Some((r0, r1, c0, c1)) => (r0.min(r), r1.max(r), c0.min(c), c1.max(c)),
        });
    }
    bb
}

fn area_increase(bb: Option<BBox>, m: &MachineModel, cell: Cell) -> f64 {
    let Some((r0, r1, c0, c1)) = bb else { return 0.0 };
    let (r, c) = m.coords(cell);
    let grown = (r1.max(r) - r0.min(r)) + (c1.max(c) - c0.min(c));
    (grown - ((r1 - r0) + (c1 - c0))) as f64
}

/// Locality-aware allocation of `n` qubits that will interact with the
/// qubits at `partners`.
///
/// Each slot takes the lowest-scoring candidate among heap qubits and free
/// cells, where
/// `score = dist(cell, centroid) + alpha * max(0, ready(cell) - now) + beta * area`
/// and `area` is the growth of the live bounding box (zero for heap
/// qubits). Ties prefer the heap, then the lowest qubit id or cell index.
/// Without partners the centroid is the grid center. On a fully connected
/// machine distance and area vanish.
pub fn laa_allocate(
    n: u32,
    partners: &[Cell],
    now: u64,
    ready: &[u64],
    state: &mut AllocationState,
    m: &MachineModel,
    w: LaaWeights,
) -> Result<AllocOutcome, AllocError> {
    let grid = m.is_grid();
    let centroid = if partners.is_empty() {
        ((m.height as f64 - 1.0) / 2.0, (m.width as f64 - 1.0) / 2.0)
    } else {
        let k = partners.len() as f64;
        let (sr, sc) = partners.iter().fold((0.0, 0.0), |(sr, sc), &p| {
            let (r, c) = m.coords(p);
            (sr + r as f64, sc + c as f64)
        });
        (sr / k, sc / k)
    };
    let dist = |cell: Cell| {
        if !grid {
            return 0.0;
        }
        let (r, c) = m.coords(cell);
        (r as f64 - centroid.0).abs() + (c as f64 - centroid.1).abs()
    };
    let wait = |cell: Cell| ready[cell as usize].saturating_sub(now) as f64;

    let mut got = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let mut best_heap: Option<(f64, QubitId)> = None;
        for &q in state.heap() {
            let cell = state.cell_of(q);
            let s = dist(cell) + w.alpha * wait(cell);
            if best_heap.is_none_or(|(bs, bq)| s < bs || (s == bs && q < bq)) {
                best_heap = Some((s, q));
            }
        }
        let mut best_fresh: Option<(f64, Cell)> = None;
        if state.fresh_room(1) {
            let bb = if grid { live_bbox(state, m) } else { None };
            for cell in state.free_cells() {
                let s = dist(cell) + w.alpha * wait(cell) + w.beta * area_increase(bb, m, cell);
                if best_fresh.is_none_or(|(bs, bc)| s < bs || (s == bs && cell < bc)) {
                    best_fresh = Some((s, cell));
                }
            }
        }
        let q = match (best_heap, best_fresh) {
            (Some((hs, q)), Some((fs, _))) if hs <= fs => {
                state.take(q)?;
                q
            }
            (Some((_, q)), None) => {
                state.take(q)?;
                q
            }
            (_, Some((_, cell))) => state.create(cell),
            (None, None) => {
                // Hand back what this request already holds; the whole request waits.
                if !got.is_empty() {
                    state.heap_push(&got, now)?;
                }
                return Ok(AllocOutcome::Pending(state.enqueue(n)));
            }
        };
        got.push(q);
    }
    Ok(AllocOutcome::Granted(got))
}

/// Baseline allocation: reuse the most recently reclaimed qubits, then fill
/// free cells outward from the grid center.
pub fn lifo_allocate(n: u32, state: &mut AllocationState) -> AllocOutcome {
    let mut got = Vec::with_capacity(n as usize);
    for _ in 0..n {
        if let Some(q) = state.pop() {
            got.push(q);
            continue;
        }
        let cell = if state.fresh_room(1) { state.free_cells().next() } else { None };
        if let Some(cell) = cell {
            got.push(state.create(cell));
        } else {
            // Put popped qubits back in their original order so LIFO order is kept.
            for &q in got.iter().rev() {
                state.heap_push(&[q], 0).ok();
            }
            return AllocOutcome::Pending(state.enqueue(n));
        }
    }
    AllocOutcome::Granted(got)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::CommMode;

    fn inputs(n_active: u32, n_anc: u32, g_uncomp: u64, g_p: u64, s: f64, level: u32) -> CostInputs {
        CostInputs { n_active, n_anc, g_uncomp, g_p, s, level }
    }

    #[test]
    fn cost_uncompute_examples() {
        assert_eq!(cost_uncompute(&inputs(4, 0, 10, 0, 1.5, 2)), 240.0);
        assert_eq!(cost_uncompute(&inputs(1, 0, 1, 0, 1.0, 0)), 1.0);
        assert_eq!(cost_uncompute(&inputs(5, 0, 0, 0, 3.0, 4)), 0.0);
    }

    #[test]
    fn cost_no_uncompute_examples() {
        let c0 = cost_no_uncompute(&inputs(8, 2, 0, 50, 2.0, 0)).unwrap();
        assert!((c0 - 200.0 * (10.0f64 / 8.0).sqrt()).abs() < 1e-9);
        assert!((c0 - 223.607).abs() < 1e-3);
        assert_eq!(cost_no_uncompute(&inputs(3, 0, 0, 50, 2.0, 0)).unwrap(), 0.0);
        assert!((cost_no_uncompute(&inputs(1, 1, 0, 10, 1.0, 0)).unwrap() - 14.142).abs() < 1e-3);
        assert_eq!(cost_no_uncompute(&inputs(0, 1, 0, 10, 1.0, 0)), Err(PolicyError::NoActiveQubits));
    }

    #[test]
    fn cer_examples() {
        let c = inputs(8, 2, 20, 50, 2.0, 1);
        assert_eq!(cost_uncompute(&c), 640.0);
        assert_eq!(cer_decide(&c), Decision::TransferToParent);
        assert_eq!(cer_decide(&inputs(8, 2, 0, 50, 2.0, 1)), Decision::Uncompute);
        // C1 = 1 * 6 * 1 = 6 and C0 = 3 * 1 * 1 * sqrt(4) = 6.
        let tie = inputs(1, 3, 6, 1, 1.0, 0);
        assert_eq!(cost_uncompute(&tie), cost_no_uncompute(&tie).unwrap());
        assert_eq!(cer_decide(&tie), Decision::Uncompute);
    }

    #[test]
    fn policy_free_delegates() {
        let never = || -> CostInputs { panic!("costs not needed") };
        assert_eq!(policy_free(PolicyKind::Eager, 3, never), Decision::Uncompute);
        assert_eq!(policy_free(PolicyKind::Lazy, 1, never), Decision::TransferToParent);
        assert_eq!(policy_free(PolicyKind::Lazy, 0, never), Decision::Uncompute);
        assert_eq!(policy_free(PolicyKind::Square, 2, || inputs(1, 1, 1, 100, 1.0, 1)), Decision::Uncompute);
    }

    #[test]
    fn comm_estimator() {
        let mut e = CommEstimator::default();
        assert_eq!(estimate_comm_factor(&e), 1.0);
        e.record(2.0);
        e.record(4.0);
        assert_eq!(estimate_comm_factor(&e), 3.0);
        let mut ft = CommEstimator::default();
        for _ in 0..10 {
            ft.record(0.0);
        }
        assert_eq!(ft.mean(), 0.0);
        assert_eq!(estimate_comm_factor(&ft), 1.0);
    }

    fn lattice(w: u32, h: u32) -> MachineModel {
        MachineModel::grid(CommMode::LatticeSwap, w, h, None).unwrap()
    }

    #[test]
    fn laa_prefers_close_heap_qubit() {
        let m = lattice(7, 7);
        let mut s = AllocationState::new(&m);
        let ready = vec![0u64; 49];
        let partner = m.cell(3, 3).unwrap();
        let AllocOutcome::Granted(qs) = s.allocate_fresh(&[partner, m.cell(3, 4).unwrap()]).unwrap() else { panic!() };
        s.heap_push(&qs[1..], 0).unwrap();
        let AllocOutcome::Granted(got) =
            laa_allocate(1, &[partner], 0, &ready, &mut s, &m, LaaWeights::default()).unwrap()
        else {
            panic!()
        };
        assert_eq!(got, vec![qs[1]]);
    }

    #[test]
    fn laa_fresh_near_centroid_when_heap_empty() {
        let m = lattice(7, 7);
        let mut s = AllocationState::new(&m);
        let ready = vec![0u64; 49];
        let partners = [m.cell(0, 0).unwrap(), m.cell(0, 2).unwrap()];
        let AllocOutcome::Granted(got) =
            laa_allocate(1, &partners, 0, &ready, &mut s, &m, LaaWeights::default()).unwrap()
        else {
            panic!()
        };
        assert_eq!(s.cell_of(got[0]), m.cell(0, 1).unwrap());
    }

    #[test]
    fn laa_avoids_busy_heap_qubit() {
        let m = lattice(7, 7);
        let mut s = AllocationState::new(&m);
        let mut ready = vec![0u64; 49];
        let centre = m.cell(3, 3).unwrap();
        let left = m.cell(3, 2).unwrap();
        // A live partner at the centre and a heap qubit to its left that stays
        // busy for 100 cycles; free neighbours sit at the same distance.
        let AllocOutcome::Granted(qs) = s.allocate_fresh(&[centre, left]).unwrap() else { panic!() };
        s.heap_push(&qs[1..], 100).unwrap();
        ready[left as usize] = 100;
        let w = LaaWeights::default();
        // heap: 1 + 0.5 * 100 = 51; fresh neighbour: 1 + 0 + area growth 1 = 2.
        let AllocOutcome::Granted(got) = laa_allocate(1, &[centre], 0, &ready, &mut s, &m, w).unwrap() else {
            panic!()
        };
        assert_ne!(got[0], qs[1]);
        assert_eq!(m.cell_distance(s.cell_of(got[0]), centre), 1);
        // Once the heap qubit is idle it wins the tie on distance.
        ready[left as usize] = 0;
        let AllocOutcome::Granted(again) = laa_allocate(1, &[centre], 0, &ready, &mut s, &m, w).unwrap() else {
            panic!()
        };
        assert_eq!(again, vec![qs[1]]);
    }

    #[test]
    fn laa_pending_when_full() {
        let m = MachineModel::grid(CommMode::LatticeSwap, 2, 1, None).unwrap();
        let mut s = AllocationState::new(&m);
        let ready = vec![0u64; 2];
        assert!(matches!(s.allocate_fresh(&[0, 1]).unwrap(), AllocOutcome::Granted(_)));
        let out = laa_allocate(1, &[], 0, &ready, &mut s, &m, LaaWeights::default()).unwrap();
        assert!(matches!(out, AllocOutcome::Pending(_)));
    }

    #[test]
    fn laa_is_deterministic() {
        let m = lattice(6, 6);
        let run = || {
            let mut s = AllocationState::new(&m);
            let ready = vec![0u64; 36];
            match laa_allocate(4, &[7, 8], 0, &ready, &mut s, &m, LaaWeights::default()).unwrap() {
                AllocOutcome::Granted(qs) => qs.iter().map(|&q| s.cell_of(q)).collect::<Vec<_>>(),
                AllocOutcome::Pending(_) => unreachable!(),
            }
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn lifo_allocation_reuses_heap() {
        let m = lattice(4, 4);
        let mut s = AllocationState::new(&m);
        let AllocOutcome::Granted(a) = lifo_allocate(2, &mut s) else { panic!() };
        s.heap_push(&a, 3).unwrap();
        let AllocOutcome::Granted(b) = lifo_allocate(1, &mut s) else { panic!() };
        assert_eq!(b, vec![a[1]]);
    }
}
