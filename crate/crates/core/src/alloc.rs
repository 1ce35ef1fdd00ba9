//! Qubit lifecycle: liveness, the LIFO ancilla heap, placement, pending
//! requests and usage segments.

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use crate::machine::{Cell, MachineModel};

pub type QubitId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct UsageSegment {
    pub qubit: QubitId,
    pub t_i: u64,
    pub t_f: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QubitStatus {
    Live,
    Heap,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AllocOutcome {
    Granted(Vec<QubitId>),
    /// The request was queued; the id identifies it in later fulfillments.
    Pending(u64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fulfilled {
    pub request: u64,
    pub qubits: Vec<QubitId>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AllocError {
    #[error("cell {0} is already occupied")]
    CellOccupied(Cell),
    #[error("qubit {0} is not live")]
    NotLive(QubitId),
    #[error("qubit {0} is not in the heap")]
    NotInHeap(QubitId),
    #[error("deadlock: {requested} more qubits requested with {live} live and {capacity} allowed")]
    Deadlock { requested: u32, live: u32, capacity: u32 },
}

#[derive(Clone, Debug)]
struct PendingRequest {
    id: u64,
    n: u32,
}

/// Allocation bookkeeping for one simulation run.
///
/// Every qubit id ever handed out is a physical qubit with a cell; reclaimed
/// qubits keep their cell while they sit in the heap. Physical qubits
/// (live plus heap) never exceed `capacity`.
#[derive(Clone, Debug)]
pub struct AllocationState {
    capacity: u32,
    status: Vec<QubitStatus>,
    cell_of: Vec<Cell>,
    occupant: Vec<Option<QubitId>>,
    /// Cells in the order fresh qubits are placed by default.
    placement: Vec<Cell>,
    n_active: u32,
    heap: Vec<QubitId>,
    pending: VecDeque<PendingRequest>,
    next_request: u64,
    open: Vec<Option<u64>>,
    segments: Vec<UsageSegment>,
    aqv: u64,
}

impl AllocationState {
    pub fn new(m: &MachineModel) -> Self {
        let cells = m.num_cells() as usize;
        AllocationState {
            capacity: m.max_qubits,
            status: Vec::new(),
            cell_of: Vec::new(),
            occupant: vec![None; cells],
            placement: m.center_out_order(),
            n_active: 0,
            heap: Vec::new(),
            pending: VecDeque::new(),
            next_request: 0,
            open: Vec::new(),
            segments: Vec::new(),
            aqv: 0,
        }
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn n_active(&self) -> u32 {
        self.n_active
    }

    pub fn physical_qubits(&self) -> u32 {
        self.status.len() as u32
    }

    pub fn heap(&self) -> &[QubitId] {
        &self.heap
    }

    pub fn status(&self, q: QubitId) -> QubitStatus {
        self.status[q as usize]
    }

    pub fn is_live(&self, q: QubitId) -> bool {
        self.status.get(q as usize) == Some(&QubitStatus::Live)
    }

    pub fn cell_of(&self, q: QubitId) -> Cell {
        self.cell_of[q as usize]
    }

    pub fn occupant(&self, c: Cell) -> Option<QubitId> {
        self.occupant[c as usize]
    }

    pub fn live_qubits(&self) -> impl Iterator<Item = QubitId> + '_ {
        self.status.iter().enumerate().filter(|(_, s)| **s == QubitStatus::Live).map(|(q, _)| q as QubitId)
    }

    pub fn segments(&self) -> &[UsageSegment] {
        &self.segments
    }

    /// Running sum of closed segment lengths.
    pub fn aqv(&self) -> u64 {
        self.aqv
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Whether `n` more physical qubits fit under the cap.
    pub fn fresh_room(&self, n: u32) -> bool {
        self.physical_qubits() + n <= self.capacity
    }

    /// First `n` unoccupied cells in default placement order.
    pub fn default_cells(&self, n: usize) -> Vec<Cell> {
        self.placement.iter().copied().filter(|&c| self.occupant[c as usize].is_none()).take(n).collect()
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.placement.iter().copied().filter(|&c| self.occupant[c as usize].is_none())
    }

    /// Creates live qubits at `cells`, or queues the request when it would
    /// exceed the cap. Segments open on first touch, not here.
    pub fn allocate_fresh(&mut self, cells: &[Cell]) -> Result<AllocOutcome, AllocError> {
        let n = cells.len() as u32;
        if n == 0 {
            return Ok(AllocOutcome::Granted(Vec::new()));
        }
        if !self.fresh_room(n) || cells.len() > self.free_cells().count() {
            return Ok(AllocOutcome::Pending(self.enqueue(n)));
        }
        for (i, &c) in cells.iter().enumerate() {
            if self.occupant[c as usize].is_some() || cells[..i].contains(&c) {
                return Err(AllocError::CellOccupied(c));
            }
        }
        Ok(AllocOutcome::Granted(cells.iter().map(|&c| self.create(c)).collect()))
    }

    /// Queues a request for `n` qubits that cannot be served now.
    pub fn enqueue(&mut self, n: u32) -> u64 {
        let id = self.next_request;
        self.next_request += 1;
        self.pending.push_back(PendingRequest { id, n });
        id
    }

    /// Creates one live qubit at an unoccupied cell.
    pub fn create(&mut self, c: Cell) -> QubitId {
        let q = self.status.len() as QubitId;
        self.status.push(QubitStatus::Live);
        self.cell_of.push(c);
        self.open.push(None);
        self.occupant[c as usize] = Some(q);
        self.n_active += 1;
        q
    }

    /// Reuses the most recently reclaimed qubit.
    pub fn pop(&mut self) -> Option<QubitId> {
        let q = self.heap.pop()?;
        self.status[q as usize] = QubitStatus::Live;
        self.n_active += 1;
        Some(q)
    }

    /// Reuses a specific heap qubit chosen by a placement policy.
    pub fn take(&mut self, q: QubitId) -> Result<(), AllocError> {
        let at = self.heap.iter().rposition(|&h| h == q).ok_or(AllocError::NotInHeap(q))?;
        self.heap.remove(at);
        self.status[q as usize] = QubitStatus::Live;
        self.n_active += 1;
        Ok(())
    }

    /// Marks `q` as in use at cycle `t`, opening its segment if needed.
    pub fn touch(&mut self, q: QubitId, t: u64) {
        let i = q as usize;
        if self.status[i] == QubitStatus::Live && self.open[i].is_none() {
            self.open[i] = Some(t);
        }
    }

    /// Opens the segment of every live qubit not yet touched at `t`.
    pub fn touch_all_live(&mut self, t: u64) {
        for i in 0..self.status.len() {
            self.touch(i as QubitId, t);
        }
    }

    /// Exchanges the occupants (if any) of two cells.
    pub fn swap_cells(&mut self, a: Cell, b: Cell) {
        let (qa, qb) = (self.occupant[a as usize], self.occupant[b as usize]);
        self.occupant[a as usize] = qb;
        self.occupant[b as usize] = qa;
        if let Some(q) = qa {
            self.cell_of[q as usize] = b;
        }
        if let Some(q) = qb {
            self.cell_of[q as usize] = a;
        }
    }

    /// Reclaims `qubits` at cycle `t`: closes their segments and pushes them
    /// onto the heap in order, then retries pending requests.
    pub fn heap_push(&mut self, qubits: &[QubitId], t: u64) -> Result<Vec<Fulfilled>, AllocError> {
        for &q in qubits {
            if !self.is_live(q) {
                return Err(AllocError::NotLive(q));
            }
        }
        for &q in qubits {
            self.close(q, t);
            self.status[q as usize] = QubitStatus::Heap;
            self.n_active -= 1;
            self.heap.push(q);
        }
        self.resolve_pending(true)
    }

    fn close(&mut self, q: QubitId, t: u64) {
        if let Some(t_i) = self.open[q as usize].take() {
            debug_assert!(t >= t_i);
            if t > t_i {
                self.segments.push(UsageSegment { qubit: q, t_i, t_f: t });
                self.aqv += t - t_i;
            }
        }
    }

    /// Closes the segments of all live qubits at `t` without reclaiming
    /// them; used for data qubits at the end of a run.
    pub fn close_live(&mut self, t: u64) {
        for q in 0..self.status.len() as QubitId {
            if self.is_live(q) {
                self.close(q, t);
            }
        }
    }

    /// Serves queued requests in FIFO order, heap first, stopping at the
    /// first one that still does not fit. With nothing in flight that could
    /// ever reclaim qubits, a leftover request is a deadlock.
    pub fn resolve_pending(&mut self, in_flight: bool) -> Result<Vec<Fulfilled>, AllocError> {
        let mut done = Vec::new();
        while let Some(req) = self.pending.front() {
            let n = req.n;
            let from_heap = (self.heap.len() as u32).min(n);
            let fresh = n - from_heap;
            if !self.fresh_room(fresh) || (fresh as usize) > self.free_cells().count() {
                break;
            }
            let id = req.id;
            self.pending.pop_front();
            let mut qubits: Vec<QubitId> = (0..from_heap).filter_map(|_| self.pop()).collect();
            for c in self.default_cells(fresh as usize) {
                qubits.push(self.create(c));
            }
            done.push(Fulfilled { request: id, qubits });
        }
        if !in_flight {
            if let Some(req) = self.pending.front() {
                return Err(AllocError::Deadlock { requested: req.n, live: self.n_active, capacity: self.capacity });
            }
        }
        Ok(done)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::CommMode;

    fn state(w: u32, h: u32, max: Option<u32>) -> AllocationState {
        AllocationState::new(&MachineModel::grid(CommMode::LatticeSwap, w, h, max).unwrap())
    }

    fn granted(o: AllocOutcome) -> Vec<QubitId> {
        match o {
            AllocOutcome::Granted(v) => v,
            AllocOutcome::Pending(_) => panic!("unexpected pending"),
        }
    }

    #[test]
    fn push_records_segment() {
        let mut s = state(4, 4, None);
        let qs = granted(s.allocate_fresh(&[0, 1, 2, 3]).unwrap());
        s.touch(qs[3], 10);
        s.heap_push(&[qs[3]], 40).unwrap();
        assert_eq!(s.segments(), &[UsageSegment { qubit: qs[3], t_i: 10, t_f: 40 }]);
        assert_eq!(s.aqv(), 30);
        assert_eq!(s.n_active(), 3);
    }

    #[test]
    fn heap_is_lifo() {
        let mut s = state(4, 4, None);
        let qs = granted(s.allocate_fresh(&[5, 6]).unwrap());
        s.heap_push(&[qs[0], qs[1]], 0).unwrap();
        assert_eq!(s.pop(), Some(qs[1]));
        assert_eq!(s.pop(), Some(qs[0]));
        assert_eq!(s.pop(), None);
    }

    #[test]
    fn fresh_allocation_and_cap() {
        let mut s = state(4, 4, None);
        let q = granted(s.allocate_fresh(&[3]).unwrap());
        assert_eq!(s.n_active(), 1);
        assert_eq!(s.cell_of(q[0]), 3);
        assert!(granted(s.allocate_fresh(&[]).unwrap()).is_empty());
        assert!(matches!(s.allocate_fresh(&[3]), Err(AllocError::CellOccupied(3))));

        let mut capped = state(4, 4, Some(2));
        assert!(matches!(capped.allocate_fresh(&[0, 1, 2]).unwrap(), AllocOutcome::Pending(_)));
    }

    #[test]
    fn pending_fulfilled_by_push() {
        let mut s = state(4, 4, Some(2));
        let qs = granted(s.allocate_fresh(&[0, 1]).unwrap());
        let AllocOutcome::Pending(id) = s.allocate_fresh(&[2, 3]).unwrap() else { panic!() };
        let done = s.heap_push(&qs, 5).unwrap();
        assert_eq!(done, vec![Fulfilled { request: id, qubits: vec![qs[1], qs[0]] }]);
        assert_eq!(s.pending_len(), 0);
    }

    #[test]
    fn pending_is_fifo_and_deadlocks() {
        let mut s = state(4, 4, Some(3));
        let qs = granted(s.allocate_fresh(&[0, 1, 2]).unwrap());
        let AllocOutcome::Pending(first) = s.allocate_fresh(&[4, 5]).unwrap() else { panic!() };
        let AllocOutcome::Pending(_) = s.allocate_fresh(&[6, 7]).unwrap() else { panic!() };
        let done = s.heap_push(&qs[..2], 1).unwrap();
        assert_eq!(done.len(), 1);
        assert_eq!(done[0].request, first);
        assert_eq!(s.pending_len(), 1);

        let mut d = state(2, 2, Some(4));
        assert!(matches!(d.allocate_fresh(&[0, 1, 2, 3, 3]).unwrap(), AllocOutcome::Pending(_)));
        assert!(matches!(d.resolve_pending(false), Err(AllocError::Deadlock { .. })));
    }

    #[test]
    fn swaps_move_occupants() {
        let mut s = state(3, 1, None);
        let q = granted(s.allocate_fresh(&[0]).unwrap())[0];
        s.swap_cells(0, 1);
        assert_eq!(s.cell_of(q), 1);
        assert_eq!(s.occupant(0), None);
        assert_eq!(s.occupant(1), Some(q));
    }
}
