//! Instrumentation-driven simulation: walks the call tree, applies the
//! allocation and reclamation policy at every Allocate/Free, and schedules
//! each gate as soon as its operands are ready and routed.

mod braid;
mod timeline;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::alloc::{AllocError, AllocOutcome, AllocationState, QubitId};
use crate::ir::{decompose_toffoli, FuncId, GateKind, GateOp, Item, Program, QubitRef, RegRole};
use crate::machine::{BraidRoute, Cell, CommMode, MachineModel};
use crate::metrics::{emit_usage_trace, peak_usage, success_rate, MetricsReport, NoiseModel};
use crate::policy::{
    cost_no_uncompute, cost_uncompute, estimate_comm_factor, laa_allocate, lifo_allocate, policy_free,
    CommEstimator, CostInputs, Decision, LaaWeights, PolicyKind,
};

pub use braid::BraidTable;
pub use timeline::{BlockRun, BlockRunKind, DataQubit, GateEvent, Timeline, ToffoliGroup, NO_QUBIT};

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub policy: PolicyKind,
    pub laa: LaaWeights,
    pub noise: NoiseModel,
    /// Run the classical shadow simulation and check every reclaimed qubit.
    pub verify: bool,
    /// Initial data bits for the shadow simulation; random when `None`.
    pub shadow_inputs: Option<Vec<bool>>,
    /// Keep per-gate events, Toffoli groups and braid routes.
    pub record_events: bool,
}

impl SimConfig {
    pub fn new(policy: PolicyKind) -> Self {
        SimConfig {
            policy,
            laa: LaaWeights::default(),
            noise: NoiseModel::default(),
            verify: false,
            shadow_inputs: None,
            record_events: true,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("{0}")]
    Config(String),
}

impl SimError {
    pub fn is_deadlock(&self) -> bool {
        matches!(self, SimError::Alloc(AllocError::Deadlock { .. }))
    }
}

/// One reclamation decision, with the cost model evaluated for every policy.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CerRecord {
    pub function: String,
    pub level: u32,
    pub decision: Decision,
    pub n_active: u32,
    pub n_anc: u32,
    pub g_uncomp: u64,
    pub g_p: u64,
    pub s: f64,
    pub c1: f64,
    pub c0: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SimOutcome {
    pub timeline: Timeline,
    pub report: MetricsReport,
    pub decisions: Vec<CerRecord>,
    /// `Some(true)` when the shadow simulation ran and every check passed;
    /// `None` when it was off or the program is not classical.
    pub verified: Option<bool>,
    /// Final shadow values of the data qubits, in [`Timeline::data`] order.
    pub shadow_outputs: Option<Vec<bool>>,
}

/// Static per-module facts used while simulating.
#[derive(Clone, Debug, Default)]
struct FuncInfo {
    reg_offset: Vec<usize>,
    n_slots: usize,
    param_slots: usize,
    /// Freed registers' slots, in Free order.
    anc_slots: Vec<usize>,
    data_slots: Vec<usize>,
    /// Slots each ancilla bit interacts with in the Compute block.
    partners: Vec<Vec<usize>>,
    own_c: u64,
    own_u: u64,
    store: u64,
    /// Static cost of the rest of the Compute block after each call-site.
    suffix_after_call: Vec<u64>,
    level: u32,
}

impl FuncInfo {
    fn slot(&self, q: QubitRef) -> usize {
        self.reg_offset[q.reg as usize] + q.index as usize
    }
}

fn gate_weight(kind: GateKind, grid: bool) -> u64 {
    if kind == GateKind::Toffoli && grid {
        15
    } else {
        1
    }
}

fn build_info(p: &Program, grid: bool) -> Vec<FuncInfo> {
    let n = p.functions.len();
    // Static forward cost (compute + store, children expanded), memoized.
    let mut fwd: Vec<Option<u64>> = vec![None; n];
    fn forward_cost(p: &Program, f: FuncId, grid: bool, memo: &mut Vec<Option<u64>>) -> u64 {
        if let Some(v) = memo[f] {
            return v;
        }
        let def = &p.functions[f];
        let mut total: u64 = def.store.gates().map(|g| gate_weight(g.kind, grid)).sum();
        for it in &def.compute.items {
            total = total.saturating_add(match it {
                Item::Gate(g) => gate_weight(g.kind, grid),
                Item::Call(c) => forward_cost(p, c.callee, grid, memo),
            });
        }
        memo[f] = Some(total);
        total
    }
    for f in 0..n {
        forward_cost(p, f, grid, &mut fwd);
    }

    p.functions
        .iter()
        .enumerate()
        .map(|(fid, def)| {
            let mut reg_offset = Vec::with_capacity(def.registers.len());
            let mut n_slots = 0;
            for r in &def.registers {
                reg_offset.push(n_slots);
                n_slots += r.width as usize;
            }
            let regs_slots = |r: u32| reg_offset[r as usize]..reg_offset[r as usize] + def.registers[r as usize].width as usize;
            let anc_slots: Vec<usize> = def.frees.iter().flat_map(|&r| regs_slots(r)).collect();
            let data_slots: Vec<usize> = def.data_regs().flat_map(regs_slots).collect();
            let info_slot = |q: &QubitRef| reg_offset[q.reg as usize] + q.index as usize;

            let mut partners: Vec<Vec<usize>> = vec![Vec::new(); anc_slots.len()];
            let anc_index = |s: usize| anc_slots.iter().position(|&a| a == s);
            let mut note = |group: &[usize]| {
                for &s in group {
                    if let Some(i) = anc_index(s) {
                        for &o in group {
                            if o != s && !partners[i].contains(&o) {
                                partners[i].push(o);
                            }
                        }
                    }
                }
            };
            for it in &def.compute.items {
                let group: Vec<usize> = match it {
                    Item::Gate(g) => g.operands.iter().map(info_slot).collect(),
                    Item::Call(c) => c.qubits().map(info_slot).collect(),
                };
                note(&group);
            }

            let mut suffix_after_call = Vec::new();
            let mut rest: u64 = 0;
            for it in def.compute.items.iter().rev() {
                match it {
                    Item::Gate(g) => rest = rest.saturating_add(gate_weight(g.kind, grid)),
                    Item::Call(c) => {
                        suffix_after_call.push(rest);
                        rest = rest.saturating_add(fwd[c.callee].unwrap_or(0));
                    }
                }
            }
            suffix_after_call.reverse();

            FuncInfo {
                param_slots: def.param_width(),
                reg_offset,
                n_slots,
                anc_slots,
                data_slots,
                partners,
                own_c: def.compute.gates().map(|g| gate_weight(g.kind, grid)).sum(),
                own_u: def.uncompute.gates().map(|g| gate_weight(g.kind, grid)).sum(),
                store: def.store.gates().map(|g| gate_weight(g.kind, grid)).sum(),
                suffix_after_call,
                level: p.callgraph().level(fid).unwrap_or(0),
            }
        })
        .collect()
}

/// Outcome of one module invocation, kept so the caller can later invert it
/// by replaying the same decisions.
#[derive(Clone, Debug)]
struct CallRecord {
    func: FuncId,
    decision: Decision,
    /// Ancilla still held (transferred records only), in slot order.
    anc: Vec<QubitId>,
    /// Qubits this record leaves for an ancestor to reclaim.
    held: u32,
    children: Vec<CallRecord>,
    /// Gates needed to uncompute this module, children included.
    ccost: u64,
}

struct Sched<'a> {
    p: &'a Program,
    m: &'a MachineModel,
    cfg: &'a SimConfig,
    info: &'a [FuncInfo],
    st: AllocationState,
    ready: Vec<u64>,
    braids: BraidTable,
    tl: Timeline,
    report: MetricsReport,
    comm: Vec<CommEstimator>,
    cur: FuncId,
    decisions: Vec<CerRecord>,
    shadow: Option<Vec<bool>>,
}

/// Simulates `p` on `m` under `cfg.policy`.
pub fn simulate(p: &Program, m: &MachineModel, cfg: &SimConfig) -> Result<SimOutcome, SimError> {
    let info = build_info(p, m.is_grid());
    let classical = p.functions.iter().all(|f| {
        [&f.compute, &f.store, &f.uncompute].iter().all(|b| b.gates().all(|g| g.kind.is_classical()))
    });
    let mut s = Sched {
        p,
        m,
        cfg,
        info: &info,
        st: AllocationState::new(m),
        ready: vec![0; m.num_cells() as usize],
        braids: BraidTable::new(m.num_cells()),
        tl: Timeline::default(),
        report: MetricsReport::default(),
        comm: vec![CommEstimator::default(); p.functions.len()],
        cur: p.entry,
        decisions: Vec::new(),
        shadow: (cfg.verify && classical).then(Vec::new),
    };
    s.run_main()?;

    let Sched { mut tl, mut report, st, decisions, shadow, .. } = s;
    tl.segments = st.segments().to_vec();
    let trace = emit_usage_trace(&tl.segments);
    report.qubit_count = peak_usage(&trace);
    report.depth_cycles = tl.makespan;
    report.aqv = st.aqv();
    report.success_rate = success_rate(report.n1, report.n2, report.aqv, &cfg.noise);
    let shadow_outputs = shadow.map(|bits| tl.data.iter().map(|d| bits[d.qubit as usize]).collect());
    Ok(SimOutcome {
        timeline: tl,
        report,
        decisions,
        verified: shadow_outputs.as_ref().map(|_| true),
        shadow_outputs,
    })
}

impl<'a> Sched<'a> {
    fn run_main(&mut self) -> Result<(), SimError> {
        let entry = self.p.entry;
        let def = self.p.entry_fn();
        let info = &self.info[entry];
        let mut frame = vec![NO_QUBIT; info.n_slots];

        // Data qubits: parameters, then data registers, placed center-out.
        let data_slots: Vec<usize> = (0..info.param_slots).chain(info.data_slots.iter().copied()).collect();
        let cells = self.st.default_cells(data_slots.len());
        if cells.len() < data_slots.len() || !self.st.fresh_room(data_slots.len() as u32) {
            return Err(AllocError::Deadlock {
                requested: data_slots.len() as u32,
                live: 0,
                capacity: self.st.capacity(),
            }
            .into());
        }
        let names: Vec<String> = def
            .registers
            .iter()
            .filter(|r| matches!(r.role, RegRole::Param | RegRole::Data))
            .flat_map(|r| (0..r.width).map(move |i| format!("{}[{i}]", r.name)))
            .collect();
        let inputs = self.shadow.as_ref().map(|_| match &self.cfg.shadow_inputs {
            Some(v) => v.clone(),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                (0..data_slots.len()).map(|_| rng.random::<bool>()).collect()
            }
        });
        if let Some(v) = &inputs {
            if v.len() != data_slots.len() {
                return Err(SimError::Config(format!(
                    "expected {} shadow input bits, got {}",
                    data_slots.len(),
                    v.len()
                )));
            }
        }
        for (k, (&slot, &cell)) in data_slots.iter().zip(&cells).enumerate() {
            let q = self.st.create(cell);
            self.st.touch(q, 0);
            frame[slot] = q;
            self.set_shadow(q, inputs.as_ref().is_some_and(|v| v[k]));
            self.tl.data.push(DataQubit { name: names[k].clone(), qubit: q, initial_cell: cell, final_cell: cell });
        }

        let anc = self.allocate(entry, &mut frame)?;
        let children = self.run_compute(entry, &frame, None)?;
        self.run_store(entry, &frame, false);
        if !anc.is_empty() {
            self.run_uncompute(entry, &frame, &children)?;
            self.free(entry, &anc)?;
        } else {
            // Without ancillas of its own the entry keeps its results and
            // only cleans up garbage its callees handed over.
            let calls: Vec<&'a [Vec<QubitRef>]> =
                self.p.functions[entry].compute.calls().map(|c| c.args.as_slice()).collect();
            for (child, args) in children.iter().zip(calls).rev() {
                if child.decision != Decision::TransferToParent {
                    continue;
                }
                let params = self.map_args(entry, &frame, args);
                let child_frame = self.rebuild_frame(child, &params);
                self.run_uncompute(child.func, &child_frame, &child.children)?;
                self.free(child.func, &child.anc)?;
            }
        }

        if self.st.n_active() as usize != data_slots.len() {
            return Err(SimError::Verification(format!(
                "{} ancilla qubits still live at the end of main",
                self.st.n_active() as usize - data_slots.len()
            )));
        }
        self.st.close_live(self.tl.makespan);
        for d in &mut self.tl.data {
            d.final_cell = self.st.cell_of(d.qubit);
        }
        Ok(())
    }

    fn map_args(&self, f: FuncId, frame: &[QubitId], args: &[Vec<QubitRef>]) -> Vec<QubitId> {
        let info = &self.info[f];
        args.iter().flatten().map(|&q| frame[info.slot(q)]).collect()
    }

    fn rebuild_frame(&self, rec: &CallRecord, params: &[QubitId]) -> Vec<QubitId> {
        let info = &self.info[rec.func];
        let mut frame = vec![NO_QUBIT; info.n_slots];
        frame[..params.len()].copy_from_slice(params);
        for (&slot, &q) in info.anc_slots.iter().zip(&rec.anc) {
            frame[slot] = q;
        }
        frame
    }

    fn forward(
        &mut self,
        f: FuncId,
        params: &[QubitId],
        replay: Option<&CallRecord>,
        g_p: u64,
        inverse: bool,
    ) -> Result<CallRecord, SimError> {
        let info = &self.info[f];
        let mut frame = vec![NO_QUBIT; info.n_slots];
        frame[..params.len()].copy_from_slice(params);
        let anc = self.allocate(f, &mut frame)?;
        let children = self.run_compute(f, &frame, replay)?;
        self.run_store(f, &frame, inverse);

        let ccost = info.own_c + children.iter().map(|c| self.inverse_cost(c)).sum::<u64>();
        let held = anc.len() as u32
            + children.iter().filter(|c| c.decision == Decision::TransferToParent).map(|c| c.held).sum::<u32>();

        let decision = if inverse {
            Decision::Uncompute
        } else if let Some(r) = replay {
            r.decision
        } else {
            let inputs = CostInputs {
                n_active: self.st.n_active(),
                n_anc: held,
                g_uncomp: ccost,
                g_p,
                s: estimate_comm_factor(&self.comm[f]),
                level: info.level,
            };
            let d = policy_free(self.cfg.policy, info.level, || inputs);
            self.decisions.push(CerRecord {
                function: self.p.functions[f].name.clone(),
                level: info.level,
                decision: d,
                n_active: inputs.n_active,
                n_anc: inputs.n_anc,
                g_uncomp: inputs.g_uncomp,
                g_p: inputs.g_p,
                s: inputs.s,
                c1: cost_uncompute(&inputs),
                c0: cost_no_uncompute(&inputs).ok(),
            });
            d
        };

        match decision {
            Decision::Uncompute => {
                self.run_uncompute(f, &frame, &children)?;
                self.free(f, &anc)?;
                Ok(CallRecord { func: f, decision, anc: Vec::new(), held: 0, children, ccost })
            }
            Decision::TransferToParent => Ok(CallRecord { func: f, decision, anc, held, children, ccost }),
        }
    }

    /// Gates needed to undo a finished call.
    fn inverse_cost(&self, rec: &CallRecord) -> u64 {
        let store = self.info[rec.func].store;
        match rec.decision {
            Decision::Uncompute => 2 * rec.ccost + store,
            Decision::TransferToParent => rec.ccost + store,
        }
    }

    /// Undoes a finished call. A reclaimed call recomputes its garbage
    /// first; a transferred call still holds it.
    fn inverse(&mut self, rec: &CallRecord, params: &[QubitId]) -> Result<(), SimError> {
        match rec.decision {
            Decision::Uncompute => self.forward(rec.func, params, Some(rec), 0, true).map(|_| ()),
            Decision::TransferToParent => {
                let frame = self.rebuild_frame(rec, params);
                self.run_store(rec.func, &frame, true);
                self.run_uncompute(rec.func, &frame, &rec.children)?;
                self.free(rec.func, &rec.anc)
            }
        }
    }

    fn run_compute(
        &mut self,
        f: FuncId,
        frame: &[QubitId],
        replay: Option<&CallRecord>,
    ) -> Result<Vec<CallRecord>, SimError> {
        let p: &'a Program = self.p;
        let info: &'a FuncInfo = &self.info[f];
        let is_bare_entry = f == p.entry && info.anc_slots.is_empty();
        self.tl.block_runs.push(BlockRun { func: f, kind: BlockRunKind::Compute });
        let mut children: Vec<CallRecord> = Vec::new();
        let mut k = 0;
        for it in &p.functions[f].compute.items {
            match it {
                Item::Gate(g) => {
                    let prev = std::mem::replace(&mut self.cur, f);
                    let qs: Vec<QubitId> = g.operands.iter().map(|&q| frame[info.slot(q)]).collect();
                    self.gate(g.kind, &qs)?;
                    self.cur = prev;
                }
                Item::Call(c) => {
                    let params: Vec<QubitId> = c.qubits().map(|&q| frame[info.slot(q)]).collect();
                    let caller_uncompute: u64 = if is_bare_entry {
                        children.iter().filter(|r| r.decision == Decision::TransferToParent).map(|r| r.ccost).sum()
                    } else {
                        info.own_u + children.iter().map(|r| self.inverse_cost(r)).sum::<u64>()
                    };
                    let g_p = info.suffix_after_call[k] + info.store + caller_uncompute;
                    let child_replay = replay.map(|r| &r.children[k]);
                    let rec = self.forward(c.callee, &params, child_replay, g_p, false)?;
                    children.push(rec);
                    k += 1;
                }
            }
        }
        Ok(children)
    }

    fn run_store(&mut self, f: FuncId, frame: &[QubitId], inverse: bool) {
        let p: &'a Program = self.p;
        let info: &'a FuncInfo = &self.info[f];
        let store = &p.functions[f].store;
        if store.items.is_empty() {
            return;
        }
        let kind = if inverse { BlockRunKind::StoreInverse } else { BlockRunKind::Store };
        self.tl.block_runs.push(BlockRun { func: f, kind });
        let prev = std::mem::replace(&mut self.cur, f);
        let gates: Box<dyn Iterator<Item = _>> =
            if inverse { Box::new(store.gates().rev()) } else { Box::new(store.gates()) };
        for g in gates {
            let qs: Vec<QubitId> = g.operands.iter().map(|&q| frame[info.slot(q)]).collect();
            let kind = if inverse { g.kind.inverse() } else { g.kind };
            // Store blocks hold gates only, so this cannot fail on routing.
            self.gate(kind, &qs).expect("store gates schedule");
        }
        self.cur = prev;
    }

    fn run_uncompute(&mut self, f: FuncId, frame: &[QubitId], children: &[CallRecord]) -> Result<(), SimError> {
        let p: &'a Program = self.p;
        let info: &'a FuncInfo = &self.info[f];
        self.tl.block_runs.push(BlockRun { func: f, kind: BlockRunKind::Uncompute });
        let mut j = 0;
        for it in &p.functions[f].uncompute.items {
            match it {
                Item::Gate(g) => {
                    let prev = std::mem::replace(&mut self.cur, f);
                    let qs: Vec<QubitId> = g.operands.iter().map(|&q| frame[info.slot(q)]).collect();
                    self.gate(g.kind, &qs)?;
                    self.cur = prev;
                }
                Item::Call(c) => {
                    let child = &children[children.len() - 1 - j];
                    j += 1;
                    let params: Vec<QubitId> = c.qubits().map(|&q| frame[info.slot(q)]).collect();
                    self.inverse(child, &params)?;
                }
            }
        }
        Ok(())
    }

    fn allocate(&mut self, f: FuncId, frame: &mut [QubitId]) -> Result<Vec<QubitId>, SimError> {
        let info: &'a FuncInfo = &self.info[f];
        let n = info.anc_slots.len() as u32;
        if n == 0 {
            return Ok(Vec::new());
        }
        let ids = match self.cfg.policy {
            PolicyKind::Eager | PolicyKind::Lazy => match lifo_allocate(n, &mut self.st) {
                AllocOutcome::Granted(ids) => ids,
                AllocOutcome::Pending(_) => return Err(self.stall()),
            },
            PolicyKind::Square => {
                let mut ids = Vec::with_capacity(n as usize);
                for (i, &slot) in info.anc_slots.iter().enumerate() {
                    let mut partners: Vec<Cell> = info.partners[i]
                        .iter()
                        .filter(|&&s| frame[s] != NO_QUBIT)
                        .map(|&s| self.st.cell_of(frame[s]))
                        .collect();
                    if partners.is_empty() {
                        partners = frame[..info.param_slots].iter().map(|&q| self.st.cell_of(q)).collect();
                    }
                    if partners.is_empty() {
                        partners = self.st.live_qubits().map(|q| self.st.cell_of(q)).collect();
                    }
                    let now = partners.iter().map(|&c| self.ready[c as usize]).max().unwrap_or(0);
                    match laa_allocate(1, &partners, now, &self.ready, &mut self.st, self.m, self.cfg.laa)? {
                        AllocOutcome::Granted(q) => {
                            frame[slot] = q[0];
                            ids.push(q[0]);
                        }
                        AllocOutcome::Pending(_) => {
                            // Return what this request already holds before giving up.
                            if !ids.is_empty() {
                                self.st.heap_push(&ids, 0)?;
                            }
                            return Err(self.stall());
                        }
                    }
                }
                ids
            }
        };
        for (&slot, &q) in info.anc_slots.iter().zip(&ids) {
            frame[slot] = q;
            self.set_shadow(q, false);
        }
        Ok(ids)
    }

    /// A request that cannot be served. The interpreter is sequential, so
    /// nothing in flight can reclaim qubits and the pending request is final.
    fn stall(&mut self) -> SimError {
        match self.st.resolve_pending(false) {
            Err(e) => e.into(),
            Ok(_) => SimError::Alloc(AllocError::Deadlock {
                requested: 0,
                live: self.st.n_active(),
                capacity: self.st.capacity(),
            }),
        }
    }

    fn free(&mut self, f: FuncId, anc: &[QubitId]) -> Result<(), SimError> {
        if anc.is_empty() {
            return Ok(());
        }
        if let Some(bits) = &self.shadow {
            if let Some(&q) = anc.iter().find(|&&q| bits[q as usize]) {
                return Err(SimError::Verification(format!(
                    "qubit {q} of {} is not |0> when reclaimed",
                    self.p.functions[f].name
                )));
            }
        }
        let t = anc.iter().map(|&q| self.ready[self.st.cell_of(q) as usize]).max().unwrap_or(0);
        for &q in anc {
            self.ready[self.st.cell_of(q) as usize] = t;
        }
        self.st.heap_push(anc, t)?;
        Ok(())
    }

    fn set_shadow(&mut self, q: QubitId, v: bool) {
        if let Some(bits) = &mut self.shadow {
            if bits.len() <= q as usize {
                bits.resize(q as usize + 1, false);
            }
            bits[q as usize] = v;
        }
    }

    fn apply_shadow(&mut self, kind: GateKind, qs: &[QubitId]) {
        let Some(bits) = &mut self.shadow else { return };
        let b = |q: QubitId| bits[q as usize];
        match kind {
            GateKind::X => bits[qs[0] as usize] ^= true,
            GateKind::Cnot => {
                let v = b(qs[0]);
                bits[qs[1] as usize] ^= v;
            }
            GateKind::Toffoli => {
                let v = b(qs[0]) && b(qs[1]);
                bits[qs[2] as usize] ^= v;
            }
            GateKind::Swap => bits.swap(qs[0] as usize, qs[1] as usize),
            GateKind::H | GateKind::T | GateKind::Tdg => unreachable!("shadow runs only on classical programs"),
        }
    }

    fn gate(&mut self, kind: GateKind, qs: &[QubitId]) -> Result<(), SimError> {
        self.apply_shadow(kind, qs);
        if kind == GateKind::Toffoli && self.m.is_grid() {
            if self.cfg.record_events {
                let cells = [self.st.cell_of(qs[0]), self.st.cell_of(qs[1]), self.st.cell_of(qs[2])];
                self.tl.toffoli_groups.push(ToffoliGroup { first_event: self.tl.events.len(), cells });
            }
            let g = GateOp { kind, operands: qs.to_vec() };
            for piece in decompose_toffoli(&g).expect("Toffoli decomposes") {
                self.primitive(piece.kind, &piece.operands, true);
            }
        } else {
            self.primitive(kind, qs, false);
        }
        Ok(())
    }

    fn primitive(&mut self, kind: GateKind, qs: &[QubitId], piece: bool) {
        let mut swaps = 0u32;
        let mut retries = 0u32;
        let dur = self.m.gate_cycles(kind) as u64;
        let start = match qs.len() {
            1 => self.ready[self.st.cell_of(qs[0]) as usize],
            2 => match self.m.mode {
                CommMode::LatticeSwap => {
                    swaps = self.route_swaps(qs[0], qs[1]);
                    self.comm[self.cur].record(swaps as f64);
                    self.ready_max(qs)
                }
                CommMode::FtBraid => {
                    let (t, r) = self.route_braid(qs[0], qs[1], dur);
                    retries = r;
                    self.comm[self.cur].record(r as f64);
                    t
                }
                CommMode::FullyConnected => self.ready_max(qs),
            },
            _ => self.ready_max(qs),
        };
        let end = start + dur;
        let mut ev = GateEvent {
            kind,
            arity: qs.len() as u8,
            qubits: [NO_QUBIT; 3],
            cells: [0; 3],
            start,
            end,
            inserted_swaps: swaps,
            braid_retries: retries,
            routing: false,
            toffoli_piece: piece,
        };
        for (i, &q) in qs.iter().enumerate() {
            let c = self.st.cell_of(q);
            self.ready[c as usize] = end;
            self.st.touch(q, start);
            ev.qubits[i] = q;
            ev.cells[i] = c;
        }
        self.tl.makespan = self.tl.makespan.max(end);
        match kind {
            GateKind::X | GateKind::H | GateKind::T | GateKind::Tdg => {
                self.report.n1 += 1;
                self.report.gate_count += 1;
            }
            GateKind::Cnot => {
                self.report.n2 += 1;
                self.report.gate_count += 1;
            }
            GateKind::Swap => {
                self.report.n2 += 3;
                self.report.gate_count += 1;
            }
            GateKind::Toffoli => {
                self.report.n1 += 9;
                self.report.n2 += 6;
                self.report.gate_count += 15;
            }
        }
        self.report.braid_retries += retries as u64;
        if self.cfg.record_events {
            self.tl.events.push(ev);
        }
    }

    fn ready_max(&self, qs: &[QubitId]) -> u64 {
        qs.iter().map(|&q| self.ready[self.st.cell_of(q) as usize]).max().unwrap_or(0)
    }

    /// Moves one operand next to the other with a chain of SWAPs. The
    /// operand that is ready first moves, so the chain overlaps with the
    /// other operand's pending work.
    fn route_swaps(&mut self, a: QubitId, b: QubitId) -> u32 {
        let (ca, cb) = (self.st.cell_of(a), self.st.cell_of(b));
        if self.m.cell_distance(ca, cb) <= 1 {
            return 0;
        }
        let (ra, rb) = (self.ready[ca as usize], self.ready[cb as usize]);
        let (from, to) = if ra < rb || (ra == rb && ca < cb) { (ca, cb) } else { (cb, ca) };
        let chain = self.m.swap_route(from, to);
        let dur = self.m.gate_cycles(GateKind::Swap) as u64;
        for w in chain.path[..chain.path.len() - 1].windows(2) {
            let (x, y) = (w[0], w[1]);
            let start = self.ready[x as usize].max(self.ready[y as usize]);
            let end = start + dur;
            self.ready[x as usize] = end;
            self.ready[y as usize] = end;
            let (ox, oy) = (self.st.occupant(x), self.st.occupant(y));
            for q in [ox, oy].into_iter().flatten() {
                self.st.touch(q, start);
            }
            self.st.swap_cells(x, y);
            self.tl.makespan = self.tl.makespan.max(end);
            self.report.swap_count += 1;
            self.report.n2 += 3;
            if self.cfg.record_events {
                self.tl.events.push(GateEvent {
                    kind: GateKind::Swap,
                    arity: 2,
                    qubits: [ox.unwrap_or(NO_QUBIT), oy.unwrap_or(NO_QUBIT), NO_QUBIT],
                    cells: [x, y, 0],
                    start,
                    end,
                    inserted_swaps: 0,
                    braid_retries: 0,
                    routing: true,
                    toffoli_piece: false,
                });
            }
        }
        chain.swap_count
    }

    /// Earliest cycle at which an L-shaped braid between the operands fits,
    /// retrying one cycle at a time. Returns the start and the retry count.
    fn route_braid(&mut self, a: QubitId, b: QubitId, dur: u64) -> (u64, u32) {
        let (ca, cb) = (self.st.cell_of(a), self.st.cell_of(b));
        let mut t = self.ready[ca as usize].max(self.ready[cb as usize]);
        let mut retries = 0;
        loop {
            for route in self.m.braid_candidates(ca, cb) {
                if self.braids.is_free(t, dur, &route) {
                    self.braids.occupy(t, dur, &route);
                    if self.cfg.record_events {
                        self.tl.braids.push(BraidRoute { cells: route, start_cycle: t, end_cycle: t + dur });
                    }
                    return (t, retries);
                }
            }
            t += 1;
            retries += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;

    fn run(src: &str, m: &MachineModel, policy: PolicyKind) -> SimOutcome {
        let p = parse_program(src).unwrap();
        let mut cfg = SimConfig::new(policy);
        cfg.verify = true;
        simulate(&p, m, &cfg).unwrap()
    }

    #[test]
    fn single_cnot_fully_connected() {
        let m = MachineModel::fully_connected(8).unwrap();
        let out = run("module main(qbit a[1], qbit b[1]) { CNOT(a, b); }", &m, PolicyKind::Eager);
        assert_eq!(out.timeline.events.len(), 1);
        assert_eq!(out.timeline.makespan, 1);
        assert_eq!(out.report.aqv, 2);
    }

    #[test]
    fn disjoint_gates_run_in_parallel() {
        let m = MachineModel::fully_connected(8).unwrap();
        let out = run("module main(qbit a[4]) { CNOT(a[0], a[1]); CNOT(a[2], a[3]); }", &m, PolicyKind::Eager);
        assert!(out.timeline.events.iter().all(|e| e.start == 0));
    }

    #[test]
    fn distant_cnot_inserts_swaps() {
        // Data qubits land center-out on a 7x1 strip: cells 3, 2, 4, 1, ...
        // so a[2] (cell 4) and a[3] (cell 1) are three apart.
        let m = MachineModel::grid(CommMode::LatticeSwap, 7, 1, None).unwrap();
        let out = run("module main(qbit a[4]) { CNOT(a[2], a[3]); }", &m, PolicyKind::Eager);
        assert_eq!(out.report.swap_count, 2);
        assert_eq!(out.timeline.makespan, 7);
        let gate = out.timeline.events.last().unwrap();
        assert_eq!((gate.start, gate.inserted_swaps), (6, 2));
    }

    #[test]
    fn braid_conflict_delays_by_one_cycle() {
        // On a 5x1 strip data lands at cells 2, 1, 3, 0, 4. The first braid
        // spans the whole strip, so the second must wait one cycle.
        let m = MachineModel::grid(CommMode::FtBraid, 5, 1, None).unwrap();
        let src = "module main(qbit a[5]) { CNOT(a[3], a[4]); CNOT(a[1], a[0]); }";
        let out = run(src, &m, PolicyKind::Eager);
        let ev = &out.timeline.events;
        assert_eq!((ev[0].start, ev[0].braid_retries), (0, 0));
        assert_eq!((ev[1].start, ev[1].braid_retries), (1, 1));
        assert_eq!(out.report.braid_retries, 1);
        assert_eq!(out.timeline.braids.len(), 2);
    }

    const FUN1: &str = "module fun1(qbit in[3], qbit out[1]) { qbit anc[1]; Allocate(anc, 1);
        Compute { Toffoli(in[0], in[1], in[2]); CNOT(in[2], anc[0]); Toffoli(in[1], in[0], anc[0]); }
        Store { CNOT(anc[0], out[0]); }
        Free(anc, 1); }
        module main() { qbit new[4]; Allocate(new, 4); fun1(new[0:3], new[3]); }";

    #[test]
    fn eager_uncomputes_at_the_free() {
        let m = MachineModel::fully_connected(16).unwrap();
        let out = run(FUN1, &m, PolicyKind::Eager);
        // 3 compute + 1 store + 3 uncompute gates.
        assert_eq!(out.timeline.events.len(), 7);
        assert_eq!(out.decisions.len(), 1);
        assert_eq!(out.decisions[0].decision, Decision::Uncompute);
        assert_eq!(out.verified, Some(true));
    }

    #[test]
    fn lazy_defers_to_main() {
        let m = MachineModel::fully_connected(16).unwrap();
        let out = run(FUN1, &m, PolicyKind::Lazy);
        assert_eq!(out.decisions[0].decision, Decision::TransferToParent);
        assert_eq!(out.timeline.events.len(), 7);
        let kinds: Vec<BlockRunKind> = out.timeline.block_runs.iter().map(|r| r.kind).collect();
        assert_eq!(kinds.last(), Some(&BlockRunKind::Uncompute));
    }

    #[test]
    fn deadlock_when_capacity_too_small() {
        let m = MachineModel::fully_connected(4).unwrap();
        let p = parse_program(FUN1).unwrap();
        let err = simulate(&p, &m, &SimConfig::new(PolicyKind::Eager)).unwrap_err();
        assert!(err.is_deadlock());
    }

    #[test]
    fn single_qubit_gate_waits_for_ready() {
        let m = MachineModel::fully_connected(4).unwrap();
        let src = "module main(qbit a[2]) { CNOT(a[0], a[1]); X(a[0]); X(a[0]); X(a[0]); X(a[0]); X(a[0]); T(a[0]); }";
        let out = run(src, &m, PolicyKind::Eager);
        let t = out.timeline.events.last().unwrap();
        assert_eq!((t.start, t.end), (6, 7));
        assert_eq!(out.verified, None);
    }
}
