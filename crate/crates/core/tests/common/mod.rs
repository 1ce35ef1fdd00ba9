//! Test oracles that share no code with the scheduler: a direct classical
//! interpreter of the IR and a cell-level replay of scheduled timelines.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reclaim::ir::{GateKind, Item, Program, RegRole, UncomputeMode};
use reclaim::sched::{Timeline, NO_QUBIT};

/// Ancilla left dirty at a Free, reported by [`eval`].
#[derive(Debug, PartialEq, Eq)]
pub struct DirtyFree {
    pub function: String,
}

struct Interp<'a> {
    p: &'a Program,
    bits: Vec<bool>,
}

fn apply(bits: &mut [bool], kind: GateKind, qs: &[usize]) {
    match kind {
        GateKind::X => bits[qs[0]] ^= true,
        GateKind::Cnot => bits[qs[1]] ^= bits[qs[0]],
        GateKind::Toffoli => bits[qs[2]] ^= bits[qs[0]] & bits[qs[1]],
        GateKind::Swap => bits.swap(qs[0], qs[1]),
        k => panic!("{k} has no classical action"),
    }
}

impl Interp<'_> {
    fn fresh(&mut self, n: usize) -> Vec<usize> {
        let start = self.bits.len();
        self.bits.resize(start + n, false);
        (start..start + n).collect()
    }

    /// Runs module `f` (or its inverse) on the given parameter qubits.
    /// Every ancilla frame is fresh, so no reuse can mask a dirty Free.
    fn exec(&mut self, f: usize, params: &[usize], inverse: bool) -> Result<(), DirtyFree> {
        let def = &self.p.functions[f];
        // Classical gates are self-inverse, so uncomputing is replaying the
        // compute items backwards with call directions flipped.
        let uncompute: Vec<(Item, bool)> = match def.uncompute_mode {
            UncomputeMode::Auto => def.compute.items.iter().rev().map(|it| (it.clone(), true)).collect(),
            UncomputeMode::Explicit => def.uncompute.items.iter().map(|it| (it.clone(), false)).collect(),
        };
        let mut seq: Vec<(Item, bool)> = def.compute.items.iter().map(|it| (it.clone(), false)).collect();
        seq.extend(def.store.items.iter().map(|it| (it.clone(), false)));
        // An entry without ancillas keeps what its body computed.
        if f != self.p.entry || !def.frees.is_empty() {
            seq.extend(uncompute);
        }
        if inverse {
            seq.reverse();
            for s in &mut seq {
                s.1 = !s.1;
            }
        }
        self.run_items(f, params, &seq)
    }

    fn run_items(&mut self, f: usize, params: &[usize], seq: &[(Item, bool)]) -> Result<(), DirtyFree> {
        let def = &self.p.functions[f];
        let mut slots: Vec<Vec<usize>> = Vec::new();
        let mut used = 0;
        for (i, r) in def.registers.iter().enumerate() {
            let w = r.width as usize;
            if i < def.n_params {
                slots.push(params[used..used + w].to_vec());
                used += w;
            } else {
                slots.push(self.fresh(w));
            }
        }
        for (it, flip) in seq {
            match it {
                Item::Gate(g) => {
                    let qs: Vec<usize> =
                        g.operands.iter().map(|q| slots[q.reg as usize][q.index as usize]).collect();
                    apply(&mut self.bits, g.kind, &qs);
                }
                Item::Call(c) => {
                    let qs: Vec<usize> = c.qubits().map(|q| slots[q.reg as usize][q.index as usize]).collect();
                    self.exec(c.callee, &qs, c.inverse ^ flip)?;
                }
            }
        }
        for (i, r) in def.registers.iter().enumerate().skip(def.n_params) {
            if r.role == RegRole::Ancilla && slots[i].iter().any(|&q| self.bits[q]) {
                return Err(DirtyFree { function: def.name.clone() });
            }
        }
        Ok(())
    }
}

/// Runs `f`'s Compute block followed by `uncompute` on parameter values
/// `params`, with callees executed in full. Returns the final parameter
/// values; fails if any ancilla of `f` or of a callee ends non-zero.
pub fn compute_then(p: &Program, f: usize, uncompute: &[Item], params: &[bool]) -> Result<Vec<bool>, DirtyFree> {
    let def = &p.functions[f];
    assert_eq!(params.len(), def.param_width());
    let mut seq: Vec<(Item, bool)> = def.compute.items.iter().map(|it| (it.clone(), false)).collect();
    seq.extend(uncompute.iter().map(|it| (it.clone(), false)));
    let mut it = Interp { p, bits: params.to_vec() };
    let slots: Vec<usize> = (0..params.len()).collect();
    it.run_items(f, &slots, &seq)?;
    it.bits.truncate(params.len());
    Ok(it.bits)
}

/// Width of the entry's data: parameters followed by data registers.
pub fn data_width(p: &Program) -> usize {
    p.entry_fn()
        .registers
        .iter()
        .filter(|r| matches!(r.role, RegRole::Param | RegRole::Data))
        .map(|r| r.width as usize)
        .sum()
}

/// Evaluates `main` (or its inverse) on classical inputs laid out as in
/// [`Timeline::data`].
pub fn eval_dir(p: &Program, inputs: &[bool], inverse: bool) -> Result<Vec<bool>, DirtyFree> {
    let n = data_width(p);
    assert_eq!(inputs.len(), n);
    // Main's data registers become leading parameters, so the interpreter
    // treats every module uniformly.
    let wrapped = wrap_entry(p, p.entry);
    let mut it = Interp { p: &wrapped, bits: inputs.to_vec() };
    let slots: Vec<usize> = (0..n).collect();
    it.exec(wrapped.entry, &slots, inverse)?;
    it.bits.truncate(n);
    Ok(it.bits)
}

pub fn eval(p: &Program, inputs: &[bool]) -> Result<Vec<bool>, DirtyFree> {
    eval_dir(p, inputs, false)
}

/// Copy of the program whose entry takes its data registers as leading
/// parameters.
fn wrap_entry(p: &Program, entry: usize) -> Program {
    let mut q = p.clone();
    let def = &mut q.functions[entry];
    let mut order: Vec<usize> = (0..def.n_params).collect();
    order.extend((def.n_params..def.registers.len()).filter(|&i| def.registers[i].role == RegRole::Data));
    let rest: Vec<usize> = (0..def.registers.len()).filter(|i| !order.contains(i)).collect();
    let n_params = order.len();
    order.extend(rest);
    let remap: Vec<u32> = {
        let mut m = vec![0u32; order.len()];
        for (new, &old) in order.iter().enumerate() {
            m[old] = new as u32;
        }
        m
    };
    def.registers = order.iter().map(|&i| def.registers[i].clone()).collect();
    def.n_params = n_params;
    def.frees = def.frees.iter().map(|&r| remap[r as usize]).collect();
    def.allocs = def.allocs.iter().map(|&r| remap[r as usize]).collect();
    for block in [&mut def.compute, &mut def.store, &mut def.uncompute] {
        for it in &mut block.items {
            match it {
                Item::Gate(g) => {
                    for o in &mut g.operands {
                        o.reg = remap[o.reg as usize];
                    }
                }
                Item::Call(c) => {
                    for a in &mut c.args {
                        for o in a {
                            o.reg = remap[o.reg as usize];
                        }
                    }
                }
            }
        }
    }
    q
}

/// Textbook Clifford+T Toffoli on roles 0, 1 (controls) and 2 (target).
const TOFFOLI_PIECES: [(GateKind, &[usize]); 15] = [
    (GateKind::H, &[2]),
    (GateKind::Cnot, &[1, 2]),
    (GateKind::Tdg, &[2]),
    (GateKind::Cnot, &[0, 2]),
    (GateKind::T, &[2]),
    (GateKind::Cnot, &[1, 2]),
    (GateKind::Tdg, &[2]),
    (GateKind::Cnot, &[0, 2]),
    (GateKind::T, &[1]),
    (GateKind::T, &[2]),
    (GateKind::H, &[2]),
    (GateKind::Cnot, &[0, 1]),
    (GateKind::T, &[0]),
    (GateKind::Tdg, &[1]),
    (GateKind::Cnot, &[0, 1]),
];

/// Final cell contents and data outputs of a replayed timeline.
pub struct Replay {
    pub cells: Vec<bool>,
    pub outputs: Vec<bool>,
}

/// Replays a timeline on physical cells: routing swaps move cell contents,
/// program gates act on the cells recorded at issue time, and each
/// decomposed Toffoli acts once, at its first piece, on the cells its
/// operands occupied then.
///
/// Acting early is only sound if the 15 pieces really form that Toffoli and
/// nothing else touches its operands until the last piece, so both are
/// checked: cell labels follow the operands through routing swaps.
pub fn replay(tl: &Timeline, num_cells: u32, inputs: &[bool]) -> Result<Replay, String> {
    let mut cells = vec![false; num_cells as usize];
    for (d, &v) in tl.data.iter().zip(inputs) {
        cells[d.initial_cell as usize] = v;
    }
    // label[cell] = (open group, operand role)
    let mut label: Vec<Option<(usize, usize)>> = vec![None; num_cells as usize];
    let mut progress = vec![0usize; tl.toffoli_groups.len()];
    let mut next_group = 0;
    for (i, ev) in tl.events.iter().enumerate() {
        while next_group < tl.toffoli_groups.len() && tl.toffoli_groups[next_group].first_event == i {
            let g = &tl.toffoli_groups[next_group];
            let c = g.cells.map(|c| c as usize);
            for (role, &cell) in c.iter().enumerate() {
                if label[cell].is_some() {
                    return Err(format!("Toffoli group {next_group} starts on a cell still inside another group"));
                }
                label[cell] = Some((next_group, role));
            }
            apply(&mut cells, GateKind::Toffoli, &c);
            next_group += 1;
        }
        let cs: Vec<usize> = ev.cells().iter().map(|&c| c as usize).collect();
        if ev.routing {
            cells.swap(cs[0], cs[1]);
            label.swap(cs[0], cs[1]);
            continue;
        }
        if ev.toffoli_piece {
            let (g, _) = label[cs[0]].ok_or(format!("event {i}: Toffoli piece outside any group"))?;
            let (kind, roles) = TOFFOLI_PIECES[progress[g]];
            let got: Vec<Option<(usize, usize)>> = cs.iter().map(|&c| label[c]).collect();
            let want: Vec<Option<(usize, usize)>> = roles.iter().map(|&r| Some((g, r))).collect();
            if ev.kind != kind || got != want {
                return Err(format!("event {i}: piece {} of group {g} is not {kind}{roles:?}", progress[g]));
            }
            progress[g] += 1;
            if progress[g] == TOFFOLI_PIECES.len() {
                for l in label.iter_mut().filter(|l| l.is_some_and(|(h, _)| h == g)) {
                    *l = None;
                }
            }
            continue;
        }
        if let Some(c) = cs.iter().find(|&&c| label[c].is_some()) {
            return Err(format!("event {i} touches cell {c} in the middle of a Toffoli"));
        }
        apply(&mut cells, ev.kind, &cs);
    }
    if next_group != tl.toffoli_groups.len() || progress.iter().any(|&p| p != TOFFOLI_PIECES.len()) {
        return Err("unfinished Toffoli group".into());
    }
    let outputs = tl.data.iter().map(|d| cells[d.final_cell as usize]).collect();
    Ok(Replay { cells, outputs })
}

/// Live qubits per cycle, integrated one cycle at a time.
pub fn brute_force_aqv(tl: &Timeline) -> u64 {
    let mut live = vec![0u64; tl.makespan as usize + 1];
    for s in &tl.segments {
        for t in s.t_i..s.t_f {
            live[t as usize] += 1;
        }
    }
    live.iter().sum()
}

/// Every operand of every program gate lies inside one of its qubit's
/// segments. Routing swaps may pass through reclaimed qubits, but the
/// qubit being moved is live.
pub fn events_within_segments(tl: &Timeline) -> Result<(), String> {
    let mut by_qubit: std::collections::HashMap<u32, Vec<(u64, u64)>> = Default::default();
    for s in &tl.segments {
        by_qubit.entry(s.qubit).or_default().push((s.t_i, s.t_f));
    }
    let live = |q: u32, a: u64, b: u64| {
        q != NO_QUBIT && by_qubit.get(&q).is_some_and(|v| v.iter().any(|&(s, e)| s <= a && b <= e))
    };
    for (i, ev) in tl.events.iter().enumerate() {
        let ok = if ev.routing {
            ev.qubits().iter().any(|&q| live(q, ev.start, ev.end))
        } else {
            ev.qubits().iter().all(|&q| live(q, ev.start, ev.end))
        };
        if !ok {
            return Err(format!("event {i} ({:?} on {:?}) runs outside live segments", ev.kind, ev.qubits()));
        }
    }
    Ok(())
}

/// Events on a cell never overlap in time and run in issue order.
pub fn cells_never_overlap(tl: &Timeline, num_cells: u32) -> Result<(), String> {
    let mut last_end = vec![0u64; num_cells as usize];
    for (i, ev) in tl.events.iter().enumerate() {
        for &c in ev.cells() {
            if ev.start < last_end[c as usize] {
                return Err(format!("event {i} starts at {} on cell {c} before {}", ev.start, last_end[c as usize]));
            }
            last_end[c as usize] = ev.end;
        }
    }
    Ok(())
}

pub fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<bool> {
    (0..n).map(|_| rng.random()).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Little-endian value of `bits[range]`.
pub fn value(bits: &[bool], range: std::ops::Range<usize>) -> u64 {
    bits[range].iter().rev().fold(0, |acc, &b| acc << 1 | b as u64)
}

/// Writes `v` little-endian into `bits[range]`.
pub fn set_value(bits: &mut [bool], range: std::ops::Range<usize>, v: u64) {
    for (i, b) in bits[range].iter_mut().enumerate() {
        *b = v >> i & 1 == 1;
    }
}
