use std::collections::VecDeque;
use std::fmt::Write;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ir::{parse_program, Program};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SyntheticParams {
    /// Depth of the call tree below `main`.
    pub levels: u32,
    pub max_callees: u32,
    pub max_inputs: u32,
    pub max_ancilla: u32,
    pub max_gates: u32,
    pub seed: u64,
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<(), String> {
        for (v, name) in [
            (self.levels, "levels"),
            (self.max_callees, "max_callees"),
            (self.max_inputs, "max_inputs"),
            (self.max_ancilla, "max_ancilla"),
            (self.max_gates, "max_gates"),
        ] {
            if v == 0 {
                return Err(format!("{name} must be at least 1"));
            }
        }
        if self.max_inputs < 2 {
            return Err("max_inputs must be at least 2 (one input and one output)".into());
        }
        Ok(())
    }

    /// Parses `l,d,nq,na,ng,seed`.
    pub fn from_csv(s: &str) -> Result<Self, String> {
        let v: Vec<&str> = s.split(',').map(str::trim).collect();
        if v.len() != 6 {
            return Err(format!("expected l,d,nq,na,ng,seed, got {s:?}"));
        }
        let n = |i: usize| v[i].parse::<u32>().map_err(|_| format!("not a count: {:?}", v[i]));
        let p = SyntheticParams {
            levels: n(0)?,
            max_callees: n(1)?,
            max_inputs: n(2)?,
            max_ancilla: n(3)?,
            max_gates: n(4)?,
            seed: v[5].parse().map_err(|_| format!("not a seed: {:?}", v[5]))?,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parses a `key = value` preset file. `#` starts a comment.
    pub fn from_key_values(text: &str) -> Result<Self, String> {
        let mut p = SyntheticParams { levels: 0, max_callees: 0, max_inputs: 0, max_ancilla: 0, max_gates: 0, seed: 0 };
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| format!("expected key = value: {line:?}"))?;
            let (k, v) = (k.trim(), v.trim());
            let count = || v.parse::<u32>().map_err(|_| format!("{k}: not a count: {v:?}"));
            match k {
                "levels" => p.levels = count()?,
                "max_callees" => p.max_callees = count()?,
                "max_inputs" => p.max_inputs = count()?,
                "max_ancilla" => p.max_ancilla = count()?,
                "max_gates" => p.max_gates = count()?,
                "seed" => p.seed = v.parse().map_err(|_| format!("seed: not a number: {v:?}"))?,
                _ => return Err(format!("unknown key {k:?}")),
            }
        }
        p.validate()?;
        Ok(p)
    }
}

const PRESETS: [(&str, &str); 6] = [
    ("jasmine-s", include_str!("../../presets/jasmine-s.cfg")),
    ("elsa-s", include_str!("../../presets/elsa-s.cfg")),
    ("belle-s", include_str!("../../presets/belle-s.cfg")),
    ("jasmine", include_str!("../../presets/jasmine.cfg")),
    ("elsa", include_str!("../../presets/elsa.cfg")),
    ("belle", include_str!("../../presets/belle.cfg")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset(name: &str) -> Option<SyntheticParams> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, text)| SyntheticParams::from_key_values(text).unwrap_or_else(|e| panic!("preset {n}: {e}")))
}

struct Sig {
    depth: u32,
    n_in: u32,
    n_out: u32,
    n_anc: u32,
    children: Vec<usize>,
}

/// Each function draws from its own stream, so growing the tree never
/// changes functions generated earlier.
fn stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn name(i: usize) -> String {
    if i == 0 {
        "main".into()
    } else {
        format!("f{i}")
    }
}

/// Source text of the synthetic program; see [`gen_synthetic`].
pub fn synthetic_source(p: &SyntheticParams) -> String {
    p.validate().unwrap_or_else(|e| panic!("invalid synthetic parameters: {e}"));
    let nq = p.max_inputs;
    let mut rngs = vec![stream(p.seed, 0)];
    let mut sigs = vec![Sig { depth: 0, n_in: nq, n_out: nq, n_anc: 0, children: Vec::new() }];

    // Signatures, breadth first. A child's outputs come from the caller's
    // ancilla (or main's output register) and its inputs from what is left.
    let mut queue = VecDeque::from([0usize]);
    while let Some(f) = queue.pop_front() {
        if sigs[f].depth == p.levels {
            continue;
        }
        let n_children = rngs[f].random_range(1..=p.max_callees);
        let (out_pool, in_pool) = if f == 0 {
            (sigs[f].n_out, sigs[f].n_in)
        } else {
            (sigs[f].n_anc, sigs[f].n_in + sigs[f].n_anc)
        };
        for _ in 0..n_children {
            let c = sigs.len();
            let mut rng = stream(p.seed, c);
            let n_out = rng.random_range(1..=out_pool.min(nq - 1).max(1));
            let avail = if f == 0 { in_pool } else { in_pool - n_out };
            let n_in = rng.random_range(1..=avail.min(nq - n_out).max(1));
            let n_anc = rng.random_range(1..=p.max_ancilla);
            sigs.push(Sig { depth: sigs[f].depth + 1, n_in, n_out, n_anc, children: Vec::new() });
            rngs.push(rng);
            sigs[f].children.push(c);
            queue.push_back(c);
        }
    }

    let mut out = String::new();
    for f in (1..sigs.len()).rev() {
        write_function(&mut out, f, &sigs, &mut rngs[f], p.max_gates);
    }
    let main = &sigs[0];
    let _ = writeln!(out, "module main(qbit x[{}], qbit y[{}]) {{", main.n_in, main.n_out);
    for &c in &main.children {
        let rng = &mut rngs[0];
        let ys = sample(rng, main.n_out as usize, sigs[c].n_out as usize);
        let xs = sample(rng, main.n_in as usize, sigs[c].n_in as usize);
        let xs: Vec<String> = xs.iter().map(|i| format!("x[{i}]")).collect();
        let ys: Vec<String> = ys.iter().map(|i| format!("y[{i}]")).collect();
        let _ = writeln!(out, "    {}({{{}}}, {{{}}});", name(c), xs.join(", "), ys.join(", "));
    }
    out.push_str("}\n");
    out
}

fn write_function(out: &mut String, f: usize, sigs: &[Sig], rng: &mut ChaCha8Rng, max_gates: u32) {
    let s = &sigs[f];
    let _ = writeln!(out, "module {}(qbit x[{}], qbit y[{}]) {{", name(f), s.n_in, s.n_out);
    let _ = writeln!(out, "    qbit anc[{}];\n    Allocate(anc, {});\n    Compute {{", s.n_anc, s.n_anc);

    // Controls may be inputs or ancilla; targets are always ancilla.
    let pool: Vec<String> =
        (0..s.n_in).map(|i| format!("x[{i}]")).chain((0..s.n_anc).map(|i| format!("anc[{i}]"))).collect();
    let n_gates = rng.random_range(max_gates.div_ceil(2)..=max_gates) as usize;
    let mut call_at: Vec<usize> = s.children.iter().map(|_| rng.random_range(0..=n_gates)).collect();
    call_at.sort_unstable();
    let mut next_call = 0;
    for g in 0..=n_gates {
        while next_call < call_at.len() && call_at[next_call] == g {
            let c = s.children[next_call];
            let ys = sample(rng, s.n_anc as usize, sigs[c].n_out as usize).into_vec();
            let taken: Vec<usize> = ys.iter().map(|&a| s.n_in as usize + a).collect();
            let rest: Vec<usize> = (0..pool.len()).filter(|i| !taken.contains(i)).collect();
            let xs = sample(rng, rest.len(), sigs[c].n_in as usize);
            let xs: Vec<&str> = xs.iter().map(|i| pool[rest[i]].as_str()).collect();
            let ys: Vec<String> = ys.iter().map(|i| format!("anc[{i}]")).collect();
            let _ = writeln!(out, "        {}({{{}}}, {{{}}});", name(c), xs.join(", "), ys.join(", "));
            next_call += 1;
        }
        if g == n_gates {
            break;
        }
        let target = s.n_in as usize + rng.random_range(0..s.n_anc as usize);
        let controls: Vec<usize> = (0..pool.len()).filter(|&i| i != target).collect();
        let roll: f64 = rng.random();
        let want = if roll < 0.1 {
            0
        } else if roll < 0.5 {
            1
        } else {
            2
        };
        let k = want.min(controls.len());
        let picked = sample(rng, controls.len(), k);
        let mut ops: Vec<&str> = picked.iter().map(|i| pool[controls[i]].as_str()).collect();
        ops.push(&pool[target]);
        let kind = ["X", "CNOT", "Toffoli"][k];
        let _ = writeln!(out, "        {kind}({});", ops.join(", "));
    }
    out.push_str("    }\n    Store {\n");
    for j in 0..s.n_out {
        let r = rng.random_range(0..s.n_anc);
        let _ = writeln!(out, "        CNOT(anc[{r}], y[{j}]);");
    }
    let _ = writeln!(out, "    }}\n    Uncompute {{ auto }}\n    Free(anc, {});\n}}\n", s.n_anc);
}

/// Random modular program: a call tree of depth exactly `levels` below
/// `main`, each module with at most `max_callees` callees, `max_inputs`
/// parameter qubits, `max_ancilla` ancilla and `max_gates` X/CNOT/Toffoli
/// gates in its compute block. Deterministic in the seed.
pub fn gen_synthetic(p: &SyntheticParams) -> Program {
    let src = synthetic_source(p);
    parse_program(&src).unwrap_or_else(|e| panic!("generated program failed to parse: {e}\n{src}"))
}
