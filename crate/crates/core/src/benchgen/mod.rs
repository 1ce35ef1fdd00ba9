//! Benchmark programs: controlled ripple-carry adders, controlled
//! multipliers, nested chains and seeded random modular programs.
//!
//! Generators build source text and run it through the parser, so every
//! generated program is validated like a hand-written one.

mod synthetic;

use std::fmt::Write;

use thiserror::Error;

use crate::ir::{parse_program, Program};

pub use synthetic::{gen_synthetic, preset, preset_names, synthetic_source, SyntheticParams};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BenchError {
    #[error("unknown benchmark {0:?}")]
    Unknown(String),
    #[error("bad benchmark parameters for {name}: {msg}")]
    Params { name: String, msg: String },
}

/// Adder stage width: each call adds this many bits of the addend.
const CHUNK: u32 = 2;

fn stage_name(w: u32, m: u32) -> String {
    format!("add_w{w}_m{m}")
}

/// Stage module `add_w{w}_m{m}(c[1], y[w], t[m])`: `t += c * y mod 2^m`.
///
/// The controlled addend is staged into ancilla `u` (zero-extended to
/// `m - 1` bits) by the Compute block, the Store block ripples it into `t`
/// with MAJ/UMA cells and carries out into `t[m-1]`, and the derived
/// Uncompute clears `u`.
fn write_stage(out: &mut String, w: u32, m: u32) {
    debug_assert!(w >= 1 && m > w);
    let k = m - 1;
    let _ = writeln!(out, "module {}(qbit c[1], qbit y[{w}], qbit t[{m}]) {{", stage_name(w, m));
    let _ = writeln!(out, "    qbit u[{k}];\n    qbit c0[1];\n    Allocate(u, {k});\n    Allocate(c0, 1);");
    out.push_str("    Compute {\n");
    for i in 0..w {
        let _ = writeln!(out, "        Toffoli(c[0], y[{i}], u[{i}]);");
    }
    out.push_str("    }\n    Store {\n");
    // Cuccaro ripple: carries travel through the addend register.
    let carry = |i: u32| if i == 0 { "c0[0]".to_string() } else { format!("u[{}]", i - 1) };
    for i in 0..k {
        let (c, b, a) = (carry(i), format!("t[{i}]"), format!("u[{i}]"));
        let _ = writeln!(out, "        CNOT({a}, {b});\n        CNOT({a}, {c});\n        Toffoli({c}, {b}, {a});");
    }
    let _ = writeln!(out, "        CNOT(u[{}], t[{}]);", k - 1, k);
    for i in (0..k).rev() {
        let (c, b, a) = (carry(i), format!("t[{i}]"), format!("u[{i}]"));
        let _ = writeln!(out, "        Toffoli({c}, {b}, {a});\n        CNOT({a}, {c});\n        CNOT({c}, {b});");
    }
    out.push_str("    }\n    Uncompute { auto }\n    Free(c0, 1);\n    Free(u, ");
    let _ = writeln!(out, "{k});\n}}\n");
}

fn parsed(src: String) -> Program {
    parse_program(&src).unwrap_or_else(|e| panic!("generated program failed to parse: {e}\n{src}"))
}

/// Source of the controlled adder; see [`gen_adder`].
pub fn adder_source(n: u32) -> String {
    assert!(n >= 1, "adder width must be at least 1");
    let mut stages = Vec::new();
    let mut off = 0;
    while off < n {
        let w = CHUNK.min(n - off);
        stages.push((off, w, n + 1 - off));
        off += w;
    }
    let mut out = String::new();
    let mut defined = Vec::new();
    for &(_, w, m) in &stages {
        if !defined.contains(&(w, m)) {
            write_stage(&mut out, w, m);
            defined.push((w, m));
        }
    }
    let _ = writeln!(out, "module main(qbit ctrl[1], qbit a[{}], qbit b[{n}]) {{", n + 1);
    for &(off, w, m) in &stages {
        let _ = writeln!(out, "    {}(ctrl, b[{off}:{}], a[{off}:{}]);", stage_name(w, m), off + w, off + m);
    }
    out.push_str("}\n");
    out
}

/// In-place controlled adder: `a += ctrl * b mod 2^(n+1)` with `a` of
/// width `n + 1` and `b` of width `n`. The addend is consumed two bits at a
/// time by stage modules, each with its own ancilla frame.
pub fn gen_adder(n: u32) -> Program {
    parsed(adder_source(n))
}

/// Source of the controlled multiplier; see [`gen_multiplier`].
pub fn multiplier_source(n: u32) -> String {
    assert!(n >= 1, "multiplier width must be at least 1");
    let mut out = String::new();
    write_stage(&mut out, n, n + 1);
    let _ = writeln!(out, "module cmul(qbit ctrl[1], qbit a[{n}], qbit b[{n}], qbit p[{}]) {{", 2 * n);
    let _ = writeln!(out, "    qbit acc[{}];\n    qbit x[1];\n    Allocate(acc, {});\n    Allocate(x, 1);", 2 * n, 2 * n);
    out.push_str("    Compute {\n");
    for i in 0..n {
        let _ = writeln!(out, "        Toffoli(ctrl[0], b[{i}], x[0]);");
        let _ = writeln!(out, "        {}(x, a, acc[{i}:{}]);", stage_name(n, n + 1), i + n + 1);
        let _ = writeln!(out, "        Toffoli(ctrl[0], b[{i}], x[0]);");
    }
    out.push_str("    }\n    Store {\n");
    for i in 0..2 * n {
        let _ = writeln!(out, "        CNOT(acc[{i}], p[{i}]);");
    }
    let _ = writeln!(out, "    }}\n    Uncompute {{ auto }}\n    Free(x, 1);\n    Free(acc, {});\n}}\n", 2 * n);
    let _ = writeln!(
        out,
        "module main(qbit ctrl[1], qbit a[{n}], qbit b[{n}], qbit p[{}]) {{\n    cmul(ctrl, a, b, p);\n}}",
        2 * n
    );
    out
}

/// Out-of-place controlled multiplier: `p ^= ctrl * a * b` with `p` of width
/// `2n`. Shift-and-add into a scratch accumulator, one adder stage per bit of
/// `b`, then copied out and uncomputed.
pub fn gen_multiplier(n: u32) -> Program {
    parsed(multiplier_source(n))
}

/// Source of the nested chain; see [`gen_nested_chain`].
pub fn nested_chain_source(depth: u32, gates_per_level: u32) -> String {
    assert!(depth >= 1, "chain depth must be at least 1");
    let mut out = String::new();
    for k in 1..=depth {
        let _ = writeln!(out, "module f{k}(qbit in[2], qbit out[1]) {{");
        out.push_str("    qbit anc[2];\n    Allocate(anc, 2);\n    Compute {\n");
        for j in 0..gates_per_level {
            out.push_str(match j % 3 {
                0 => "        Toffoli(in[0], in[1], anc[0]);\n",
                1 => "        CNOT(in[1], anc[1]);\n",
                _ => "        X(anc[1]);\n",
            });
        }
        if k < depth {
            let _ = writeln!(out, "        f{}({{in[0], anc[0]}}, anc[1]);", k + 1);
        }
        out.push_str("    }\n    Store {\n        CNOT(anc[0], out[0]);\n        CNOT(anc[1], out[0]);\n    }\n");
        out.push_str("    Uncompute { auto }\n    Free(anc, 2);\n}\n\n");
    }
    out.push_str("module main(qbit x[2], qbit y[1]) {\n    f1(x, y);\n}\n");
    out
}

/// Linear chain `main -> f1 -> ... -> fL`, each compute block a fixed run of
/// gates followed by one call to the next level.
pub fn gen_nested_chain(depth: u32, gates_per_level: u32) -> Program {
    parsed(nested_chain_source(depth, gates_per_level))
}

fn parse_u32(name: &str, s: &str) -> Result<u32, BenchError> {
    s.trim().parse().map_err(|_| BenchError::Params { name: name.into(), msg: format!("not a count: {s:?}") })
}

/// Resolves a `--bench` spec to source text.
///
/// Accepted forms: `adderN`, `multiplierN`, `adder:N`, `multiplier:N`,
/// `chain:L[,G]`, and any preset name.
pub fn bench_source(spec: &str) -> Result<String, BenchError> {
    let (name, params) = match spec.split_once(':') {
        Some((n, p)) => (n, Some(p)),
        None => (spec, None),
    };
    let positive = |v: u32| {
        if v == 0 {
            Err(BenchError::Params { name: name.into(), msg: "width must be at least 1".into() })
        } else {
            Ok(v)
        }
    };
    let suffix = |prefix: &str| name.strip_prefix(prefix).filter(|s| !s.is_empty());
    match (name, params) {
        ("adder", Some(p)) => Ok(adder_source(positive(parse_u32(name, p)?)?)),
        ("multiplier", Some(p)) => Ok(multiplier_source(positive(parse_u32(name, p)?)?)),
        ("chain", Some(p)) => {
            let mut it = p.split(',');
            let depth = positive(parse_u32(name, it.next().unwrap_or(""))?)?;
            let gates = it.next().map(|g| parse_u32(name, g)).transpose()?.unwrap_or(3);
            Ok(nested_chain_source(depth, gates))
        }
        (_, None) if suffix("adder").is_some() => {
            Ok(adder_source(positive(parse_u32(name, suffix("adder").unwrap())?)?))
        }
        (_, None) if suffix("multiplier").is_some() => {
            Ok(multiplier_source(positive(parse_u32(name, suffix("multiplier").unwrap())?)?))
        }
        (_, None) => preset(name).map(|p| synthetic_source(&p)).ok_or_else(|| BenchError::Unknown(spec.into())),
        _ => Err(BenchError::Unknown(spec.into())),
    }
}

pub fn bench(spec: &str) -> Result<Program, BenchError> {
    bench_source(spec).map(parsed)
}

/// The small regression suite used for policy comparisons.
pub const SMALL_SUITE: [&str; 5] = ["adder4", "multiplier3", "jasmine-s", "elsa-s", "belle-s"];

/// Medium synthetics for the fault-tolerant comparison.
pub const MEDIUM_SUITE: [&str; 3] = ["jasmine", "elsa", "belle"];
