use std::fmt::Write;

use super::{CallSite, CodeBlock, FunctionDef, Item, Program, QubitRef, UncomputeMode};

/// Canonical source form. Parsing the output yields a structurally
/// identical [`Program`].
pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for (i, f) in p.functions.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_function(p, f, &mut out);
    }
    out
}

fn print_function(p: &Program, f: &FunctionDef, out: &mut String) {
    let params: Vec<String> = f.params().iter().map(|r| format!("qbit {}[{}]", r.name, r.width)).collect();
    let _ = writeln!(out, "module {}({}) {{", f.name, params.join(", "));
    for r in &f.registers[f.n_params..] {
        let _ = writeln!(out, "    qbit {}[{}];", r.name, r.width);
    }
    for &r in &f.allocs {
        let reg = &f.registers[r as usize];
        let _ = writeln!(out, "    Allocate({}, {});", reg.name, reg.width);
    }
    print_block(p, f, "Compute", &f.compute, out);
    if !f.store.items.is_empty() {
        print_block(p, f, "Store", &f.store, out);
    }
    match f.uncompute_mode {
        UncomputeMode::Auto => out.push_str("    Uncompute { auto }\n"),
        UncomputeMode::Explicit => print_block(p, f, "Uncompute", &f.uncompute, out),
    }
    for &r in &f.frees {
        let reg = &f.registers[r as usize];
        let _ = writeln!(out, "    Free({}, {});", reg.name, reg.width);
    }
    out.push_str("}\n");
}

fn print_block(p: &Program, f: &FunctionDef, label: &str, block: &CodeBlock, out: &mut String) {
    if block.items.is_empty() {
        let _ = writeln!(out, "    {label} {{ }}");
        return;
    }
    let _ = writeln!(out, "    {label} {{");
    for it in &block.items {
        out.push_str("        ");
        match it {
            Item::Gate(g) => {
                let ops: Vec<String> = g.operands.iter().map(|q| f.qubit_name(*q)).collect();
                let _ = write!(out, "{}({});", g.kind, ops.join(", "));
            }
            Item::Call(c) => print_call(p, f, c, out),
        }
        out.push('\n');
    }
    out.push_str("    }\n");
}

fn print_call(p: &Program, f: &FunctionDef, c: &CallSite, out: &mut String) {
    if c.inverse {
        out.push_str("inverse ");
    }
    let args: Vec<String> = c.args.iter().map(|a| format_arg(f, a)).collect();
    let _ = write!(out, "{}({});", p.functions[c.callee].name, args.join(", "));
}

/// Shortest spelling of an argument: whole register, slice, single bit, or
/// an explicit list.
fn format_arg(f: &FunctionDef, qs: &[QubitRef]) -> String {
    let reg = qs[0].reg;
    let contiguous = qs.iter().enumerate().all(|(k, q)| q.reg == reg && q.index == qs[0].index + k as u32);
    if contiguous {
        let r = &f.registers[reg as usize];
        let lo = qs[0].index;
        let hi = lo + qs.len() as u32;
        if lo == 0 && hi == r.width {
            return r.name.clone();
        }
        if qs.len() == 1 {
            return format!("{}[{lo}]", r.name);
        }
        return format!("{}[{lo}:{hi}]", r.name);
    }
    let parts: Vec<String> = qs.iter().map(|q| f.qubit_name(*q)).collect();
    format!("{{{}}}", parts.join(", "))
}
