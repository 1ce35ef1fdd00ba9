//! Lexer, parser and validator for the `.sqir` module language.

use std::collections::HashMap;

use super::{
    derive_uncompute, BlockKind, CallGraph, CallSite, CodeBlock, FuncId, FunctionDef, GateKind, GateOp,
    IrError, Item, Program, QubitRef, RegRole, Register, UncomputeMode, ENTRY_NAME,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    Punct(char),
    Eof,
}

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, IrError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            chars.next();
            col += 1;
        } else if c == '/' {
            chars.next();
            if chars.peek() != Some(&'/') {
                return Err(IrError::Syntax { line, col, msg: "unexpected '/'".into() });
            }
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if !(c.is_ascii_alphanumeric() || c == '_') {
                    break;
                }
                s.push(c);
                chars.next();
                col += 1;
            }
            out.push((Tok::Ident(s), pos));
        } else if c.is_ascii_digit() {
            let mut v: u64 = 0;
            while let Some(&c) = chars.peek() {
                let Some(d) = c.to_digit(10) else { break };
                v = v
                    .checked_mul(10)
                    .and_then(|v| v.checked_add(d as u64))
                    .ok_or_else(|| IrError::Syntax { line: pos.line, col: pos.col, msg: "integer too large".into() })?;
                chars.next();
                col += 1;
            }
            out.push((Tok::Int(v), pos));
        } else if "(){}[],;:".contains(c) {
            chars.next();
            col += 1;
            out.push((Tok::Punct(c), pos));
        } else {
            return Err(IrError::Syntax { line, col, msg: format!("unexpected character {c:?}") });
        }
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

#[derive(Debug)]
struct RawRef {
    name: String,
    index: Option<u32>,
    pos: Pos,
}

#[derive(Debug)]
enum RawArg {
    Whole(String, Pos),
    Index(String, u32, Pos),
    Slice(String, u32, u32, Pos),
    List(Vec<RawRef>),
}

#[derive(Debug)]
enum RawItem {
    Gate { kind: GateKind, ops: Vec<RawRef>, pos: Pos },
    Call { name: String, inverse: bool, args: Vec<RawArg>, pos: Pos },
}

#[derive(Debug)]
enum RawStmt {
    Decl { name: String, width: u32, pos: Pos },
    Allocate { name: String, n: u64, pos: Pos },
    Free { name: String, n: u64, pos: Pos },
    Block { kind: BlockKind, auto: bool, items: Vec<RawItem>, pos: Pos },
    Item(RawItem),
}

#[derive(Debug)]
struct RawModule {
    name: String,
    pos: Pos,
    params: Vec<(String, u32, Pos)>,
    stmts: Vec<RawStmt>,
}

const KEYWORDS: &[&str] =
    &["module", "qbit", "Allocate", "Free", "Compute", "Store", "Uncompute", "auto", "inverse"];

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, IrError> {
        let p = self.pos();
        Err(IrError::Syntax { line: p.line, col: p.col, msg: msg.into() })
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Int(v) => format!("'{v}'"),
            Tok::Punct(c) => format!("'{c}'"),
            Tok::Eof => "end of input".to_string(),
        }
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if t != Tok::Eof {
            self.at += 1;
        }
        t
    }

    fn is_punct(&self, c: char) -> bool {
        *self.peek() == Tok::Punct(c)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    fn expect_punct(&mut self, c: char) -> Result<(), IrError> {
        if self.is_punct(c) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected '{c}', found {}", self.describe()))
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<(), IrError> {
        if self.is_word(w) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected '{w}', found {}", self.describe()))
        }
    }

    fn ident(&mut self) -> Result<String, IrError> {
        match self.peek() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) && s.parse::<GateKind>().is_err() => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => self.err(format!("expected identifier, found {}", self.describe())),
        }
    }

    fn int(&mut self) -> Result<u64, IrError> {
        match *self.peek() {
            Tok::Int(v) => {
                self.bump();
                Ok(v)
            }
            _ => self.err(format!("expected integer, found {}", self.describe())),
        }
    }

    fn small_int(&mut self) -> Result<u32, IrError> {
        let pos = self.pos();
        let v = self.int()?;
        u32::try_from(v).map_err(|_| IrError::Syntax { line: pos.line, col: pos.col, msg: "integer too large".into() })
    }

    fn program(&mut self) -> Result<Vec<RawModule>, IrError> {
        let mut mods = Vec::new();
        while *self.peek() != Tok::Eof {
            mods.push(self.module()?);
        }
        Ok(mods)
    }

    fn module(&mut self) -> Result<RawModule, IrError> {
        self.expect_word("module")?;
        let pos = self.pos();
        let name = self.ident()?;
        self.expect_punct('(')?;
        let mut params = Vec::new();
        if !self.is_punct(')') {
            loop {
                self.expect_word("qbit")?;
                let p = self.pos();
                let n = self.ident()?;
                self.expect_punct('[')?;
                let w = self.small_int()?;
                self.expect_punct(']')?;
                params.push((n, w, p));
                if !self.is_punct(',') {
                    break;
                }
                self.bump();
            }
        }
        self.expect_punct(')')?;
        self.expect_punct('{')?;
        let mut stmts = Vec::new();
        while !self.is_punct('}') {
            stmts.push(self.stmt()?);
        }
        self.bump();
        Ok(RawModule { name, pos, params, stmts })
    }

    fn stmt(&mut self) -> Result<RawStmt, IrError> {
        let pos = self.pos();
        let Tok::Ident(word) = self.peek().clone() else {
            return self.err(format!("expected statement, found {}", self.describe()));
        };
        match word.as_str() {
            "qbit" => {
                self.bump();
                let name = self.ident()?;
                self.expect_punct('[')?;
                let width = self.small_int()?;
                self.expect_punct(']')?;
                self.expect_punct(';')?;
                Ok(RawStmt::Decl { name, width, pos })
            }
            "Allocate" | "Free" => {
                self.bump();
                self.expect_punct('(')?;
                let name = self.ident()?;
                self.expect_punct(',')?;
                let n = self.int()?;
                self.expect_punct(')')?;
                self.expect_punct(';')?;
                Ok(if word == "Allocate" {
                    RawStmt::Allocate { name, n, pos }
                } else {
                    RawStmt::Free { name, n, pos }
                })
            }
            "Compute" | "Store" | "Uncompute" => {
                self.bump();
                let kind = match word.as_str() {
                    "Compute" => BlockKind::Compute,
                    "Store" => BlockKind::Store,
                    _ => BlockKind::Uncompute,
                };
                self.expect_punct('{')?;
                let mut auto = false;
                let mut items = Vec::new();
                if kind == BlockKind::Uncompute && self.is_word("auto") {
                    self.bump();
                    auto = true;
                } else {
                    while !self.is_punct('}') {
                        if self.is_word("Allocate") || self.is_word("Free") {
                            return self.err(format!("{word} not allowed inside a {kind} block"));
                        }
                        items.push(self.item()?);
                    }
                }
                self.expect_punct('}')?;
                Ok(RawStmt::Block { kind, auto, items, pos })
            }
            _ => Ok(RawStmt::Item(self.item()?)),
        }
    }

    fn item(&mut self) -> Result<RawItem, IrError> {
        let pos = self.pos();
        let Tok::Ident(word) = self.peek().clone() else {
            return self.err(format!("expected gate or call, found {}", self.describe()));
        };
        if let Ok(kind) = word.parse::<GateKind>() {
            self.bump();
            self.expect_punct('(')?;
            let mut ops = vec![self.qref()?];
            while self.is_punct(',') {
                self.bump();
                ops.push(self.qref()?);
            }
            self.expect_punct(')')?;
            self.expect_punct(';')?;
            return Ok(RawItem::Gate { kind, ops, pos });
        }
        let inverse = self.is_word("inverse");
        if inverse {
            self.bump();
        }
        let name = self.ident()?;
        self.expect_punct('(')?;
        let mut args = Vec::new();
        if !self.is_punct(')') {
            args.push(self.arg()?);
            while self.is_punct(',') {
                self.bump();
                args.push(self.arg()?);
            }
        }
        self.expect_punct(')')?;
        self.expect_punct(';')?;
        Ok(RawItem::Call { name, inverse, args, pos })
    }

    fn qref(&mut self) -> Result<RawRef, IrError> {
        let pos = self.pos();
        let name = self.ident()?;
        let index = if self.is_punct('[') {
            self.bump();
            let i = self.small_int()?;
            self.expect_punct(']')?;
            Some(i)
        } else {
            None
        };
        Ok(RawRef { name, index, pos })
    }

    fn arg(&mut self) -> Result<RawArg, IrError> {
        if self.is_punct('{') {
            self.bump();
            let mut refs = vec![self.qref()?];
            while self.is_punct(',') {
                self.bump();
                refs.push(self.qref()?);
            }
            self.expect_punct('}')?;
            return Ok(RawArg::List(refs));
        }
        let pos = self.pos();
        let name = self.ident()?;
        if !self.is_punct('[') {
            return Ok(RawArg::Whole(name, pos));
        }
        self.bump();
        let i = self.small_int()?;
        let arg = if self.is_punct(':') {
            self.bump();
            let j = self.small_int()?;
            RawArg::Slice(name, i, j, pos)
        } else {
            RawArg::Index(name, i, pos)
        };
        self.expect_punct(']')?;
        Ok(arg)
    }
}

/// Parses and validates DSL source into a [`Program`].
///
/// Validation covers register and marker bookkeeping, gate arity, call
/// arity and widths, aliasing between call arguments, block contents, and
/// recursion. `Uncompute { auto }` (or a missing Uncompute block) is filled
/// in with [`derive_uncompute`].
pub fn parse_program(src: &str) -> Result<Program, IrError> {
    let toks = lex(src)?;
    let mut parser = Parser { toks, at: 0 };
    let raw = parser.program()?;

    let mut names: HashMap<&str, FuncId> = HashMap::new();
    for (i, m) in raw.iter().enumerate() {
        if names.insert(m.name.as_str(), i).is_some() {
            return Err(sem(m.pos, &m.name, "duplicate module name"));
        }
    }
    let entry = *names.get(ENTRY_NAME).ok_or_else(|| IrError::Semantic {
        line: 1,
        col: 1,
        func: ENTRY_NAME.to_string(),
        msg: "missing entry module main".to_string(),
    })?;

    let mut functions: Vec<FunctionDef> = raw
        .iter()
        .enumerate()
        .map(|(i, m)| resolve_registers(m, i == entry))
        .collect::<Result<_, _>>()?;

    for (i, m) in raw.iter().enumerate() {
        let (compute, store, uncompute, mode) = resolve_blocks(m, i, &functions, &names, entry)?;
        let f = &mut functions[i];
        f.compute = compute;
        f.store = store;
        f.uncompute = uncompute;
        f.uncompute_mode = mode;
    }

    let callgraph = CallGraph::build(&functions, entry)?;
    Ok(Program::assemble(functions, entry, callgraph))
}

fn sem(pos: Pos, func: &str, msg: impl Into<String>) -> IrError {
    IrError::Semantic { line: pos.line, col: pos.col, func: func.to_string(), msg: msg.into() }
}

fn resolve_registers(m: &RawModule, is_entry: bool) -> Result<FunctionDef, IrError> {
    let mut registers: Vec<Register> = Vec::new();
    let mut push = |name: &str, width: u32, role: RegRole, pos: Pos| -> Result<(), IrError> {
        if registers.iter().any(|r| r.name == name) {
            return Err(sem(pos, &m.name, format!("duplicate register {name}")));
        }
        if width == 0 {
            return Err(sem(pos, &m.name, format!("register {name} has zero width")));
        }
        registers.push(Register { name: name.to_string(), width, role });
        Ok(())
    };
    for (n, w, p) in &m.params {
        push(n, *w, RegRole::Param, *p)?;
    }
    let n_params = m.params.len();
    for s in &m.stmts {
        if let RawStmt::Decl { name, width, pos } = s {
            push(name, *width, RegRole::Ancilla, *pos)?;
        }
    }

    let find = |registers: &[Register], name: &str| registers.iter().position(|r| r.name == name).map(|i| i as u32);
    let mut allocs: Vec<u32> = Vec::new();
    let mut frees: Vec<u32> = Vec::new();
    for s in &m.stmts {
        match s {
            RawStmt::Allocate { name, n, pos } => {
                let r = find(&registers, name).ok_or_else(|| sem(*pos, &m.name, format!("Allocate of undeclared register {name}")))?;
                if (r as usize) < n_params {
                    return Err(sem(*pos, &m.name, format!("cannot Allocate parameter {name}")));
                }
                if allocs.contains(&r) {
                    return Err(sem(*pos, &m.name, format!("register {name} allocated twice")));
                }
                if *n != registers[r as usize].width as u64 {
                    return Err(sem(*pos, &m.name, format!("Allocate({name}, {n}) does not match width {}", registers[r as usize].width)));
                }
                allocs.push(r);
            }
            RawStmt::Free { name, n, pos } => {
                let r = find(&registers, name).filter(|r| allocs.contains(r));
                let Some(r) = r else {
                    return Err(sem(*pos, &m.name, format!("unmatched Free of {name}")));
                };
                if frees.contains(&r) {
                    return Err(sem(*pos, &m.name, format!("register {name} freed twice")));
                }
                if *n != registers[r as usize].width as u64 {
                    return Err(sem(*pos, &m.name, format!("Free({name}, {n}) does not match width {}", registers[r as usize].width)));
                }
                frees.push(r);
            }
            _ => {}
        }
    }
    for s in &m.stmts {
        if let RawStmt::Decl { name, pos, .. } = s {
            let r = find(&registers, name).unwrap();
            if !allocs.contains(&r) {
                return Err(sem(*pos, &m.name, format!("register {name} is never allocated")));
            }
            if !frees.contains(&r) {
                if is_entry {
                    registers[r as usize].role = RegRole::Data;
                } else {
                    return Err(sem(*pos, &m.name, format!("missing Free for register {name}")));
                }
            }
        }
    }

    Ok(FunctionDef {
        name: m.name.clone(),
        registers,
        n_params,
        allocs,
        frees,
        compute: CodeBlock::new(BlockKind::Compute),
        store: CodeBlock::new(BlockKind::Store),
        uncompute: CodeBlock::new(BlockKind::Uncompute),
        uncompute_mode: UncomputeMode::Auto,
    })
}

type Blocks = (CodeBlock, CodeBlock, CodeBlock, UncomputeMode);

fn resolve_blocks(
    m: &RawModule,
    me: FuncId,
    functions: &[FunctionDef],
    names: &HashMap<&str, FuncId>,
    entry: FuncId,
) -> Result<Blocks, IrError> {
    let f = &functions[me];
    let mut compute: Option<Vec<Item>> = None;
    let mut store: Option<Vec<Item>> = None;
    let mut uncompute: Option<(bool, Vec<Item>, Pos)> = None;
    let mut bare: Vec<Item> = Vec::new();
    let mut bare_pos: Option<Pos> = None;
    let mut last_block = 0u8;

    for s in &m.stmts {
        match s {
            RawStmt::Block { kind, auto, items, pos } => {
                let rank = match kind {
                    BlockKind::Compute => 1,
                    BlockKind::Store => 2,
                    BlockKind::Uncompute => 3,
                };
                if rank <= last_block {
                    return Err(sem(*pos, &m.name, format!("{kind} block repeated or out of order")));
                }
                last_block = rank;
                let items = items
                    .iter()
                    .map(|it| resolve_item(it, *kind, m, f, functions, names, entry))
                    .collect::<Result<Vec<_>, _>>()?;
                match kind {
                    BlockKind::Compute => compute = Some(items),
                    BlockKind::Store => store = Some(items),
                    BlockKind::Uncompute => uncompute = Some((*auto, items, *pos)),
                }
            }
            RawStmt::Item(it) => {
                bare_pos.get_or_insert(item_pos(it));
                bare.push(resolve_item(it, BlockKind::Compute, m, f, functions, names, entry)?);
            }
            _ => {}
        }
    }
    if let Some(p) = bare_pos {
        if last_block != 0 {
            return Err(sem(p, &m.name, "statements outside blocks are only allowed in modules without blocks"));
        }
        compute = Some(bare);
    }

    let compute = CodeBlock { kind: BlockKind::Compute, items: compute.unwrap_or_default() };
    let store = CodeBlock { kind: BlockKind::Store, items: store.unwrap_or_default() };
    let derived = derive_uncompute(&compute)?;
    let (uncompute, mode) = match uncompute {
        None | Some((true, _, _)) => (derived, UncomputeMode::Auto),
        Some((false, items, pos)) => {
            // Inverse calls replay the matching forward calls, so they must
            // mirror the compute block's call sequence exactly.
            let want: Vec<&CallSite> = derived.calls().collect();
            let got: Vec<&CallSite> = items
                .iter()
                .filter_map(|it| if let Item::Call(c) = it { Some(c) } else { None })
                .collect();
            if want != got {
                return Err(sem(pos, &m.name, "Uncompute calls must be inverse calls mirroring the Compute calls in reverse order"));
            }
            (CodeBlock { kind: BlockKind::Uncompute, items }, UncomputeMode::Explicit)
        }
    };
    Ok((compute, store, uncompute, mode))
}

fn item_pos(it: &RawItem) -> Pos {
    match it {
        RawItem::Gate { pos, .. } | RawItem::Call { pos, .. } => *pos,
    }
}

fn resolve_ref(r: &RawRef, m: &RawModule, f: &FunctionDef) -> Result<QubitRef, IrError> {
    let reg = f.reg_index(&r.name).ok_or_else(|| sem(r.pos, &m.name, format!("unknown register {}", r.name)))?;
    let width = f.registers[reg as usize].width;
    let index = match r.index {
        Some(i) => i,
        None if width == 1 => 0,
        None => return Err(sem(r.pos, &m.name, format!("register {} has width {width}; an index is required", r.name))),
    };
    if index >= width {
        return Err(sem(r.pos, &m.name, format!("index {index} out of range for {}[{width}]", r.name)));
    }
    Ok(QubitRef::new(reg, index))
}

fn resolve_item(
    it: &RawItem,
    block: BlockKind,
    m: &RawModule,
    f: &FunctionDef,
    functions: &[FunctionDef],
    names: &HashMap<&str, FuncId>,
    entry: FuncId,
) -> Result<Item, IrError> {
    match it {
        RawItem::Gate { kind, ops, pos } => {
            let ops = ops.iter().map(|r| resolve_ref(r, m, f)).collect::<Result<Vec<_>, _>>()?;
            let g = GateOp::new(*kind, ops).map_err(|e| match e {
                IrError::DuplicateOperand { gate, .. } => sem(*pos, &m.name, format!("duplicate operand in {gate}")),
                other => sem(*pos, &m.name, other.to_string()),
            })?;
            Ok(Item::Gate(g))
        }
        RawItem::Call { name, inverse, args, pos } => {
            match block {
                BlockKind::Store => return Err(sem(*pos, &m.name, "calls are not allowed in a Store block")),
                BlockKind::Compute if *inverse => {
                    return Err(sem(*pos, &m.name, "inverse calls are only allowed in an Uncompute block"))
                }
                BlockKind::Uncompute if !*inverse => {
                    return Err(sem(*pos, &m.name, "calls in an Uncompute block must be inverse calls"))
                }
                _ => {}
            }
            let callee = *names
                .get(name.as_str())
                .ok_or_else(|| sem(*pos, &m.name, format!("call to unknown module {name}")))?;
            if callee == entry {
                return Err(sem(*pos, &m.name, "the entry module cannot be called"));
            }
            let target = &functions[callee];
            if args.len() != target.n_params {
                return Err(sem(
                    *pos,
                    &m.name,
                    format!("arity mismatch: {name} takes {} arguments, found {}", target.n_params, args.len()),
                ));
            }
            let mut resolved = Vec::with_capacity(args.len());
            for (k, a) in args.iter().enumerate() {
                let qs = resolve_arg(a, m, f)?;
                let want = target.registers[k].width as usize;
                if qs.len() != want {
                    return Err(sem(
                        *pos,
                        &m.name,
                        format!("width mismatch: argument {} of {name} needs {want} qubits, found {}", k + 1, qs.len()),
                    ));
                }
                resolved.push(qs);
            }
            let mut all: Vec<QubitRef> = resolved.iter().flatten().copied().collect();
            all.sort();
            if all.windows(2).any(|w| w[0] == w[1]) {
                return Err(sem(*pos, &m.name, format!("duplicate qubit in call to {name}")));
            }
            Ok(Item::Call(CallSite { callee, args: resolved, inverse: *inverse }))
        }
    }
}

fn resolve_arg(a: &RawArg, m: &RawModule, f: &FunctionDef) -> Result<Vec<QubitRef>, IrError> {
    let reg_of = |name: &str, pos: Pos| {
        f.reg_index(name).ok_or_else(|| sem(pos, &m.name, format!("unknown register {name}")))
    };
    match a {
        RawArg::Whole(name, pos) => {
            let r = reg_of(name, *pos)?;
            Ok((0..f.registers[r as usize].width).map(|i| QubitRef::new(r, i)).collect())
        }
        RawArg::Index(name, i, pos) => {
            Ok(vec![resolve_ref(&RawRef { name: name.clone(), index: Some(*i), pos: *pos }, m, f)?])
        }
        RawArg::Slice(name, i, j, pos) => {
            let r = reg_of(name, *pos)?;
            let width = f.registers[r as usize].width;
            if i >= j || *j > width {
                return Err(sem(*pos, &m.name, format!("bad slice {name}[{i}:{j}] of width {width}")));
            }
            Ok((*i..*j).map(|k| QubitRef::new(r, k)).collect())
        }
        RawArg::List(refs) => refs.iter().map(|r| resolve_ref(r, m, f)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG: &str = r#"
// one ancilla, explicit uncompute
module fun1(qbit in[3], qbit out[1]) {
    qbit anc[1];
    Allocate(anc, 1);
    Compute {
        Toffoli(in[0], in[1], in[2]);
        CNOT(in[2], anc[0]);
        Toffoli(in[1], in[0], anc[0]);
    }
    Store {
        CNOT(anc[0], out[0]);
    }
    Uncompute {
        Toffoli(in[1], in[0], anc[0]);
        CNOT(in[2], anc[0]);
        Toffoli(in[0], in[1], in[2]);
    }
    Free(anc, 1);
}

module main() {
    qbit new[4];
    Allocate(new, 4);
    fun1(new[0:3], new[3]);
}
"#;

    fn err_msg(src: &str) -> String {
        parse_program(src).unwrap_err().to_string()
    }

    #[test]
    fn parses_two_module_example() {
        let p = parse_program(FIG).unwrap();
        assert_eq!(p.functions.len(), 2);
        let f = &p.functions[p.lookup("fun1").unwrap()];
        assert_eq!(f.ancilla_count(), 1);
        assert_eq!(f.uncompute_mode, UncomputeMode::Explicit);
        let names: Vec<String> = f
            .compute
            .gates()
            .map(|g| format!("{}({})", g.kind, g.operands.iter().map(|q| f.qubit_name(*q)).collect::<Vec<_>>().join(",")))
            .collect();
        assert_eq!(names, ["Toffoli(in[0],in[1],in[2])", "CNOT(in[2],anc[0])", "Toffoli(in[1],in[0],anc[0])"]);
        assert_eq!(derive_uncompute(&f.compute).unwrap(), f.uncompute);
        let main = p.entry_fn();
        assert_eq!(main.registers[0].role, RegRole::Data);
        assert_eq!(main.compute.calls().count(), 1);
    }

    #[test]
    fn empty_main() {
        let p = parse_program("module main() { }").unwrap();
        assert_eq!(p.functions.len(), 1);
        assert_eq!(p.static_gate_count(), 0);
    }

    #[test]
    fn unmatched_free() {
        let src = "module f(qbit a[1]) { qbit anc[1]; Free(anc, 1); } module main() {}";
        assert!(err_msg(src).contains("unmatched Free"));
    }

    #[test]
    fn syntax_error_has_position() {
        let e = parse_program("module main() {\n  X(q[0]) \n}").unwrap_err();
        match e {
            IrError::Syntax { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn recursion_rejected() {
        let src = "module f(qbit a[1]) { g(a); } module g(qbit a[1]) { f(a); } module main(qbit x[1]) { f(x); }";
        assert!(matches!(parse_program(src), Err(IrError::Recursion(_))));
    }

    #[test]
    fn arity_and_width_checked() {
        let base = "module f(qbit a[2]) { X(a[0]); }\n";
        assert!(err_msg(&format!("{base}module main(qbit x[2]) {{ f(x, x); }}")).contains("arity mismatch"));
        assert!(err_msg(&format!("{base}module main(qbit x[3]) {{ f(x); }}")).contains("width mismatch"));
        assert!(err_msg(&format!("{base}module main(qbit x[2]) {{ f({{x[0], x[0]}}); }}")).contains("duplicate qubit"));
    }

    #[test]
    fn block_rules() {
        let store_call = "module f(qbit a[1]) { X(a); } module main(qbit x[1]) { qbit t[1]; Allocate(t, 1); Store { f(x); } Free(t, 1); }";
        assert!(err_msg(store_call).contains("Store"));
        let missing_free = "module f(qbit a[1]) { qbit t[1]; Allocate(t, 1); CNOT(a, t); } module main() {}";
        assert!(err_msg(missing_free).contains("missing Free"));
        let alloc_in_un = "module main(qbit x[1]) { Uncompute { Allocate(x, 1); } }";
        assert!(err_msg(alloc_in_un).contains("not allowed"));
        let wrong_uncompute = "module f(qbit a[1]) { X(a); } module g(qbit a[1]) { Compute { f(a); } Uncompute { } } module main() {}";
        assert!(err_msg(wrong_uncompute).contains("mirroring"));
    }

    #[test]
    fn levels_follow_longest_path() {
        let src = "module h(qbit a[1]) { X(a); }
                   module g(qbit a[1]) { h(a); }
                   module f(qbit a[1]) { g(a); h(a); }
                   module main(qbit x[1]) { f(x); h(x); }";
        let p = parse_program(src).unwrap();
        assert_eq!(p.function_level("main").unwrap(), 0);
        assert_eq!(p.function_level("f").unwrap(), 1);
        assert_eq!(p.function_level("g").unwrap(), 2);
        assert_eq!(p.function_level("h").unwrap(), 3);
        assert!(p.function_level("nope").is_err());
    }
}
