//! Modular reversible program representation.
//!
//! A [`Program`] is a set of modules, each framed as Compute / Store /
//! Uncompute blocks around an Allocate/Free pair of ancilla registers.
//! Programs are only built through [`parse_program`], which validates every
//! structural invariant the scheduler relies on.

mod callgraph;
mod gate;
mod parse;
mod print;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use callgraph::CallGraph;
pub use gate::{decompose_toffoli, gate_inverse, GateKind, GateOp, TOFFOLI_DECOMPOSED_LEN};
pub use parse::parse_program;
pub use print::print_program;

pub type FuncId = usize;

pub const ENTRY_NAME: &str = "main";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IrError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: in module {func}: {msg}")]
    Semantic { line: usize, col: usize, func: String, msg: String },
    #[error("{gate} expects {expected} operands, found {found}")]
    GateArity { gate: String, expected: usize, found: usize },
    #[error("duplicate operand {operand} in {gate}")]
    DuplicateOperand { gate: String, operand: String },
    #[error("recursive call cycle: {0}")]
    Recursion(String),
    #[error("unknown function {0}")]
    UnknownFunction(String),
    #[error("function {0} is not reachable from main")]
    Unreachable(String),
    #[error("cannot derive uncompute: {0}")]
    Underivable(String),
    #[error("explicit Uncompute block of {func} differs from the derived one at item {item}")]
    UncomputeMismatch { func: String, item: usize },
}

/// Reference to bit `index` of register `reg` in the enclosing module.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QubitRef {
    pub reg: u32,
    pub index: u32,
}

impl QubitRef {
    pub fn new(reg: u32, index: u32) -> Self {
        QubitRef { reg, index }
    }
}

/// How a register enters a module. Data registers only occur in the entry
/// module: they are allocated but never freed and live for the whole run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegRole {
    Param,
    Ancilla,
    Data,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub width: u32,
    pub role: RegRole,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CallSite {
    pub callee: FuncId,
    /// One qubit list per formal parameter, in parameter order.
    pub args: Vec<Vec<QubitRef>>,
    pub inverse: bool,
}

impl CallSite {
    pub fn qubits(&self) -> impl Iterator<Item = &QubitRef> {
        self.args.iter().flatten()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Item {
    Gate(GateOp<QubitRef>),
    Call(CallSite),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlockKind {
    Compute,
    Store,
    Uncompute,
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockKind::Compute => "Compute",
            BlockKind::Store => "Store",
            BlockKind::Uncompute => "Uncompute",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeBlock {
    pub kind: BlockKind,
    pub items: Vec<Item>,
}

impl CodeBlock {
    pub fn new(kind: BlockKind) -> Self {
        CodeBlock { kind, items: Vec::new() }
    }

    pub fn gates(&self) -> impl DoubleEndedIterator<Item = &GateOp<QubitRef>> {
        self.items.iter().filter_map(|it| match it {
            Item::Gate(g) => Some(g),
            Item::Call(_) => None,
        })
    }

    pub fn calls(&self) -> impl DoubleEndedIterator<Item = &CallSite> {
        self.items.iter().filter_map(|it| match it {
            Item::Call(c) => Some(c),
            Item::Gate(_) => None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UncomputeMode {
    Explicit,
    Auto,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionDef {
    pub name: String,
    /// Parameters first (in signature order), then declared registers.
    pub registers: Vec<Register>,
    pub n_params: usize,
    /// Registers named by Allocate markers, in source order.
    pub allocs: Vec<u32>,
    /// Registers named by Free markers, in source order.
    pub frees: Vec<u32>,
    pub compute: CodeBlock,
    pub store: CodeBlock,
    /// Always populated; derived from `compute` when the mode is `Auto`.
    pub uncompute: CodeBlock,
    pub uncompute_mode: UncomputeMode,
}

impl FunctionDef {
    pub fn params(&self) -> &[Register] {
        &self.registers[..self.n_params]
    }

    /// Total number of parameter bits.
    pub fn param_width(&self) -> usize {
        self.params().iter().map(|r| r.width as usize).sum()
    }

    /// Registers freed at the end of the module, in Free order.
    pub fn ancilla_regs(&self) -> impl Iterator<Item = u32> + '_ {
        self.frees.iter().copied()
    }

    pub fn ancilla_count(&self) -> usize {
        self.frees.iter().map(|&r| self.registers[r as usize].width as usize).sum()
    }

    pub fn data_regs(&self) -> impl Iterator<Item = u32> + '_ {
        self.allocs.iter().copied().filter(|&r| self.registers[r as usize].role == RegRole::Data)
    }

    pub fn reg_index(&self, name: &str) -> Option<u32> {
        self.registers.iter().position(|r| r.name == name).map(|i| i as u32)
    }

    pub fn qubit_name(&self, q: QubitRef) -> String {
        format!("{}[{}]", self.registers[q.reg as usize].name, q.index)
    }

    pub fn block(&self, kind: BlockKind) -> &CodeBlock {
        match kind {
            BlockKind::Compute => &self.compute,
            BlockKind::Store => &self.store,
            BlockKind::Uncompute => &self.uncompute,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub functions: Vec<FunctionDef>,
    pub entry: FuncId,
    index: BTreeMap<String, FuncId>,
    callgraph: CallGraph,
}

impl Program {
    pub(crate) fn assemble(functions: Vec<FunctionDef>, entry: FuncId, callgraph: CallGraph) -> Self {
        let index = functions.iter().enumerate().map(|(i, f)| (f.name.clone(), i)).collect();
        Program { functions, entry, index, callgraph }
    }

    pub fn function(&self, id: FuncId) -> &FunctionDef {
        &self.functions[id]
    }

    pub fn lookup(&self, name: &str) -> Option<FuncId> {
        self.index.get(name).copied()
    }

    pub fn entry_fn(&self) -> &FunctionDef {
        &self.functions[self.entry]
    }

    pub fn callgraph(&self) -> &CallGraph {
        &self.callgraph
    }

    /// Call-graph level of `name`: the longest call path from the entry.
    pub fn function_level(&self, name: &str) -> Result<u32, IrError> {
        let id = self.lookup(name).ok_or_else(|| IrError::UnknownFunction(name.to_string()))?;
        self.callgraph.level(id).ok_or_else(|| IrError::Unreachable(name.to_string()))
    }

    /// Total number of gate items across all blocks of all modules.
    pub fn static_gate_count(&self) -> usize {
        self.functions
            .iter()
            .map(|f| f.compute.gates().count() + f.store.gates().count() + f.uncompute.gates().count())
            .sum()
    }
}

/// Reverses `block`, inverting every gate and toggling the inverse flag of
/// every call-site. Compute and Uncompute blocks map onto each other, so the
/// derivation is an involution. Store blocks are never uncomputed.
pub fn derive_uncompute(block: &CodeBlock) -> Result<CodeBlock, IrError> {
    let kind = match block.kind {
        BlockKind::Compute => BlockKind::Uncompute,
        BlockKind::Uncompute => BlockKind::Compute,
        BlockKind::Store => {
            return Err(IrError::Underivable("Store blocks are not uncomputed".to_string()))
        }
    };
    let items = block
        .items
        .iter()
        .rev()
        .map(|it| match it {
            Item::Gate(g) => Item::Gate(gate_inverse(g)),
            Item::Call(c) => Item::Call(CallSite { inverse: !c.inverse, ..c.clone() }),
        })
        .collect();
    Ok(CodeBlock { kind, items })
}

/// Checks every explicit Uncompute block against the one derived from its
/// Compute block.
pub fn check_uncompute(p: &Program) -> Result<(), IrError> {
    for f in p.functions.iter().filter(|f| f.uncompute_mode == UncomputeMode::Explicit) {
        let derived = derive_uncompute(&f.compute)?;
        let n = derived.items.len().max(f.uncompute.items.len());
        if let Some(item) = (0..n).find(|&i| derived.items.get(i) != f.uncompute.items.get(i)) {
            return Err(IrError::UncomputeMismatch { func: f.name.clone(), item });
        }
    }
    Ok(())
}
