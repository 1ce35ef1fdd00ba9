use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::IrError;

/// Gate kinds understood by the compiler: the Clifford+T target set plus the
/// classical reversible Toffoli and the routing SWAP.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    X,
    H,
    T,
    Tdg,
    Cnot,
    Toffoli,
    Swap,
}

impl GateKind {
    pub const ALL: [GateKind; 7] = [
        GateKind::X,
        GateKind::H,
        GateKind::T,
        GateKind::Tdg,
        GateKind::Cnot,
        GateKind::Toffoli,
        GateKind::Swap,
    ];

    pub fn arity(self) -> usize {
        match self {
            GateKind::X | GateKind::H | GateKind::T | GateKind::Tdg => 1,
            GateKind::Cnot | GateKind::Swap => 2,
            GateKind::Toffoli => 3,
        }
    }

    /// Gates that permute computational basis states without phases.
    pub fn is_classical(self) -> bool {
        matches!(self, GateKind::X | GateKind::Cnot | GateKind::Toffoli | GateKind::Swap)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::X => "X",
            GateKind::H => "H",
            GateKind::T => "T",
            GateKind::Tdg => "Tdg",
            GateKind::Cnot => "CNOT",
            GateKind::Toffoli => "Toffoli",
            GateKind::Swap => "SWAP",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn inverse(self) -> GateKind {
        match self {
            GateKind::T => GateKind::Tdg,
            GateKind::Tdg => GateKind::T,
            k => k,
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "X" => GateKind::X,
            "H" => GateKind::H,
            "T" => GateKind::T,
            "Tdg" => GateKind::Tdg,
            "CNOT" => GateKind::Cnot,
            "Toffoli" => GateKind::Toffoli,
            "SWAP" => GateKind::Swap,
            _ => return Err(()),
        })
    }
}

/// A gate applied to an ordered list of operands. For `CNOT` and `Toffoli`
/// the last operand is the target.
///
/// The operand type is generic so the same gate algebra serves source-level
/// [`QubitRef`](super::QubitRef)s, allocated qubit ids and physical cells.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GateOp<Q> {
    pub kind: GateKind,
    pub operands: Vec<Q>,
}

impl<Q: PartialEq + fmt::Debug> GateOp<Q> {
    pub fn new(kind: GateKind, operands: Vec<Q>) -> Result<Self, IrError> {
        if operands.len() != kind.arity() {
            return Err(IrError::GateArity {
                gate: kind.name().to_string(),
                expected: kind.arity(),
                found: operands.len(),
            });
        }
        for (i, a) in operands.iter().enumerate() {
            if operands[i + 1..].contains(a) {
                return Err(IrError::DuplicateOperand {
                    gate: kind.name().to_string(),
                    operand: format!("{a:?}"),
                });
            }
        }
        Ok(GateOp { kind, operands })
    }
}

impl<Q> GateOp<Q> {
    pub fn target(&self) -> &Q {
        self.operands.last().expect("gates have at least one operand")
    }

    pub fn map<R>(&self, f: impl FnMut(&Q) -> R) -> GateOp<R> {
        GateOp { kind: self.kind, operands: self.operands.iter().map(f).collect() }
    }
}

/// The adjoint of a gate. Every gate in the set is self-inverse except the
/// `T`/`Tdg` pair.
pub fn gate_inverse<Q: Clone>(g: &GateOp<Q>) -> GateOp<Q> {
    GateOp { kind: g.kind.inverse(), operands: g.operands.clone() }
}

/// Number of gates a Toffoli expands into on targets without a native
/// three-qubit gate.
pub const TOFFOLI_DECOMPOSED_LEN: usize = 15;

/// Standard 15-gate Clifford+T realization of `Toffoli(a, b, c)` with target `c`:
/// 2 H, 7 T/Tdg and 6 CNOT, touching only the three operands.
///
/// Returns `None` if `g` is not a Toffoli.
pub fn decompose_toffoli<Q: Clone>(g: &GateOp<Q>) -> Option<Vec<GateOp<Q>>> {
    if g.kind != GateKind::Toffoli {
        return None;
    }
    let (a, b, c) = (&g.operands[0], &g.operands[1], &g.operands[2]);
    let one = |kind, q: &Q| GateOp { kind, operands: vec![q.clone()] };
    let cx = |ctl: &Q, tgt: &Q| GateOp { kind: GateKind::Cnot, operands: vec![ctl.clone(), tgt.clone()] };
    Some(vec![
        one(GateKind::H, c),
        cx(b, c),
        one(GateKind::Tdg, c),
        cx(a, c),
        one(GateKind::T, c),
        cx(b, c),
        one(GateKind::Tdg, c),
        cx(a, c),
        one(GateKind::T, b),
        one(GateKind::T, c),
        one(GateKind::H, c),
        cx(a, b),
        one(GateKind::T, a),
        one(GateKind::Tdg, b),
        cx(a, b),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(kind: GateKind, ops: &[u32]) -> GateOp<u32> {
        GateOp::new(kind, ops.to_vec()).unwrap()
    }

    #[test]
    fn self_inverse_gates() {
        assert_eq!(gate_inverse(&g(GateKind::Cnot, &[0, 1])), g(GateKind::Cnot, &[0, 1]));
        assert_eq!(gate_inverse(&g(GateKind::Toffoli, &[0, 1, 2])), g(GateKind::Toffoli, &[0, 1, 2]));
        assert_eq!(gate_inverse(&g(GateKind::X, &[4])), g(GateKind::X, &[4]));
    }

    #[test]
    fn t_and_tdg_are_adjoint() {
        assert_eq!(gate_inverse(&g(GateKind::T, &[0])), g(GateKind::Tdg, &[0]));
        assert_eq!(gate_inverse(&g(GateKind::Tdg, &[0])), g(GateKind::T, &[0]));
    }

    #[test]
    fn arity_and_distinctness_enforced() {
        assert!(GateOp::new(GateKind::Cnot, vec![1u32]).is_err());
        assert!(GateOp::new(GateKind::Toffoli, vec![1u32, 2, 1]).is_err());
        assert!(GateOp::new(GateKind::X, vec![1u32, 2]).is_err());
    }

    #[test]
    fn toffoli_decomposition_gate_counts() {
        let seq = decompose_toffoli(&g(GateKind::Toffoli, &[0, 1, 2])).unwrap();
        assert_eq!(seq.len(), TOFFOLI_DECOMPOSED_LEN);
        let count = |k: &[GateKind]| seq.iter().filter(|x| k.contains(&x.kind)).count();
        assert_eq!(count(&[GateKind::H]), 2);
        assert_eq!(count(&[GateKind::T, GateKind::Tdg]), 7);
        assert_eq!(count(&[GateKind::Cnot]), 6);
        assert!(seq.iter().flat_map(|x| x.operands.iter()).all(|q| [0, 1, 2].contains(q)));
        assert!(decompose_toffoli(&g(GateKind::Cnot, &[0, 1])).is_none());
    }

    #[test]
    fn gate_names_round_trip() {
        for k in GateKind::ALL {
            assert_eq!(k.name().parse::<GateKind>(), Ok(k));
        }
    }
}
