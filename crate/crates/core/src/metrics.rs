//! Active quantum volume, usage traces and the analytical success model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alloc::UsageSegment;

/// Aggregate counts of one simulated run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Clifford+T gates, excluding routing swaps. A native Toffoli counts as
    /// its 15-gate decomposition.
    pub gate_count: u64,
    pub swap_count: u64,
    pub braid_retries: u64,
    /// Peak number of simultaneously live qubits.
    pub qubit_count: u64,
    pub depth_cycles: u64,
    /// Qubit-cycles of live time.
    pub aqv: u64,
    pub success_rate: f64,
    /// Single-qubit gates seen by the noise model.
    #[serde(skip)]
    pub n1: u64,
    /// Two-qubit gates seen by the noise model, three per swap.
    #[serde(skip)]
    pub n2: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub eps_single: f64,
    pub eps_two: f64,
    pub t1_us: f64,
    pub t2_us: f64,
    pub cycle_ns: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel { eps_single: 0.001, eps_two: 0.01, t1_us: 50.0, t2_us: 70.0, cycle_ns: 100.0 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("noise parameter {0} out of range")]
    OutOfRange(&'static str),
}

impl NoiseModel {
    pub fn validated(self) -> Result<Self, NoiseError> {
        if !(0.0..1.0).contains(&self.eps_single) {
            return Err(NoiseError::OutOfRange("eps_single"));
        }
        if !(0.0..1.0).contains(&self.eps_two) {
            return Err(NoiseError::OutOfRange("eps_two"));
        }
        for (v, name) in [(self.t1_us, "t1_us"), (self.t2_us, "t2_us"), (self.cycle_ns, "cycle_ns")] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(NoiseError::OutOfRange(name));
            }
        }
        Ok(self)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("segment of qubit {qubit} is still open")]
pub struct OpenSegment {
    pub qubit: u32,
}

/// Sum of `t_f - t_i` over closed segments. Heap time is never part of a
/// segment, so it is excluded by construction.
pub fn active_quantum_volume(segments: &[UsageSegment]) -> Result<u64, OpenSegment> {
    segments.iter().try_fold(0u64, |acc, s| {
        if s.t_f < s.t_i {
            Err(OpenSegment { qubit: s.qubit })
        } else {
            Ok(acc + (s.t_f - s.t_i))
        }
    })
}

/// Natural log of the success probability, which stays finite for long
/// programs whose probability underflows.
pub fn log_success_rate(n1: u64, n2: u64, aqv: u64, nm: &NoiseModel) -> f64 {
    let live_ns = aqv as f64 * nm.cycle_ns;
    let (t1_ns, t2_ns) = (nm.t1_us * 1e3, nm.t2_us * 1e3);
    n1 as f64 * (-nm.eps_single).ln_1p() + n2 as f64 * (-nm.eps_two).ln_1p() - live_ns / t1_ns - live_ns / t2_ns
}

/// Worst-case success probability: gate fidelities times independent T1 and
/// T2 decay over every qubit's live time.
pub fn success_rate(n1: u64, n2: u64, aqv: u64, nm: &NoiseModel) -> f64 {
    log_success_rate(n1, n2, aqv, nm).exp().clamp(0.0, 1.0)
}

/// Live-qubit count as a step function: each `(cycle, count)` holds until
/// the next point. The last point is `(makespan, 0)` unless the trace is
/// empty.
pub fn emit_usage_trace(segments: &[UsageSegment]) -> Vec<(u64, u64)> {
    let mut deltas: Vec<(u64, i64)> = Vec::with_capacity(segments.len() * 2);
    for s in segments {
        deltas.push((s.t_i, 1));
        deltas.push((s.t_f, -1));
    }
    deltas.sort_unstable();
    let mut out: Vec<(u64, u64)> = Vec::new();
    let mut live: i64 = 0;
    let mut i = 0;
    while i < deltas.len() {
        let t = deltas[i].0;
        while i < deltas.len() && deltas[i].0 == t {
            live += deltas[i].1;
            i += 1;
        }
        if out.last().map(|&(_, c)| c as i64) != Some(live) {
            out.push((t, live as u64));
        }
    }
    out
}

/// Integral of a step trace from [`emit_usage_trace`].
pub fn trace_integral(trace: &[(u64, u64)]) -> u64 {
    trace.windows(2).map(|w| (w[1].0 - w[0].0) * w[0].1).sum()
}

pub fn peak_usage(trace: &[(u64, u64)]) -> u64 {
    trace.iter().map(|&(_, c)| c).max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(qubit: u32, t_i: u64, t_f: u64) -> UsageSegment {
        UsageSegment { qubit, t_i, t_f }
    }

    #[test]
    fn aqv_examples() {
        assert_eq!(active_quantum_volume(&[seg(0, 0, 10)]).unwrap(), 10);
        assert_eq!(active_quantum_volume(&[seg(0, 0, 4), seg(0, 6, 9)]).unwrap(), 7);
        assert_eq!(active_quantum_volume(&[]).unwrap(), 0);
        assert!(active_quantum_volume(&[seg(1, 5, 2)]).is_err());
    }

    #[test]
    fn success_examples() {
        let nm = NoiseModel::default();
        assert_eq!(success_rate(0, 0, 0, &nm), 1.0);
        let tiny = NoiseModel { cycle_ns: 1e-12, ..nm };
        assert!((success_rate(0, 1, 1, &tiny) - 0.99).abs() < 1e-12);
        // One qubit live for 50 us: 500 cycles of 100 ns.
        let p = success_rate(0, 0, 500, &nm);
        assert!((p - (-1.0f64).exp() * (-50.0f64 / 70.0).exp()).abs() < 1e-12);
        assert!((p - 0.1801).abs() < 1e-4);
    }

    #[test]
    fn success_is_monotone() {
        let nm = NoiseModel::default();
        let base = success_rate(10, 10, 100, &nm);
        assert!(success_rate(11, 10, 100, &nm) <= base);
        assert!(success_rate(10, 11, 100, &nm) <= base);
        assert!(success_rate(10, 10, 101, &nm) <= base);
    }

    #[test]
    fn trace_examples() {
        assert_eq!(emit_usage_trace(&[seg(0, 0, 10)]), vec![(0, 1), (10, 0)]);
        let t = emit_usage_trace(&[seg(0, 0, 10), seg(1, 5, 12)]);
        assert_eq!(t, vec![(0, 1), (5, 2), (10, 1), (12, 0)]);
        assert_eq!(peak_usage(&t), 2);
        assert_eq!(trace_integral(&t), 17);
        // Back-to-back segments of one qubit do not produce a dip.
        assert_eq!(emit_usage_trace(&[seg(0, 0, 4), seg(0, 4, 9)]), vec![(0, 1), (9, 0)]);
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseModel::default().validated().is_ok());
        assert!(NoiseModel { eps_two: 1.0, ..Default::default() }.validated().is_err());
        assert!(NoiseModel { t1_us: 0.0, ..Default::default() }.validated().is_err());
    }
}
