use super::{FuncId, FunctionDef, IrError};

/// Static call structure. Edges come from Compute blocks only: Store blocks
/// hold no calls and Uncompute blocks mirror Compute.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CallGraph {
    /// Distinct callees per function, in first-call order.
    pub edges: Vec<Vec<FuncId>>,
    level: Vec<Option<u32>>,
}

impl CallGraph {
    /// Builds the graph, rejecting recursion, and assigns each function
    /// reachable from `entry` its longest-path distance from the entry.
    pub fn build(functions: &[FunctionDef], entry: FuncId) -> Result<Self, IrError> {
        let edges: Vec<Vec<FuncId>> = functions
            .iter()
            .map(|f| {
                let mut out: Vec<FuncId> = Vec::new();
                for c in f.compute.calls() {
                    if !out.contains(&c.callee) {
                        out.push(c.callee);
                    }
                }
                out
            })
            .collect();

        let order = topo_order(functions, &edges)?;
        let mut level = vec![None; functions.len()];
        level[entry] = Some(0);
        for &f in &order {
            if let Some(l) = level[f] {
                for &c in &edges[f] {
                    level[c] = Some(level[c].map_or(l + 1, |old: u32| old.max(l + 1)));
                }
            }
        }
        Ok(CallGraph { edges, level })
    }

    pub fn level(&self, f: FuncId) -> Option<u32> {
        self.level[f]
    }

    pub fn max_level(&self) -> u32 {
        self.level.iter().flatten().copied().max().unwrap_or(0)
    }
}

/// Callers-before-callees order; fails with the offending cycle on recursion.
fn topo_order(functions: &[FunctionDef], edges: &[Vec<FuncId>]) -> Result<Vec<FuncId>, IrError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    let n = edges.len();
    let mut mark = vec![Mark::New; n];
    let mut post = Vec::with_capacity(n);
    for root in 0..n {
        if mark[root] != Mark::New {
            continue;
        }
        // Iterative DFS; the stack holds (node, next edge index).
        let mut stack = vec![(root, 0usize)];
        mark[root] = Mark::Open;
        while let Some(&mut (f, ref mut next)) = stack.last_mut() {
            if let Some(&c) = edges[f].get(*next) {
                *next += 1;
                match mark[c] {
                    Mark::New => {
                        mark[c] = Mark::Open;
                        stack.push((c, 0));
                    }
                    Mark::Open => {
                        let start = stack.iter().position(|&(g, _)| g == c).unwrap_or(0);
                        let mut names: Vec<&str> =
                            stack[start..].iter().map(|&(g, _)| functions[g].name.as_str()).collect();
                        names.push(&functions[c].name);
                        return Err(IrError::Recursion(names.join(" -> ")));
                    }
                    Mark::Done => {}
                }
            } else {
                mark[f] = Mark::Done;
                post.push(f);
                stack.pop();
            }
        }
    }
    post.reverse();
    Ok(post)
}
