//! Normalized thin flows with resetting: the label and flow derivatives
//! `(ℓ′, x′)` that govern one phase of a dynamic equilibrium.
//!
//! Two solvers are provided. The default one reduces the active subnetwork
//! to a series-parallel decomposition and composes piecewise-linear response
//! functions; when the active subnetwork is not series-parallel it falls back
//! to enumerating per-arc tightness patterns with an exact LP feasibility
//! check at every node of the search tree. Both return the same `ℓ′`, and the
//! flow part is canonicalized to the lexicographically smallest admissible
//! vector in arc order.

mod enumerate;
mod pwl;
mod sp;

pub use pwl::Pwl;

use crate::instance::Instance;
use crate::maxflow::FlowNetwork;
use crate::rat::{to_exact, Rat};
use num_traits::{One, Zero};
use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NtfrError {
    #[error("no s-t path among active arcs")]
    NoPath,
    #[error("arc {0} is queued but not active")]
    QueuedNotActive(String),
    #[error("no thin flow found (pattern search exhausted)")]
    NotFound,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThinArc {
    /// Index of the arc in the instance.
    pub index: usize,
    pub tail: usize,
    pub head: usize,
    pub capacity: Rat,
    pub resetting: bool,
}

/// The active subnetwork of one phase, pruned to arcs on s→t paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThinFlowProblem {
    pub node_names: Vec<String>,
    pub arc_names: Vec<String>,
    pub source: usize,
    pub sink: usize,
    pub inflow: Rat,
    /// Sorted by instance arc index.
    pub arcs: Vec<ThinArc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThinFlow {
    /// `ℓ′_v`, `None` for nodes outside the pruned subnetwork.
    pub labels: Vec<Option<Rat>>,
    /// `x′_e` for every instance arc; zero outside the subnetwork.
    pub flows: Vec<Rat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Auto,
    SeriesParallel,
    Enumerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Order {
    #[default]
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveOptions {
    pub method: Method,
    /// Branching order of the pattern search.
    pub order: Order,
}

impl ThinFlowProblem {
    pub fn new(inst: &Instance, active: &[bool], queued: &[bool]) -> Result<Self, NtfrError> {
        for (i, a) in inst.arcs.iter().enumerate() {
            if queued[i] && !active[i] {
                return Err(NtfrError::QueuedNotActive(a.id.clone()));
            }
        }
        let n = inst.nodes.len();
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut inc: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, a) in inst.arcs.iter().enumerate() {
            if active[i] {
                out[a.tail].push(a.head);
                inc[a.head].push(a.tail);
            }
        }
        let fwd = reach(inst.source, &out);
        if !fwd[inst.sink] {
            return Err(NtfrError::NoPath);
        }
        let bwd = reach(inst.sink, &inc);
        let arcs = inst
            .arcs
            .iter()
            .enumerate()
            .filter(|&(i, a)| active[i] && fwd[a.tail] && bwd[a.head])
            .map(|(i, a)| ThinArc {
                index: i,
                tail: a.tail,
                head: a.head,
                capacity: a.capacity.clone(),
                resetting: queued[i],
            })
            .collect();
        Ok(Self {
            node_names: inst.nodes.clone(),
            arc_names: inst.arcs.iter().map(|a| a.id.clone()).collect(),
            source: inst.source,
            sink: inst.sink,
            inflow: inst.inflow.clone(),
            arcs,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.node_names.len()
    }

    /// Nodes of the pruned subnetwork (the source is always included).
    pub fn members(&self) -> Vec<bool> {
        let mut m = vec![false; self.num_nodes()];
        m[self.source] = true;
        for a in &self.arcs {
            m[a.tail] = true;
            m[a.head] = true;
        }
        m
    }

    /// Nodes of the subnetwork in topological order.
    pub fn topological_order(&self) -> Vec<usize> {
        let members = self.members();
        let n = self.num_nodes();
        let mut indeg = vec![0usize; n];
        for a in &self.arcs {
            indeg[a.head] += 1;
        }
        let mut queue: VecDeque<usize> =
            (0..n).filter(|&v| members[v] && indeg[v] == 0).collect();
        let mut order = Vec::new();
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for a in self.arcs.iter().filter(|a| a.tail == v) {
                indeg[a.head] -= 1;
                if indeg[a.head] == 0 {
                    queue.push_back(a.head);
                }
            }
        }
        order
    }

    /// Multiplies inflow and every capacity by `factor`.
    pub fn scaled(&self, factor: &Rat) -> Self {
        let mut p = self.clone();
        p.inflow *= factor;
        for a in &mut p.arcs {
            a.capacity *= factor;
        }
        p
    }
}

fn reach(start: usize, adj: &[Vec<usize>]) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

pub fn solve_ntfr(prob: &ThinFlowProblem) -> Result<ThinFlow, NtfrError> {
    solve_ntfr_with(prob, SolveOptions::default())
}

pub fn solve_ntfr_with(prob: &ThinFlowProblem, opts: SolveOptions) -> Result<ThinFlow, NtfrError> {
    let raw = match opts.method {
        Method::Auto => sp::solve(prob).map_or_else(|| enumerate::solve(prob, opts.order), Ok)?,
        Method::SeriesParallel => sp::solve(prob).ok_or(NtfrError::NotFound)?,
        Method::Enumerate => enumerate::solve(prob, opts.order)?,
    };
    let (labels, flows) = raw;
    let flows = lexmin_flows(prob, &labels, &flows, Order::Forward);
    let members = prob.members();
    Ok(ThinFlow {
        labels: labels
            .into_iter()
            .zip(&members)
            .map(|(l, &m)| m.then_some(l))
            .collect(),
        flows,
    })
}

/// Returns a copy of `tf` whose flow part is the lexicographically smallest
/// admissible vector in the given arc order.
pub fn canonical_flows(prob: &ThinFlowProblem, tf: &ThinFlow, order: Order) -> ThinFlow {
    let labels: Vec<Rat> = tf
        .labels
        .iter()
        .map(|l| l.clone().unwrap_or_else(Rat::zero))
        .collect();
    ThinFlow {
        labels: tf.labels.clone(),
        flows: lexmin_flows(prob, &labels, &tf.flows, order),
    }
}

/// Given the unique `ℓ′` and any admissible `x′`, every arc's flow is either
/// fixed by `ℓ′` or free in `[0, ν·ℓ′_w]` (non-resetting arcs with equal end
/// labels). Free arcs are minimized one by one by rerouting their flow through
/// the other free arcs that are not yet fixed.
fn lexmin_flows(prob: &ThinFlowProblem, labels: &[Rat], flows: &[Rat], order: Order) -> Vec<Rat> {
    let mut x = flows.to_vec();
    let free: Vec<bool> = prob
        .arcs
        .iter()
        .map(|a| !a.resetting && labels[a.head] == labels[a.tail])
        .collect();
    let cap: Vec<Rat> = prob
        .arcs
        .iter()
        .map(|a| &a.capacity * &labels[a.head])
        .collect();
    let mut fixed = vec![false; prob.arcs.len()];
    let seq: Vec<usize> = match order {
        Order::Forward => (0..prob.arcs.len()).collect(),
        Order::Reverse => (0..prob.arcs.len()).rev().collect(),
    };
    for &k in &seq {
        if !free[k] {
            continue;
        }
        fixed[k] = true;
        let e = &prob.arcs[k];
        if x[e.index].is_zero() {
            continue;
        }
        let mut net = FlowNetwork::new(prob.num_nodes());
        let mut handles = Vec::new();
        for (j, a) in prob.arcs.iter().enumerate() {
            if free[j] && !fixed[j] {
                let fw = net.add_edge(a.tail, a.head, &cap[j] - &x[a.index]);
                let bw = net.add_edge(a.head, a.tail, x[a.index].clone());
                handles.push((a.index, fw, bw));
            }
        }
        let pushed = net.max_flow(e.tail, e.head, Some(&x[e.index]));
        for (i, fw, bw) in handles {
            x[i] += net.flow(fw) - net.flow(bw);
        }
        x[e.index] -= pushed;
    }
    x
}

/// `ρ_e(ℓ′_v, x′_e)`.
pub fn rho(arc: &ThinArc, tail_label: &Rat, flow: &Rat) -> Rat {
    let r = flow / &arc.capacity;
    if arc.resetting || &r >= tail_label {
        r
    } else {
        tail_label.clone()
    }
}

/// Lists every violated thin-flow condition; empty iff `cand` is a thin flow.
pub fn verify_ntfr(prob: &ThinFlowProblem, cand: &ThinFlow) -> Vec<String> {
    let mut out = Vec::new();
    let members = prob.members();
    let name = |v: usize| prob.node_names[v].as_str();
    if cand.labels.len() != prob.num_nodes() || cand.flows.len() != prob.arc_names.len() {
        out.push("shape mismatch".to_string());
        return out;
    }
    if cand.labels[prob.source].as_ref() != Some(&Rat::one()) {
        out.push(format!("source label at {}", name(prob.source)));
    }
    for v in 0..prob.num_nodes() {
        match &cand.labels[v] {
            None if members[v] => out.push(format!("missing label at {}", name(v))),
            Some(l) if l < &Rat::zero() => out.push(format!("negative label at {}", name(v))),
            _ => {}
        }
    }
    if !out.is_empty() {
        return out;
    }
    let mut in_problem = vec![false; prob.arc_names.len()];
    for a in &prob.arcs {
        in_problem[a.index] = true;
    }
    for (i, f) in cand.flows.iter().enumerate() {
        if f < &Rat::zero() {
            out.push(format!("negative flow on {}", prob.arc_names[i]));
        } else if !in_problem[i] && !f.is_zero() {
            out.push(format!("flow on inactive arc {}", prob.arc_names[i]));
        }
    }
    let mut balance = vec![Rat::zero(); prob.num_nodes()];
    for a in &prob.arcs {
        balance[a.head] += &cand.flows[a.index];
        balance[a.tail] -= &cand.flows[a.index];
    }
    for v in 0..prob.num_nodes() {
        let expect = if v == prob.source {
            -prob.inflow.clone()
        } else if v == prob.sink {
            prob.inflow.clone()
        } else {
            Rat::zero()
        };
        if members[v] && balance[v] != expect {
            let what = if v == prob.source || v == prob.sink {
                "flow value"
            } else {
                "conservation"
            };
            out.push(format!("{what} at {}", name(v)));
        }
    }
    let label = |v: usize| cand.labels[v].as_ref().unwrap();
    let mut least: Vec<Option<Rat>> = vec![None; prob.num_nodes()];
    for a in &prob.arcs {
        let r = rho(a, label(a.tail), &cand.flows[a.index]);
        if cand.flows[a.index] > Rat::zero() && &r != label(a.head) {
            out.push(format!(
                "tightness on {} (rho {} vs label {})",
                prob.arc_names[a.index],
                to_exact(&r),
                to_exact(label(a.head))
            ));
        }
        let slot = &mut least[a.head];
        if slot.as_ref().is_none_or(|m| &r < m) {
            *slot = Some(r);
        }
    }
    for v in 0..prob.num_nodes() {
        if let Some(m) = &least[v] {
            if v != prob.source && m != label(v) {
                out.push(format!("label recursion at {}", name(v)));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{frac, int};

    fn example_one() -> Instance {
        Instance::builder("s", "t", int(1))
            .node("v")
            .arc("e", "s", "t", frac(1, 3), int(2))
            .arc("f", "s", "v", frac(3, 4), int(0))
            .arc("g", "v", "t", frac(1, 3), int(0))
            .arc("h", "v", "t", int(1), int(2))
            .build()
            .unwrap()
    }

    fn problem(active: &[bool], queued: &[bool]) -> ThinFlowProblem {
        ThinFlowProblem::new(&example_one(), active, queued).unwrap()
    }

    fn labels(tf: &ThinFlow) -> Vec<Rat> {
        tf.labels.iter().map(|l| l.clone().unwrap()).collect()
    }

    #[test]
    fn first_phase_of_example_one() {
        let p = problem(&[false, true, true, false], &[false; 4]);
        for method in [Method::SeriesParallel, Method::Enumerate] {
            let tf = solve_ntfr_with(&p, SolveOptions { method, ..Default::default() }).unwrap();
            assert_eq!(labels(&tf), vec![int(1), int(3), frac(4, 3)]);
            assert_eq!(tf.flows, vec![int(0), int(1), int(1), int(0)]);
            assert!(verify_ntfr(&p, &tf).is_empty());
        }
    }

    #[test]
    fn final_phase_splits_evenly() {
        let p = problem(&[true; 4], &[false, false, true, false]);
        for method in [Method::SeriesParallel, Method::Enumerate] {
            let tf = solve_ntfr_with(&p, SolveOptions { method, ..Default::default() }).unwrap();
            assert_eq!(labels(&tf), vec![int(1); 3]);
            assert_eq!(tf.flows, vec![frac(1, 4), frac(3, 4), frac(1, 3), frac(5, 12)]);
        }
        let even = ThinFlow {
            labels: vec![Some(int(1)); 3],
            flows: vec![frac(1, 3), frac(2, 3), frac(1, 3), frac(1, 3)],
        };
        assert!(verify_ntfr(&p, &even).is_empty());
    }

    #[test]
    fn wrong_sink_label_is_reported() {
        let p = problem(&[false, true, true, false], &[false; 4]);
        let mut tf = solve_ntfr(&p).unwrap();
        tf.labels[1] = Some(int(2));
        let v = verify_ntfr(&p, &tf);
        assert!(v.iter().any(|m| m == "label recursion at t"), "{v:?}");
    }

    #[test]
    fn broken_conservation_is_reported() {
        let p = problem(&[false, true, true, false], &[false; 4]);
        let mut tf = solve_ntfr(&p).unwrap();
        tf.flows[2] = frac(1, 2);
        let v = verify_ntfr(&p, &tf);
        assert!(v.iter().any(|m| m == "conservation at v"), "{v:?}");
    }

    #[test]
    fn pruning_drops_dead_ends_and_rejects_bad_classes() {
        let p = problem(&[true, true, false, false], &[false; 4]);
        assert_eq!(p.arcs.iter().map(|a| a.index).collect::<Vec<_>>(), vec![0]);
        let err = ThinFlowProblem::new(&example_one(), &[false, true, false, false], &[false; 4]);
        assert_eq!(err, Err(NtfrError::NoPath));
        let err = ThinFlowProblem::new(&example_one(), &[true, false, false, false], &[false, true, false, false]);
        assert_eq!(err, Err(NtfrError::QueuedNotActive("f".into())));
    }

    #[test]
    fn lexmin_prefers_later_arcs() {
        // two free parallel arcs: forward order empties the first
        let inst = Instance::builder("s", "t", int(1))
            .arc("a", "s", "t", int(2), int(0))
            .arc("b", "s", "t", int(2), int(0))
            .build()
            .unwrap();
        let p = ThinFlowProblem::new(&inst, &[true, true], &[false, false]).unwrap();
        let tf = solve_ntfr(&p).unwrap();
        assert_eq!(tf.flows, vec![int(0), int(1)]);
        let rev = canonical_flows(&p, &tf, Order::Reverse);
        assert_eq!(rev.flows, vec![int(1), int(0)]);
    }
}
