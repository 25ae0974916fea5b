//! Steady states as a pair of linear programs: the min-cost flow
//! `min Σ τ_e y′_e` over s→t flows of value `u₀` with `0 ≤ y′ ≤ ν`, and its
//! dual `max u₀ d_t − Σ ν_e q_e` s.t. `d_w ≤ d_v + τ_e + q_e`, `q ≥ 0`.

use crate::engine::{Status, Trajectory};
use crate::instance::Instance;
use crate::rat::{to_exact, Rat};
use num_traits::Zero;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SteadyError {
    #[error("inflow {0} exceeds the maximum flow {1}")]
    Infeasible(String, String),
    #[error("trajectory did not reach a steady state")]
    NotSteady,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SteadyFlow {
    pub flows: Vec<Rat>,
    pub cost: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualSolution {
    /// `d_v`, with `d_s = 0`.
    pub distances: Vec<Rat>,
    /// `q_e ≥ 0`.
    pub queues: Vec<Rat>,
    pub objective: Rat,
}

/// Residual edge: arc index and direction.
#[derive(Clone, Copy)]
struct Residual {
    arc: usize,
    forward: bool,
}

fn residual_edges(inst: &Instance, flows: &[Rat]) -> Vec<(usize, usize, Rat, Residual)> {
    let mut out = Vec::new();
    for (i, a) in inst.arcs.iter().enumerate() {
        if flows[i] < a.capacity {
            out.push((a.tail, a.head, a.delay.clone(), Residual { arc: i, forward: true }));
        }
        if flows[i] > Rat::zero() {
            out.push((a.head, a.tail, -a.delay.clone(), Residual { arc: i, forward: false }));
        }
    }
    out
}

/// Bellman–Ford from every node of `roots` at distance 0.
fn bellman_ford(
    n: usize,
    roots: &[usize],
    edges: &[(usize, usize, Rat, Residual)],
) -> (Vec<Option<Rat>>, Vec<Option<usize>>) {
    let mut dist: Vec<Option<Rat>> = vec![None; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    for &r in roots {
        dist[r] = Some(Rat::zero());
    }
    for _ in 0..n {
        let mut changed = false;
        for (k, (u, v, c, _)) in edges.iter().enumerate() {
            let Some(du) = &dist[*u] else { continue };
            let cand = du + c;
            if dist[*v].as_ref().is_none_or(|dv| &cand < dv) {
                dist[*v] = Some(cand);
                pred[*v] = Some(k);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (dist, pred)
}

/// Min-cost flow of value `u₀` by successive shortest augmenting paths.
pub fn solve_primal(inst: &Instance) -> Result<SteadyFlow, SteadyError> {
    let n = inst.nodes.len();
    let mut flows = vec![Rat::zero(); inst.arcs.len()];
    let mut sent = Rat::zero();
    while sent < inst.inflow {
        let edges = residual_edges(inst, &flows);
        let (dist, pred) = bellman_ford(n, &[inst.source], &edges);
        if dist[inst.sink].is_none() {
            return Err(SteadyError::Infeasible(to_exact(&inst.inflow), to_exact(&sent)));
        }
        let mut path = Vec::new();
        let mut v = inst.sink;
        while v != inst.source {
            let k = pred[v].expect("predecessor on shortest path");
            path.push(edges[k].3);
            v = edges[k].0;
        }
        let mut push = &inst.inflow - &sent;
        for r in &path {
            let room = if r.forward {
                &inst.arcs[r.arc].capacity - &flows[r.arc]
            } else {
                flows[r.arc].clone()
            };
            if room < push {
                push = room;
            }
        }
        for r in &path {
            if r.forward {
                flows[r.arc] += &push;
            } else {
                flows[r.arc] -= &push;
            }
        }
        sent += push;
    }
    let cost = cost_of(inst, &flows);
    Ok(SteadyFlow { flows, cost })
}

pub fn cost_of(inst: &Instance, flows: &[Rat]) -> Rat {
    inst.arcs.iter().zip(flows).map(|(a, y)| &a.delay * y).sum()
}

pub fn dual_objective(inst: &Instance, distances: &[Rat], queues: &[Rat]) -> Rat {
    &inst.inflow * (&distances[inst.sink] - &distances[inst.source])
        - inst
            .arcs
            .iter()
            .zip(queues)
            .map(|(a, q)| &a.capacity * q)
            .sum::<Rat>()
}

/// Node potentials from the optimal residual graph, with `q_e` the positive
/// part of each arc's reduced cost.
pub fn extract_dual(inst: &Instance, primal: &SteadyFlow) -> DualSolution {
    let n = inst.nodes.len();
    let edges = residual_edges(inst, &primal.flows);
    let (reach, _) = bellman_ford(n, &[inst.source], &edges);
    let unreached: Vec<usize> = (0..n).filter(|&v| reach[v].is_none()).collect();
    let mut distances: Vec<Rat> = reach.iter().map(|d| d.clone().unwrap_or_else(Rat::zero)).collect();
    if !unreached.is_empty() {
        let inner: Vec<_> = edges
            .iter()
            .filter(|(u, v, _, _)| reach[*u].is_none() && reach[*v].is_none())
            .cloned()
            .collect();
        let (local, _) = bellman_ford(n, &unreached, &inner);
        let top = reach.iter().flatten().max().cloned().unwrap_or_else(Rat::zero);
        let longest = inst.arcs.iter().map(|a| a.delay.clone()).max().unwrap_or_else(Rat::zero);
        let low = unreached
            .iter()
            .map(|&v| local[v].clone().unwrap())
            .min()
            .unwrap();
        let shift = top + longest - low + Rat::from_integer(1.into());
        for &v in &unreached {
            distances[v] = local[v].clone().unwrap() + &shift;
        }
    }
    let queues: Vec<Rat> = inst
        .arcs
        .iter()
        .map(|a| {
            let q = &distances[a.head] - &distances[a.tail] - &a.delay;
            if q > Rat::zero() {
                q
            } else {
                Rat::zero()
            }
        })
        .collect();
    let objective = dual_objective(inst, &distances, &queues);
    DualSolution {
        distances,
        queues,
        objective,
    }
}

/// Outcome of checking a primal/dual pair; `violations` is empty iff optimal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairCheck {
    pub primal_feasible: bool,
    pub dual_feasible: bool,
    pub complementary: bool,
    pub objectives_equal: bool,
    pub violations: Vec<String>,
}

impl PairCheck {
    pub fn is_optimal(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn primal_violations(inst: &Instance, flows: &[Rat]) -> Vec<String> {
    let mut out = Vec::new();
    let mut balance = vec![Rat::zero(); inst.nodes.len()];
    for (a, y) in inst.arcs.iter().zip(flows) {
        if y < &Rat::zero() || y > &a.capacity {
            out.push(format!("flow on {} outside [0, capacity]", a.id));
        }
        balance[a.head] += y;
        balance[a.tail] -= y;
    }
    for (v, b) in balance.iter().enumerate() {
        let expect = if v == inst.source {
            -inst.inflow.clone()
        } else if v == inst.sink {
            inst.inflow.clone()
        } else {
            Rat::zero()
        };
        if b != &expect {
            out.push(format!("conservation at {}", inst.nodes[v]));
        }
    }
    out
}

pub fn dual_violations(inst: &Instance, distances: &[Rat], queues: &[Rat]) -> Vec<String> {
    let mut out = Vec::new();
    if !distances[inst.source].is_zero() {
        out.push("source distance not zero".to_string());
    }
    for (i, a) in inst.arcs.iter().enumerate() {
        if queues[i] < Rat::zero() {
            out.push(format!("negative q on {}", a.id));
        }
        if distances[a.head] > &distances[a.tail] + &a.delay + &queues[i] {
            out.push(format!("dual constraint of {}", a.id));
        }
    }
    out
}

pub fn verify_optimal_pair(inst: &Instance, flow: &SteadyFlow, dual: &DualSolution) -> PairCheck {
    let p = primal_violations(inst, &flow.flows);
    let d = dual_violations(inst, &dual.distances, &dual.queues);
    let mut c = Vec::new();
    for (i, a) in inst.arcs.iter().enumerate() {
        let y = &flow.flows[i];
        let q = &dual.queues[i];
        if q > &Rat::zero() && y != &a.capacity {
            c.push(format!("q > 0 on unsaturated {}", a.id));
        }
        if y > &Rat::zero() && distances_gap(inst, dual, i) != Rat::zero() {
            c.push(format!("flow on non-tight {}", a.id));
        }
    }
    let cost = cost_of(inst, &flow.flows);
    let obj = dual_objective(inst, &dual.distances, &dual.queues);
    let equal = cost == obj && obj == dual.objective;
    let mut violations: Vec<String> = p.iter().chain(&d).chain(&c).cloned().collect();
    if !equal {
        violations.push(format!("objective gap {}", to_exact(&(&cost - &obj))));
    }
    PairCheck {
        primal_feasible: p.is_empty(),
        dual_feasible: d.is_empty(),
        complementary: c.is_empty(),
        objectives_equal: equal,
        violations,
    }
}

fn distances_gap(inst: &Instance, dual: &DualSolution, i: usize) -> Rat {
    let a = &inst.arcs[i];
    &dual.distances[a.tail] + &a.delay + &dual.queues[i] - &dual.distances[a.head]
}

/// What the simulated steady state says about the linear programs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SteadyReport {
    pub theta_star: Rat,
    /// Final entry-time queues `z*`.
    pub queues: Vec<Rat>,
    /// `q* = z*/ν`.
    pub queue_delays: Vec<Rat>,
    /// `d*_v = ℓ_v(θ*) − θ*`.
    pub distances: Vec<Rat>,
    /// Largest queue seen on each arc at any phase boundary.
    pub max_queues: Vec<Rat>,
    pub lp_flow: SteadyFlow,
    pub lp_dual: DualSolution,
    pub simulated_objective: Rat,
    pub dual_feasible: bool,
    pub dual_optimal: bool,
    pub matches_lp_objective: bool,
    pub flow_optimal: bool,
    pub violations: Vec<String>,
}

impl SteadyReport {
    pub fn passes(&self) -> bool {
        self.dual_feasible && self.dual_optimal && self.matches_lp_objective && self.flow_optimal
    }
}

pub fn steady_report(traj: &Trajectory) -> Result<SteadyReport, SteadyError> {
    let Status::SteadyState { theta } = &traj.status else {
        return Err(SteadyError::NotSteady);
    };
    let inst = &traj.instance;
    let last = traj.phases.last().ok_or(SteadyError::NotSteady)?;
    let snap = &last.start;
    let queues = snap.queues.clone();
    let queue_delays: Vec<Rat> = queues
        .iter()
        .zip(&inst.arcs)
        .map(|(z, a)| z / &a.capacity)
        .collect();
    let distances: Vec<Rat> = snap.labels.iter().map(|l| l - theta).collect();
    let mut max_queues = traj.initial.queues.clone();
    for p in &traj.phases {
        for (m, z) in max_queues.iter_mut().zip(&p.start.queues) {
            if z > m {
                *m = z.clone();
            }
        }
    }
    let lp_flow = solve_primal(inst)?;
    let lp_dual = extract_dual(inst, &lp_flow);
    let simulated_objective = dual_objective(inst, &distances, &queue_delays);
    let mut violations = dual_violations(inst, &distances, &queue_delays);
    let dual_feasible = violations.is_empty();
    let sim_dual = DualSolution {
        distances: distances.clone(),
        queues: queue_delays.clone(),
        objective: simulated_objective.clone(),
    };
    let final_flow = SteadyFlow {
        cost: cost_of(inst, &last.thin_flow.flows),
        flows: last.thin_flow.flows.clone(),
    };
    let pair = verify_optimal_pair(inst, &final_flow, &sim_dual);
    let dual_optimal = pair.is_optimal();
    violations.extend(pair.violations.iter().cloned());
    let matches_lp_objective = simulated_objective == lp_flow.cost;
    if !matches_lp_objective {
        violations.push("simulated dual objective differs from LP optimum".into());
    }
    let flow_optimal = final_flow.cost == lp_flow.cost && pair.primal_feasible;
    violations.sort();
    violations.dedup();
    Ok(SteadyReport {
        theta_star: theta.clone(),
        queues,
        queue_delays,
        distances,
        max_queues,
        lp_flow,
        lp_dual,
        simulated_objective,
        dual_feasible,
        dual_optimal,
        matches_lp_objective,
        flow_optimal,
        violations,
    })
}
