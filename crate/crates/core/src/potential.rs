//! The potential `Φ = u₀(ℓ_t − ℓ_s) − Σ ẑ_e`, its rate per phase, and the
//! pseudopolynomial convergence bounds.

use crate::dynamics::{ArcClassification, Snapshot};
use crate::engine::Trajectory;
use crate::instance::{min_queuing_cut, Instance};
use crate::rat::{lcm_denominators, Rat};
use crate::steady::solve_primal;
use num_bigint::BigInt;
use num_traits::{One, Zero};

pub fn phi(inst: &Instance, snap: &Snapshot) -> Rat {
    &inst.inflow * (&snap.labels[inst.sink] - &snap.labels[inst.source])
        - snap.queues.iter().sum::<Rat>()
}

/// Arcs whose queue can change: queued arcs and active arcs carrying flow.
fn changing(cls: &ArcClassification, flows: &[Rat], i: usize) -> bool {
    cls.queued[i] || (cls.active[i] && flows[i] > Rat::zero())
}

/// `Φ′ = u₀(ℓ′_t − ℓ′_s) − Σ_{e∈E⁺} ν_e(ℓ′_w − ℓ′_v)`.
pub fn phi_rate(inst: &Instance, cls: &ArcClassification, rates: &[Rat], flows: &[Rat]) -> Rat {
    let mut r = &inst.inflow * (&rates[inst.sink] - &rates[inst.source]);
    for (i, a) in inst.arcs.iter().enumerate() {
        if changing(cls, flows, i) {
            r -= &a.capacity * (&rates[a.head] - &rates[a.tail]);
        }
    }
    r
}

/// `Φ′` as an integral over label-rate levels `z` of the capacity imbalance
/// of `V_z = {v : ℓ′_v ≤ z}`, counting a return arc `t→s` of capacity `u₀`.
pub fn phi_rate_oracle(inst: &Instance, cls: &ArcClassification, rates: &[Rat], flows: &[Rat]) -> Rat {
    let mut arcs: Vec<(usize, usize, &Rat)> = inst
        .arcs
        .iter()
        .enumerate()
        .filter(|&(i, _)| changing(cls, flows, i))
        .map(|(_, a)| (a.tail, a.head, &a.capacity))
        .collect();
    arcs.push((inst.sink, inst.source, &inst.inflow));
    let mut levels: Vec<&Rat> = rates.iter().collect();
    levels.sort();
    levels.dedup();
    let mut total = Rat::zero();
    for w in levels.windows(2) {
        let (z, next) = (w[0], w[1]);
        let inside = |v: usize| &rates[v] <= z;
        let mut imbalance = Rat::zero();
        for &(v, u, cap) in &arcs {
            match (inside(v), inside(u)) {
                (true, false) => imbalance += cap,
                (false, true) => imbalance -= cap,
                _ => {}
            }
        }
        total -= imbalance * (next - z);
    }
    total
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoBounds {
    /// Least positive integer with `K·ν_e` and `K·u₀` integral.
    pub k: BigInt,
    /// `Σ ν_e`.
    pub m: Rat,
    /// `Σ (τ_e + ẑ_e(0)/ν_e)`.
    pub t: Rat,
    /// `2K²M²T`.
    pub time_bound: Rat,
    /// `2u₀K³M²T`, a bound on the waiting time `ẑ_e/ν_e` in any queue.
    pub queue_bound: Rat,
}

pub fn pseudo_bounds(inst: &Instance) -> PseudoBounds {
    let k = lcm_denominators(
        inst.arcs
            .iter()
            .map(|a| &a.capacity)
            .chain(std::iter::once(&inst.inflow)),
    );
    let m: Rat = inst.arcs.iter().map(|a| a.capacity.clone()).sum();
    let t: Rat = inst
        .arcs
        .iter()
        .map(|a| &a.delay + &a.initial_queue / &a.capacity)
        .sum();
    let kr = Rat::from_integer(k.clone());
    let two = Rat::from_integer(BigInt::from(2));
    let time_bound = &two * &kr * &kr * &m * &m * &t;
    let queue_bound = &time_bound * &kr * &inst.inflow;
    PseudoBounds {
        k,
        m,
        t,
        time_bound,
        queue_bound,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PotentialEntry {
    pub theta_start: Rat,
    pub phi: Rat,
    pub rate: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PotentialTrace {
    pub entries: Vec<PotentialEntry>,
    /// Optimum of the steady-state min-cost flow, when `u₀ ≤ ν̄`.
    pub alpha: Option<Rat>,
}

impl PotentialTrace {
    pub fn of(traj: &Trajectory) -> Self {
        let inst = &traj.instance;
        let entries = traj
            .phases
            .iter()
            .map(|p| PotentialEntry {
                theta_start: p.theta_start.clone(),
                phi: phi(inst, &p.start),
                rate: phi_rate(inst, &p.classification, &p.label_rates, &p.thin_flow.flows),
            })
            .collect();
        let alpha = (inst.inflow <= min_queuing_cut(inst).capacity)
            .then(|| solve_primal(inst).ok().map(|f| f.cost))
            .flatten();
        Self { entries, alpha }
    }

    /// Checks `Φ(end) = Φ(start) + Φ′·length` for every finite phase against
    /// the potential recomputed from the trajectory's snapshots.
    pub fn telescoping_violations(&self, traj: &Trajectory) -> Vec<usize> {
        let inst = &traj.instance;
        traj.phases
            .iter()
            .zip(&self.entries)
            .filter_map(|(p, e)| {
                let d = p.duration()?;
                let end = traj.snapshot_at(p.theta_end.as_ref().unwrap())?;
                (phi(inst, &end) != &e.phi + &e.rate * d).then_some(p.index)
            })
            .collect()
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.entries.iter().all(|e| e.rate >= Rat::zero())
    }
}

/// The smallest rate a non-steady phase may have for integral data.
pub fn integral_rate_floor(inst: &Instance) -> Rat {
    let m: Rat = inst.arcs.iter().map(|a| a.capacity.clone()).sum();
    Rat::one() / (Rat::from_integer(BigInt::from(2)) * m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{solve_equilibrium, Limits};
    use crate::rat::{frac, int};

    fn example_one(u: i64, tau: i64) -> Instance {
        let u = int(u);
        Instance::builder("s", "t", u.clone())
            .node("v")
            .arc("e", "s", "t", &u / int(3), int(tau))
            .arc("f", "s", "v", &u * frac(3, 4), int(0))
            .arc("g", "v", "t", &u / int(3), int(0))
            .arc("h", "v", "t", u.clone(), int(tau))
            .build()
            .unwrap()
    }

    #[test]
    fn first_phase_rate_of_example_one() {
        for u in [1, 12] {
            let inst = example_one(u, 1);
            let traj = solve_equilibrium(&inst, &Limits::default()).unwrap();
            let p = &traj.phases[0];
            let r = phi_rate(&inst, &p.classification, &p.label_rates, &p.thin_flow.flows);
            assert_eq!(r, int(43 * u) / int(36));
            assert_eq!(r, phi_rate_oracle(&inst, &p.classification, &p.label_rates, &p.thin_flow.flows));
            assert_eq!(phi(&inst, &p.start), int(0));
        }
    }

    #[test]
    fn trace_telescopes_and_ends_at_alpha() {
        let inst = example_one(1, 2);
        let traj = solve_equilibrium(&inst, &Limits::default()).unwrap();
        let trace = PotentialTrace::of(&traj);
        assert!(trace.telescoping_violations(&traj).is_empty());
        assert!(trace.is_nondecreasing());
        let last = trace.entries.last().unwrap();
        assert_eq!(last.rate, int(0));
        assert_eq!(Some(last.phi.clone()), trace.alpha);
        assert_eq!(trace.alpha, Some(frac(4, 3)));
    }

    #[test]
    fn bounds_of_single_arc() {
        let inst = Instance::builder("s", "t", int(1))
            .arc("e", "s", "t", int(1), int(1))
            .build()
            .unwrap();
        let b = pseudo_bounds(&inst);
        assert_eq!(b.k, BigInt::from(1));
        assert_eq!((b.m, b.t, b.time_bound, b.queue_bound), (int(1), int(1), int(2), int(2)));
    }
}
