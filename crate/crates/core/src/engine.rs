//! Phase-by-phase integration of the dynamic equilibrium.
//!
//! Each phase solves the thin flow of the current arc classes, moves labels,
//! queues and cumulative flows linearly to the first event (an inactive arc
//! becoming tight or a queue emptying), and reclassifies.

use crate::dynamics::{classify_arcs, initial_labels, ArcClassification, DynamicsError, Snapshot};
use crate::instance::{min_queuing_cut, Instance};
use crate::ntfr::{solve_ntfr, NtfrError, ThinFlow, ThinFlowProblem};
use crate::potential::pseudo_bounds;
use crate::rat::{to_exact, Rat};
use num_traits::{One, Zero};
use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Ntfr(#[from] NtfrError),
    #[error("no further event, labels still drift, and inflow does not exceed the min cut")]
    Stalled,
    #[error("horizon must be positive")]
    BadHorizon,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PhaseEnd {
    /// Arcs that become active and arcs whose queue empties at the phase end.
    Events { activates: Vec<usize>, depletes: Vec<usize> },
    SteadyState,
    UnboundedGrowth,
    Horizon,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phase {
    pub index: usize,
    pub theta_start: Rat,
    /// `None` when the phase never ends.
    pub theta_end: Option<Rat>,
    pub start: Snapshot,
    pub classification: ArcClassification,
    pub thin_flow: ThinFlow,
    /// `ℓ′` on every node, including nodes off the pruned subnetwork.
    pub label_rates: Vec<Rat>,
    pub end: PhaseEnd,
}

impl Phase {
    pub fn duration(&self) -> Option<Rat> {
        self.theta_end.as_ref().map(|e| e - &self.theta_start)
    }

    pub fn is_steady(&self) -> bool {
        self.end == PhaseEnd::SteadyState
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    SteadyState { theta: Rat },
    HorizonReached,
    PhaseCapReached { recent: Vec<ArcClassification> },
    UnboundedGrowth,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub instance: Instance,
    pub initial: Snapshot,
    pub phases: Vec<Phase>,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Limits {
    pub max_phases: usize,
    /// Defaults to the pseudopolynomial convergence bound when the inflow
    /// does not exceed the min cut.
    pub horizon: Option<Rat>,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_phases: 1_000_000,
            horizon: None,
        }
    }
}

/// Extends `ℓ′` from the pruned subnetwork to every node reachable through
/// active arcs, in topological order of the active arcs.
pub fn extend_label_rates(inst: &Instance, cls: &ArcClassification, tf: &ThinFlow) -> Vec<Rat> {
    let n = inst.nodes.len();
    let mut rates: Vec<Option<Rat>> = tf.labels.clone();
    let mut indeg = vec![0usize; n];
    for (i, a) in inst.arcs.iter().enumerate() {
        if cls.active[i] {
            indeg[a.head] += 1;
        }
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    while let Some(v) = queue.pop_front() {
        for (i, a) in inst.arcs.iter().enumerate() {
            if !cls.active[i] || a.tail != v {
                continue;
            }
            indeg[a.head] -= 1;
            if indeg[a.head] == 0 {
                queue.push_back(a.head);
            }
        }
        if rates[v].is_some() {
            continue;
        }
        let best = inst
            .arcs
            .iter()
            .enumerate()
            .filter(|&(i, a)| cls.active[i] && a.head == v)
            .map(|(i, a)| {
                if cls.queued[i] {
                    Rat::zero()
                } else {
                    rates[a.tail].clone().unwrap_or_else(Rat::one)
                }
            })
            .min();
        rates[v] = Some(best.unwrap_or_else(Rat::one));
    }
    rates.into_iter().map(|r| r.unwrap_or_else(Rat::one)).collect()
}

/// Time to the next event (`None` when no event occurs), the arcs that
/// become active then, and the arcs whose queue empties then.
pub type NextEvent = (Option<Rat>, Vec<usize>, Vec<usize>);

pub fn phase_horizon(
    inst: &Instance,
    snap: &Snapshot,
    cls: &ArcClassification,
    rates: &[Rat],
) -> Result<NextEvent, DynamicsError> {
    let mut best: Option<Rat> = None;
    let mut activates = Vec::new();
    let mut depletes = Vec::new();
    let mut offer = |t: Rat, i: usize, act: bool, best: &mut Option<Rat>| {
        if best.as_ref().is_none_or(|b| &t < b) {
            *best = Some(t.clone());
            activates.clear();
            depletes.clear();
        }
        if best.as_ref() == Some(&t) {
            if act {
                activates.push(i);
            } else {
                depletes.push(i);
            }
        }
    };
    for (i, a) in inst.arcs.iter().enumerate() {
        let speed = &rates[a.head] - &rates[a.tail];
        if !cls.active[i] {
            let slack = &snap.labels[a.tail] + &a.delay - &snap.labels[a.head];
            if slack <= Rat::zero() {
                return Err(DynamicsError::Corrupted(format!("inactive arc {} has no slack", a.id)));
            }
            if speed > Rat::zero() {
                offer(slack / speed, i, true, &mut best);
            }
        } else if cls.queued[i] && speed < Rat::zero() {
            offer(&snap.queues[i] / (&a.capacity * -speed), i, false, &mut best);
        }
    }
    Ok((best, activates, depletes))
}

/// Moves the state forward by `delta` at constant rates.
pub fn advance(
    inst: &Instance,
    snap: &Snapshot,
    cls: &ArcClassification,
    rates: &[Rat],
    flow_rates: &[Rat],
    delta: &Rat,
) -> Result<Snapshot, DynamicsError> {
    let labels: Vec<Rat> = snap
        .labels
        .iter()
        .zip(rates)
        .map(|(l, r)| l + r * delta)
        .collect();
    let mut queues = snap.queues.clone();
    for (i, a) in inst.arcs.iter().enumerate() {
        if !cls.active[i] {
            continue;
        }
        let z = &snap.queues[i] + &a.capacity * (&rates[a.head] - &rates[a.tail]) * delta;
        if z < Rat::zero() {
            if cls.queued[i] {
                return Err(DynamicsError::Corrupted(format!(
                    "queue on {} would become {}",
                    a.id,
                    to_exact(&z)
                )));
            }
            queues[i] = Rat::zero();
        } else {
            queues[i] = z;
        }
    }
    let flows = snap
        .flows
        .iter()
        .zip(flow_rates)
        .map(|(x, r)| x + r * delta)
        .collect();
    Ok(Snapshot {
        theta: &snap.theta + delta,
        labels,
        queues,
        flows,
    })
}

pub fn detect_steady_state(rates: &[Rat], delta: Option<&Rat>) -> bool {
    delta.is_none() && rates.iter().all(|r| r.is_one())
}

/// The pseudopolynomial convergence bound when `u₀ ≤ ν̄`, else `None`.
pub fn default_horizon(inst: &Instance) -> Option<Rat> {
    (inst.inflow <= min_queuing_cut(inst).capacity).then(|| pseudo_bounds(inst).time_bound)
}

pub fn solve_equilibrium(inst: &Instance, limits: &Limits) -> Result<Trajectory, EngineError> {
    if limits.horizon.as_ref().is_some_and(|h| h <= &Rat::zero()) {
        return Err(EngineError::BadHorizon);
    }
    let explicit = limits.horizon.is_some();
    let horizon = limits.horizon.clone().or_else(|| default_horizon(inst));
    let overloaded = inst.inflow > min_queuing_cut(inst).capacity;
    let initial = initial_labels(inst)?;
    initial.check(inst)?;
    let mut snap = initial.clone();
    let mut phases: Vec<Phase> = Vec::new();
    let mut recent: VecDeque<ArcClassification> = VecDeque::new();
    let status = loop {
        if phases.len() >= limits.max_phases {
            break Status::PhaseCapReached {
                recent: recent.into_iter().collect(),
            };
        }
        let cls = classify_arcs(inst, &snap)?;
        recent.push_back(cls.clone());
        if recent.len() > 10 {
            recent.pop_front();
        }
        let prob = ThinFlowProblem::new(inst, &cls.active, &cls.queued)?;
        let tf = solve_ntfr(&prob)?;
        let rates = extend_label_rates(inst, &cls, &tf);
        let (delta, activates, depletes) = phase_horizon(inst, &snap, &cls, &rates)?;
        let mut phase = Phase {
            index: phases.len(),
            theta_start: snap.theta.clone(),
            theta_end: None,
            start: snap.clone(),
            classification: cls,
            thin_flow: tf,
            label_rates: rates,
            end: PhaseEnd::Horizon,
        };
        if detect_steady_state(&phase.label_rates, delta.as_ref()) {
            phase.end = PhaseEnd::SteadyState;
            let theta = phase.theta_start.clone();
            phases.push(phase);
            break Status::SteadyState { theta };
        }
        let end = delta.as_ref().map(|d| &snap.theta + d);
        if let Some(h) = &horizon {
            if end.as_ref().is_none_or(|e| e > h || (explicit && e == h)) {
                phase.theta_end = Some(h.clone());
                phases.push(phase);
                break Status::HorizonReached;
            }
        }
        let Some(delta) = delta else {
            if !overloaded {
                return Err(EngineError::Stalled);
            }
            phase.end = PhaseEnd::UnboundedGrowth;
            phases.push(phase);
            break Status::UnboundedGrowth;
        };
        let next = advance(
            inst,
            &snap,
            &phase.classification,
            &phase.label_rates,
            &phase.thin_flow.flows,
            &delta,
        )?;
        next.check(inst)?;
        phase.theta_end = end;
        phase.end = PhaseEnd::Events { activates, depletes };
        phases.push(phase);
        snap = next;
    };
    Ok(Trajectory {
        instance: inst.clone(),
        initial,
        phases,
        status,
    })
}

impl Trajectory {
    /// State at `theta`, or `None` beyond the simulated range.
    pub fn snapshot_at(&self, theta: &Rat) -> Option<Snapshot> {
        if theta < &Rat::zero() {
            return None;
        }
        let p = self
            .phases
            .iter()
            .find(|p| p.theta_end.as_ref().is_none_or(|e| theta < e))
            .or_else(|| {
                self.phases
                    .last()
                    .filter(|p| p.theta_end.as_ref() == Some(theta))
            })?;
        advance(
            &self.instance,
            &p.start,
            &p.classification,
            &p.label_rates,
            &p.thin_flow.flows,
            &(theta - &p.theta_start),
        )
        .ok()
    }

    /// State at the end of the last finite phase, or at the start of the
    /// unbounded final phase.
    pub fn final_snapshot(&self) -> Snapshot {
        let last = self.phases.last().expect("at least one phase");
        match &last.theta_end {
            Some(e) => self.snapshot_at(e).expect("end of range"),
            None => last.start.clone(),
        }
    }

    pub fn steady_time(&self) -> Option<&Rat> {
        match &self.status {
            Status::SteadyState { theta } => Some(theta),
            _ => None,
        }
    }

    /// Phase boundaries strictly after 0 (end times of all finite phases).
    pub fn boundaries(&self) -> Vec<Rat> {
        self.phases.iter().filter_map(|p| p.theta_end.clone()).collect()
    }

    /// `ℓ′_t` per phase.
    pub fn sink_rates(&self) -> Vec<Rat> {
        self.phases
            .iter()
            .map(|p| p.label_rates[self.instance.sink].clone())
            .collect()
    }
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

    #[test]
    fn example_one_phases() {
        let traj = solve_equilibrium(&example_one(), &Limits::default()).unwrap();
        assert_eq!(traj.boundaries(), vec![int(1), frac(7, 5), int(4)]);
        assert_eq!(traj.sink_rates(), vec![int(3), frac(3, 2), frac(12, 13), int(1)]);
        assert_eq!(traj.status, Status::SteadyState { theta: int(4) });
        assert_eq!(
            traj.phases[0].end,
            PhaseEnd::Events { activates: vec![0], depletes: vec![] }
        );
        assert_eq!(
            traj.phases[2].end,
            PhaseEnd::Events { activates: vec![], depletes: vec![0, 1] }
        );
    }

    #[test]
    fn single_arc_is_steady_at_once() {
        let inst = Instance::builder("s", "t", int(1))
            .arc("e", "s", "t", int(2), int(3))
            .build()
            .unwrap();
        let traj = solve_equilibrium(&inst, &Limits::default()).unwrap();
        assert_eq!(traj.phases.len(), 1);
        assert_eq!(traj.steady_time(), Some(&int(0)));
    }

    #[test]
    fn overloaded_arc_grows_without_bound() {
        let inst = Instance::builder("s", "t", int(2))
            .arc("e", "s", "t", int(1), int(1))
            .build()
            .unwrap();
        let traj = solve_equilibrium(&inst, &Limits::default()).unwrap();
        assert_eq!(traj.status, Status::UnboundedGrowth);
        assert_eq!(traj.sink_rates(), vec![int(2)]);
    }

    #[test]
    fn horizon_truncates() {
        let limits = Limits { horizon: Some(frac(1, 2)), ..Limits::default() };
        let traj = solve_equilibrium(&example_one(), &limits).unwrap();
        assert_eq!(traj.status, Status::HorizonReached);
        assert_eq!(traj.boundaries(), vec![frac(1, 2)]);
    }

    #[test]
    fn phase_cap_keeps_recent_classes() {
        let limits = Limits { max_phases: 2, ..Limits::default() };
        let traj = solve_equilibrium(&example_one(), &limits).unwrap();
        match traj.status {
            Status::PhaseCapReached { recent } => assert_eq!(recent.len(), 2),
            s => panic!("{s:?}"),
        }
    }

    #[test]
    fn advance_by_zero_is_identity() {
        let inst = example_one();
        let traj = solve_equilibrium(&inst, &Limits::default()).unwrap();
        let p = &traj.phases[1];
        let same = advance(&inst, &p.start, &p.classification, &p.label_rates, &p.thin_flow.flows, &int(0)).unwrap();
        assert_eq!(same, p.start);
    }
}
