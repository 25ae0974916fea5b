//! Point-in-time state of an equilibrium: labels, entry-time queues, arc
//! classes, and checks of the cumulative-flow identity.

use crate::engine::Trajectory;
use crate::instance::{Arc, Instance};
use crate::rat::{to_exact, Rat};
use num_traits::Zero;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DynamicsError {
    #[error("node {0} is unreachable from the source")]
    Unreachable(String),
    #[error("arc {0} has an initial queue but is not on a shortest path")]
    QueueOnInactiveArc(String),
    #[error("corrupted state: {0}")]
    Corrupted(String),
}

/// State at global time `theta` (the departure time at the source).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub theta: Rat,
    /// `ℓ_v(θ)`: earliest arrival time at `v`.
    pub labels: Vec<Rat>,
    /// `ẑ_e(θ)`: queue volume met on entering `e = vw` at time `ℓ_v(θ)`.
    pub queues: Vec<Rat>,
    /// `x_e(θ)`: cumulative flow that entered `e` by local time `ℓ_v(θ)`.
    pub flows: Vec<Rat>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ArcClassification {
    pub active: Vec<bool>,
    pub queued: Vec<bool>,
}

impl ArcClassification {
    pub fn active_ids<'a>(&self, inst: &'a Instance) -> Vec<&'a str> {
        pick(inst, &self.active)
    }

    pub fn queued_ids<'a>(&self, inst: &'a Instance) -> Vec<&'a str> {
        pick(inst, &self.queued)
    }
}

fn pick<'a>(inst: &'a Instance, mask: &[bool]) -> Vec<&'a str> {
    inst.arcs
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(a, _)| a.id.as_str())
        .collect()
}

/// Exit time of a particle entering `arc` at `entry` behind a queue of `queue`.
pub fn exit_time(entry: &Rat, queue: &Rat, arc: &Arc) -> Rat {
    entry + queue / &arc.capacity + &arc.delay
}

/// Cost of traversing `arc` at the moment its entry-time queue is `queue`.
pub fn traversal(arc: &Arc, queue: &Rat) -> Rat {
    exit_time(&Rat::zero(), queue, arc)
}

/// Labels at `θ = 0`: shortest arrival times with arc cost `τ + ẑ(0)/ν`.
pub fn initial_labels(inst: &Instance) -> Result<Snapshot, DynamicsError> {
    let n = inst.nodes.len();
    let mut dist: Vec<Option<Rat>> = vec![None; n];
    let mut done = vec![false; n];
    dist[inst.source] = Some(Rat::zero());
    loop {
        let next = (0..n)
            .filter(|&v| !done[v] && dist[v].is_some())
            .min_by(|&a, &b| dist[a].cmp(&dist[b]));
        let Some(u) = next else { break };
        done[u] = true;
        let du = dist[u].clone().unwrap();
        for a in inst.arcs.iter().filter(|a| a.tail == u) {
            let cand = &du + traversal(a, &a.initial_queue);
            if dist[a.head].as_ref().is_none_or(|d| &cand < d) {
                dist[a.head] = Some(cand);
            }
        }
    }
    let labels = dist
        .into_iter()
        .enumerate()
        .map(|(v, d)| d.ok_or_else(|| DynamicsError::Unreachable(inst.nodes[v].clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let snap = Snapshot {
        theta: Rat::zero(),
        labels,
        queues: inst.arcs.iter().map(|a| a.initial_queue.clone()).collect(),
        flows: vec![Rat::zero(); inst.arcs.len()],
    };
    for a in &inst.arcs {
        if a.initial_queue > Rat::zero()
            && snap.labels[a.head] != exit_time(&snap.labels[a.tail], &a.initial_queue, a)
        {
            return Err(DynamicsError::QueueOnInactiveArc(a.id.clone()));
        }
    }
    Ok(snap)
}

pub fn classify_arcs(inst: &Instance, snap: &Snapshot) -> Result<ArcClassification, DynamicsError> {
    let mut active = Vec::with_capacity(inst.arcs.len());
    let mut queued = Vec::with_capacity(inst.arcs.len());
    for (i, a) in inst.arcs.iter().enumerate() {
        let tight = snap.labels[a.head] == exit_time(&snap.labels[a.tail], &snap.queues[i], a);
        let q = snap.queues[i] > Rat::zero();
        if q && !tight {
            return Err(DynamicsError::Corrupted(format!(
                "arc {} has queue {} but is inactive",
                a.id,
                to_exact(&snap.queues[i])
            )));
        }
        active.push(tight);
        queued.push(q);
    }
    Ok(ArcClassification { active, queued })
}

impl Snapshot {
    /// Checks the equilibrium invariants: `ℓ_s = θ`, nonnegative queues,
    /// Bellman optimality of the labels, and queued arcs being active.
    pub fn check(&self, inst: &Instance) -> Result<(), DynamicsError> {
        let bad = |m: String| Err(DynamicsError::Corrupted(m));
        if self.labels[inst.source] != self.theta {
            return bad("source label differs from theta".into());
        }
        let mut attained = vec![false; inst.nodes.len()];
        attained[inst.source] = true;
        for (i, a) in inst.arcs.iter().enumerate() {
            let z = &self.queues[i];
            if z < &Rat::zero() {
                return bad(format!("negative queue on {}", a.id));
            }
            let t = exit_time(&self.labels[a.tail], z, a);
            if t < self.labels[a.head] {
                return bad(format!("label of {} exceeds exit time via {}", inst.nodes[a.head], a.id));
            }
            if t == self.labels[a.head] {
                attained[a.head] = true;
            } else if z > &Rat::zero() {
                return bad(format!("queued arc {} is inactive", a.id));
            }
        }
        if let Some(v) = attained.iter().position(|&x| !x) {
            return bad(format!("label of {} not attained by any arc", inst.nodes[v]));
        }
        Ok(())
    }
}

/// A violation of the cumulative-flow identity on one arc.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("arc {arc}: inflow {inflow} != outflow {outflow} at theta {theta}")]
pub struct IdentityMismatch {
    pub arc: String,
    pub theta: String,
    pub inflow: String,
    pub outflow: String,
}

/// Piecewise-constant inflow into a single fluid queue, simulated on its own.
struct VickreyQueue {
    capacity: Rat,
    start: Rat,
    initial: Rat,
    /// `(from, to, rate)` in local time, contiguous from `start`.
    pieces: Vec<(Rat, Option<Rat>, Rat)>,
}

impl VickreyQueue {
    /// Volume that has left the queue by local time `until`.
    fn served(&self, until: &Rat) -> Rat {
        if until <= &self.start {
            return Rat::zero();
        }
        let mut z = self.initial.clone();
        let mut out = Rat::zero();
        let mut now = self.start.clone();
        let zero = Rat::zero();
        let mut k = 0;
        while &now < until {
            let (rate, piece_end) = match self.pieces.get(k) {
                Some((_, end, r)) => (r, end.clone()),
                None => (&zero, None),
            };
            let stop = match &piece_end {
                Some(e) if e < until => e.clone(),
                _ => until.clone(),
            };
            let span = &stop - &now;
            if z.is_zero() && rate <= &self.capacity {
                out += rate * &span;
            } else if rate >= &self.capacity {
                out += &self.capacity * &span;
                z += (rate - &self.capacity) * &span;
            } else {
                let drain = &z / (&self.capacity - rate);
                if drain >= span {
                    out += &self.capacity * &span;
                    z -= (&self.capacity - rate) * &span;
                } else {
                    out += &self.capacity * &drain + rate * (&span - &drain);
                    z = Rat::zero();
                }
            }
            now = stop;
            if piece_end.as_ref() == Some(&now) {
                k += 1;
            }
        }
        out
    }
}

fn arc_queue(traj: &Trajectory, i: usize) -> Result<VickreyQueue, IdentityMismatch> {
    let inst = &traj.instance;
    let a = &inst.arcs[i];
    let mut pieces = Vec::new();
    for p in &traj.phases {
        let from = p.start.labels[a.tail].clone();
        let slope = &p.label_rates[a.tail];
        let to = p.duration().map(|d| &from + slope * d);
        let x = &p.thin_flow.flows[i];
        if to.as_ref() == Some(&from) || slope.is_zero() {
            if !x.is_zero() {
                return Err(IdentityMismatch {
                    arc: a.id.clone(),
                    theta: to_exact(&p.theta_start),
                    inflow: "point mass".into(),
                    outflow: "-".into(),
                });
            }
            continue;
        }
        pieces.push((from, to, x / slope));
    }
    Ok(VickreyQueue {
        capacity: a.capacity.clone(),
        start: traj.initial.labels[a.tail].clone(),
        initial: a.initial_queue.clone(),
        pieces,
    })
}

/// Checks `ẑ_e(0) + x_e(θ) = S_e(ℓ_w(θ) − τ_e)` on every arc, where `S_e` is
/// the cumulative service of an independently simulated queue fed with the
/// trajectory's inflow rates.
pub fn check_cumulative_identity(traj: &Trajectory, theta: &Rat) -> Result<(), IdentityMismatch> {
    let snap = traj.snapshot_at(theta).ok_or_else(|| IdentityMismatch {
        arc: "-".into(),
        theta: to_exact(theta),
        inflow: "outside simulated range".into(),
        outflow: "-".into(),
    })?;
    let inst = &traj.instance;
    for (i, a) in inst.arcs.iter().enumerate() {
        let q = arc_queue(traj, i)?;
        let inflow = &a.initial_queue + &snap.flows[i];
        let outflow = q.served(&(&snap.labels[a.head] - &a.delay));
        if inflow != outflow {
            return Err(IdentityMismatch {
                arc: a.id.clone(),
                theta: to_exact(theta),
                inflow: to_exact(&inflow),
                outflow: to_exact(&outflow),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchedulePiece {
    pub start: Rat,
    /// `None` for the final, unbounded piece.
    pub end: Option<Rat>,
    pub rate: Rat,
}

/// Arrival rate at the sink as a function of the sink's local time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SinkSchedule {
    pub pieces: Vec<SchedulePiece>,
}

impl SinkSchedule {
    pub fn rate_at(&self, time: &Rat) -> Rat {
        self.pieces
            .iter()
            .find(|p| &p.start <= time && p.end.as_ref().is_none_or(|e| time < e))
            .map_or_else(Rat::zero, |p| p.rate.clone())
    }

    pub fn peak(&self) -> Rat {
        self.pieces.iter().map(|p| p.rate.clone()).max().unwrap_or_else(Rat::zero)
    }
}

/// `u₀ / ℓ′_t` per phase, mapped to sink local time, equal neighbours merged.
pub fn sink_inflow_schedule(traj: &Trajectory) -> SinkSchedule {
    let inst = &traj.instance;
    let t = inst.sink;
    let mut pieces: Vec<SchedulePiece> = Vec::new();
    for p in &traj.phases {
        let slope = &p.label_rates[t];
        let start = p.start.labels[t].clone();
        let end = p.duration().map(|d| &start + slope * d);
        if end.as_ref() == Some(&start) {
            continue;
        }
        let rate = &inst.inflow / slope;
        debug_assert_eq!(
            rate,
            inst.arcs
                .iter()
                .enumerate()
                .filter(|(_, a)| a.head == t)
                .map(|(i, _)| &p.thin_flow.flows[i])
                .sum::<Rat>()
                / slope
        );
        match pieces.last_mut() {
            Some(last) if last.rate == rate => last.end = end,
            _ => pieces.push(SchedulePiece { start, end, rate }),
        }
    }
    SinkSchedule { pieces }
}

/// `Σ_{e into t} x′_e / ℓ′_t` for one phase: the sink arrival rate computed
/// from arc flows instead of the inflow.
pub fn sink_rate_from_flows(inst: &Instance, flows: &[Rat], sink_rate: &Rat) -> Rat {
    let total: Rat = inst
        .arcs
        .iter()
        .zip(flows)
        .filter(|(a, _)| a.head == inst.sink)
        .map(|(_, x)| x.clone())
        .sum();
    total / sink_rate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{frac, int};

    fn single(cap: Rat, delay: Rat, queue: Rat) -> Instance {
        Instance::builder("s", "t", int(1))
            .arc_with_queue("e", "s", "t", cap, delay, queue)
            .build()
            .unwrap()
    }

    #[test]
    fn exit_times() {
        let inst = single(int(1), int(3), int(0));
        assert_eq!(exit_time(&int(0), &int(0), &inst.arcs[0]), int(3));
        let fast = single(frac(1, 4), int(0), int(0));
        assert_eq!(exit_time(&int(2), &frac(1, 2), &fast.arcs[0]), int(4));
    }

    #[test]
    fn initial_labels_include_queue_delay() {
        let snap = initial_labels(&single(int(1), int(3), int(0))).unwrap();
        assert_eq!(snap.labels, vec![int(0), int(3)]);
        let snap = initial_labels(&single(int(1), int(3), int(2))).unwrap();
        assert_eq!(snap.labels, vec![int(0), int(5)]);
        let cls = classify_arcs(&single(int(1), int(3), int(2)), &snap).unwrap();
        assert_eq!(cls.queued, vec![true]);
    }

    #[test]
    fn queue_on_slow_parallel_arc_is_rejected() {
        let inst = Instance::builder("s", "t", int(1))
            .arc("a", "s", "t", int(1), int(1))
            .arc_with_queue("b", "s", "t", int(1), int(2), int(1))
            .build()
            .unwrap();
        assert_eq!(
            initial_labels(&inst),
            Err(DynamicsError::QueueOnInactiveArc("b".into()))
        );
    }

    #[test]
    fn vickrey_queue_drains() {
        let q = VickreyQueue {
            capacity: int(1),
            start: int(0),
            initial: int(0),
            pieces: vec![(int(0), Some(int(2)), int(2)), (int(2), None, int(0))],
        };
        assert_eq!(q.served(&int(1)), int(1));
        assert_eq!(q.served(&int(3)), int(3));
        assert_eq!(q.served(&int(4)), int(4));
        assert_eq!(q.served(&int(9)), int(4));
    }

    #[test]
    fn snapshot_check_catches_unattained_label() {
        let inst = single(int(1), int(3), int(0));
        let mut snap = initial_labels(&inst).unwrap();
        assert!(snap.check(&inst).is_ok());
        snap.labels[1] = int(2);
        assert!(snap.check(&inst).is_err());
    }
}
