//! Self-contained run reports: JSON encoding of a solved trajectory, the
//! invariant checks run by `verify`, and CSV/text renderings.

use crate::dynamics::{
    check_cumulative_identity, sink_inflow_schedule, ArcClassification, Snapshot,
};
use crate::engine::{advance, solve_equilibrium, Limits, Phase, PhaseEnd, Status, Trajectory};
use crate::instance::{min_queuing_cut, Instance, ModelError};
use crate::ntfr::ThinFlow;
use crate::potential::{phi, phi_rate, phi_rate_oracle, pseudo_bounds, PotentialTrace};
use crate::rat::{parse_rat, to_decimal, to_exact, ParseRatError, Rat};
use crate::steady::steady_report;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

pub const FORMAT: &str = "nashflow-report/1";
pub const DECIMAL_DIGITS: usize = 20;

pub const EXIT_STEADY: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_UNBOUNDED: i32 = 2;
pub const EXIT_LIMIT: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("invalid report JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Rat(#[from] ParseRatError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("malformed report: {0}")]
    Malformed(String),
}

/// A number written both exactly and as a truncated decimal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Num {
    pub exact: String,
    pub decimal: String,
}

impl Num {
    pub fn of(r: &Rat) -> Self {
        Num {
            exact: to_exact(r),
            decimal: to_decimal(r, DECIMAL_DIGITS),
        }
    }

    pub fn value(&self) -> Result<Rat, ParseRatError> {
        parse_rat(&self.exact)
    }
}

fn nums(v: &[Rat]) -> Vec<Num> {
    v.iter().map(Num::of).collect()
}

fn values(v: &[Num]) -> Result<Vec<Rat>, ParseRatError> {
    v.iter().map(Num::value).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimitsRecord {
    pub max_phases: usize,
    pub horizon: Option<Num>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRecord {
    pub active: Vec<String>,
    pub queued: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    /// `steady`, `unbounded`, `horizon` or `phase_cap`.
    pub status: String,
    pub exit_code: i32,
    pub phases: usize,
    pub theta_star: Option<Num>,
    pub first_phase_end: Option<Num>,
    /// Last classifications before the phase cap was hit.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub recent: Vec<ClassRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub index: usize,
    pub theta_start: Num,
    pub theta_end: Option<Num>,
    /// `events`, `steady`, `unbounded` or `horizon`.
    pub end: String,
    pub activates: Vec<String>,
    pub depletes: Vec<String>,
    pub active: Vec<String>,
    pub queued: Vec<String>,
    /// Nodes of the pruned thin-flow subnetwork.
    pub subnetwork: Vec<String>,
    /// `ℓ_v(θ_start)` in instance node order.
    pub labels: Vec<Num>,
    /// `ẑ_e(θ_start)` in instance arc order.
    pub queues: Vec<Num>,
    /// `x_e(θ_start)` in instance arc order.
    pub flows: Vec<Num>,
    pub label_rates: Vec<Num>,
    pub flow_rates: Vec<Num>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceRecord {
    /// Sink local time.
    pub start: Num,
    pub end: Option<Num>,
    pub rate: Num,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PotentialRow {
    pub theta: Num,
    pub phi: Num,
    pub rate: Num,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PotentialRecord {
    pub alpha: Option<Num>,
    pub entries: Vec<PotentialRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpRecord {
    pub flows: Vec<Num>,
    pub cost: Num,
    pub distances: Vec<Num>,
    /// Dual queue variables in delay units.
    pub queues: Vec<Num>,
    pub dual_objective: Num,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulatedRecord {
    pub theta_star: Num,
    pub distances: Vec<Num>,
    pub queues: Vec<Num>,
    pub queue_delays: Vec<Num>,
    pub max_queues: Vec<Num>,
    pub objective: Num,
    pub dual_feasible: bool,
    pub dual_optimal: bool,
    pub matches_lp_objective: bool,
    pub flow_optimal: bool,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SteadyRecord {
    pub lp: LpRecord,
    pub simulated: SimulatedRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundsRecord {
    pub k: String,
    pub m: Num,
    pub t: Num,
    pub min_cut: Num,
    pub time_bound: Num,
    pub queue_bound: Num,
    pub observed_theta_star: Option<Num>,
    /// Largest `ẑ_e/ν_e` at any phase boundary.
    pub max_queue_delay: Num,
    /// `None` when the inflow exceeds the min cut and no bound applies.
    pub time_ok: Option<bool>,
    pub queue_ok: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    pub digest: String,
    pub instance: serde_json::Value,
    pub limits: LimitsRecord,
    pub summary: Summary,
    pub phases: Vec<PhaseRecord>,
    pub sink_schedule: Vec<PieceRecord>,
    pub potential: PotentialRecord,
    pub steady: Option<SteadyRecord>,
    pub bounds: BoundsRecord,
}

pub fn exit_code(status: &Status) -> i32 {
    match status {
        Status::SteadyState { .. } => EXIT_STEADY,
        Status::UnboundedGrowth => EXIT_UNBOUNDED,
        Status::HorizonReached | Status::PhaseCapReached { .. } => EXIT_LIMIT,
    }
}

fn status_name(status: &Status) -> &'static str {
    match status {
        Status::SteadyState { .. } => "steady",
        Status::UnboundedGrowth => "unbounded",
        Status::HorizonReached => "horizon",
        Status::PhaseCapReached { .. } => "phase_cap",
    }
}

fn class_record(inst: &Instance, cls: &ArcClassification) -> ClassRecord {
    let ids = |f: Vec<&str>| f.into_iter().map(String::from).collect();
    ClassRecord {
        active: ids(cls.active_ids(inst)),
        queued: ids(cls.queued_ids(inst)),
    }
}

fn arc_names(inst: &Instance, idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&i| inst.arcs[i].id.clone()).collect()
}

fn phase_record(inst: &Instance, p: &Phase) -> PhaseRecord {
    let (end, activates, depletes) = match &p.end {
        PhaseEnd::Events { activates, depletes } => {
            ("events", arc_names(inst, activates), arc_names(inst, depletes))
        }
        PhaseEnd::SteadyState => ("steady", vec![], vec![]),
        PhaseEnd::UnboundedGrowth => ("unbounded", vec![], vec![]),
        PhaseEnd::Horizon => ("horizon", vec![], vec![]),
    };
    let cls = class_record(inst, &p.classification);
    PhaseRecord {
        index: p.index,
        theta_start: Num::of(&p.theta_start),
        theta_end: p.theta_end.as_ref().map(Num::of),
        end: end.into(),
        activates,
        depletes,
        active: cls.active,
        queued: cls.queued,
        subnetwork: p
            .thin_flow
            .labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_some())
            .map(|(v, _)| inst.nodes[v].clone())
            .collect(),
        labels: nums(&p.start.labels),
        queues: nums(&p.start.queues),
        flows: nums(&p.start.flows),
        label_rates: nums(&p.label_rates),
        flow_rates: nums(&p.thin_flow.flows),
    }
}

fn max_queue_delay(traj: &Trajectory) -> Rat {
    let inst = &traj.instance;
    let snaps = std::iter::once(&traj.initial)
        .chain(traj.phases.iter().map(|p| &p.start))
        .cloned()
        .chain(traj.phases.last().and_then(|p| p.theta_end.as_ref()).and_then(|e| traj.snapshot_at(e)));
    snaps
        .flat_map(|s| {
            s.queues
                .iter()
                .zip(&inst.arcs)
                .map(|(z, a)| z / &a.capacity)
                .collect::<Vec<_>>()
        })
        .max()
        .unwrap_or_else(Rat::zero)
}

impl RunReport {
    pub fn build(traj: &Trajectory, limits: &Limits) -> Self {
        let inst = &traj.instance;
        let trace = PotentialTrace::of(traj);
        let steady = steady_report(traj).ok().map(|r| SteadyRecord {
            lp: LpRecord {
                flows: nums(&r.lp_flow.flows),
                cost: Num::of(&r.lp_flow.cost),
                distances: nums(&r.lp_dual.distances),
                queues: nums(&r.lp_dual.queues),
                dual_objective: Num::of(&r.lp_dual.objective),
            },
            simulated: SimulatedRecord {
                theta_star: Num::of(&r.theta_star),
                distances: nums(&r.distances),
                queues: nums(&r.queues),
                queue_delays: nums(&r.queue_delays),
                max_queues: nums(&r.max_queues),
                objective: Num::of(&r.simulated_objective),
                dual_feasible: r.dual_feasible,
                dual_optimal: r.dual_optimal,
                matches_lp_objective: r.matches_lp_objective,
                flow_optimal: r.flow_optimal,
                violations: r.violations.clone(),
            },
        });
        let b = pseudo_bounds(inst);
        let cut = min_queuing_cut(inst).capacity;
        let bounded = inst.inflow <= cut;
        let delay = max_queue_delay(traj);
        let recent = match &traj.status {
            Status::PhaseCapReached { recent } => recent.iter().map(|c| class_record(inst, c)).collect(),
            _ => vec![],
        };
        RunReport {
            format: FORMAT.into(),
            digest: inst.digest(),
            instance: inst.to_json(),
            limits: LimitsRecord {
                max_phases: limits.max_phases,
                horizon: limits.horizon.as_ref().map(Num::of),
            },
            summary: Summary {
                status: status_name(&traj.status).into(),
                exit_code: exit_code(&traj.status),
                phases: traj.phases.len(),
                theta_star: traj.steady_time().map(Num::of),
                first_phase_end: traj.phases.first().and_then(|p| p.theta_end.as_ref()).map(Num::of),
                recent,
            },
            phases: traj.phases.iter().map(|p| phase_record(inst, p)).collect(),
            sink_schedule: sink_inflow_schedule(traj)
                .pieces
                .iter()
                .map(|p| PieceRecord {
                    start: Num::of(&p.start),
                    end: p.end.as_ref().map(Num::of),
                    rate: Num::of(&p.rate),
                })
                .collect(),
            potential: PotentialRecord {
                alpha: trace.alpha.as_ref().map(Num::of),
                entries: trace
                    .entries
                    .iter()
                    .map(|e| PotentialRow {
                        theta: Num::of(&e.theta_start),
                        phi: Num::of(&e.phi),
                        rate: Num::of(&e.rate),
                    })
                    .collect(),
            },
            steady,
            bounds: BoundsRecord {
                k: b.k.to_string(),
                m: Num::of(&b.m),
                t: Num::of(&b.t),
                min_cut: Num::of(&cut),
                observed_theta_star: traj.steady_time().map(Num::of),
                max_queue_delay: Num::of(&delay),
                time_ok: (bounded && traj.steady_time().is_some())
                    .then(|| traj.steady_time().unwrap() <= &b.time_bound),
                queue_ok: bounded.then(|| delay <= b.queue_bound),
                time_bound: Num::of(&b.time_bound),
                queue_bound: Num::of(&b.queue_bound),
            },
        }
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Self, ReportError> {
        let r: RunReport = serde_json::from_str(text)?;
        if r.format != FORMAT {
            return Err(ReportError::Malformed(format!("unknown format {:?}", r.format)));
        }
        Ok(r)
    }

    pub fn instance(&self) -> Result<Instance, ReportError> {
        Ok(Instance::from_json(self.instance.clone())?)
    }

    /// Rebuilds the trajectory from the stored phase table.
    pub fn trajectory(&self) -> Result<Trajectory, ReportError> {
        let inst = self.instance()?;
        let bad = |m: String| ReportError::Malformed(m);
        let arc_set = |ids: &[String]| -> Result<Vec<bool>, ReportError> {
            let mut v = vec![false; inst.arcs.len()];
            for id in ids {
                v[inst.arc_index(id).ok_or_else(|| bad(format!("unknown arc {id}")))?] = true;
            }
            Ok(v)
        };
        let arc_list = |ids: &[String]| -> Result<Vec<usize>, ReportError> {
            ids.iter()
                .map(|id| inst.arc_index(id).ok_or_else(|| bad(format!("unknown arc {id}"))))
                .collect()
        };
        let mut phases = Vec::with_capacity(self.phases.len());
        for r in &self.phases {
            let n = inst.nodes.len();
            let m = inst.arcs.len();
            let lens = [r.labels.len(), r.label_rates.len(), r.queues.len(), r.flows.len(), r.flow_rates.len()];
            if lens != [n, n, m, m, m] {
                return Err(bad(format!("phase {} has columns of the wrong length", r.index)));
            }
            let theta_start = r.theta_start.value()?;
            let label_rates = values(&r.label_rates)?;
            let mut in_sub = vec![false; n];
            for v in &r.subnetwork {
                in_sub[inst.node_index(v).ok_or_else(|| bad(format!("unknown node {v}")))?] = true;
            }
            let end = match r.end.as_str() {
                "events" => PhaseEnd::Events {
                    activates: arc_list(&r.activates)?,
                    depletes: arc_list(&r.depletes)?,
                },
                "steady" => PhaseEnd::SteadyState,
                "unbounded" => PhaseEnd::UnboundedGrowth,
                "horizon" => PhaseEnd::Horizon,
                other => return Err(bad(format!("unknown phase end {other:?}"))),
            };
            phases.push(Phase {
                index: r.index,
                start: Snapshot {
                    theta: theta_start.clone(),
                    labels: values(&r.labels)?,
                    queues: values(&r.queues)?,
                    flows: values(&r.flows)?,
                },
                theta_start,
                theta_end: r.theta_end.as_ref().map(Num::value).transpose()?,
                classification: ArcClassification {
                    active: arc_set(&r.active)?,
                    queued: arc_set(&r.queued)?,
                },
                thin_flow: ThinFlow {
                    labels: label_rates
                        .iter()
                        .zip(&in_sub)
                        .map(|(l, &s)| s.then(|| l.clone()))
                        .collect(),
                    flows: values(&r.flow_rates)?,
                },
                label_rates,
                end,
            });
        }
        let status = match self.summary.status.as_str() {
            "steady" => Status::SteadyState {
                theta: self
                    .summary
                    .theta_star
                    .as_ref()
                    .ok_or_else(|| bad("steady report without theta_star".into()))?
                    .value()?,
            },
            "unbounded" => Status::UnboundedGrowth,
            "horizon" => Status::HorizonReached,
            "phase_cap" => Status::PhaseCapReached {
                recent: self
                    .summary
                    .recent
                    .iter()
                    .map(|c| {
                        Ok(ArcClassification {
                            active: arc_set(&c.active)?,
                            queued: arc_set(&c.queued)?,
                        })
                    })
                    .collect::<Result<_, ReportError>>()?,
            },
            other => return Err(bad(format!("unknown status {other:?}"))),
        };
        let initial = phases
            .first()
            .map(|p: &Phase| p.start.clone())
            .ok_or_else(|| bad("report has no phases".into()))?;
        Ok(Trajectory {
            instance: inst,
            initial,
            phases,
            status,
        })
    }

    pub fn limits(&self) -> Result<Limits, ReportError> {
        Ok(Limits {
            max_phases: self.limits.max_phases,
            horizon: self.limits.horizon.as_ref().map(Num::value).transpose()?,
        })
    }
}

/// One failed invariant, named by module and invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub module: &'static str,
    pub invariant: &'static str,
    pub detail: String,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}: {}", self.module, self.invariant, self.detail)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Verification {
    pub failures: Vec<Failure>,
    pub checks: usize,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn check(&mut self, ok: bool, module: &'static str, invariant: &'static str, detail: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(Failure {
                module,
                invariant,
                detail: detail(),
            });
        }
    }
}

fn decimals_agree(value: &serde_json::Value, path: &str, out: &mut Vec<String>) {
    match value {
        serde_json::Value::Object(map) => {
            if let (Some(e), Some(d), 2) = (map.get("exact"), map.get("decimal"), map.len()) {
                let expected = e
                    .as_str()
                    .and_then(|s| parse_rat(s).ok())
                    .map(|r| to_decimal(&r, DECIMAL_DIGITS));
                if expected.as_deref() != d.as_str() {
                    out.push(path.to_string());
                }
                return;
            }
            for (k, v) in map {
                decimals_agree(v, &format!("{path}.{k}"), out);
            }
        }
        serde_json::Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                decimals_agree(v, &format!("{path}[{i}]"), out);
            }
        }
        _ => {}
    }
}

/// Runs every invariant suite on a stored report and re-solves the embedded
/// instance to confirm the stored trajectory.
pub fn verify_report(report: &RunReport) -> Result<Verification, ReportError> {
    let mut v = Verification::default();
    let traj = report.trajectory()?;
    let inst = &traj.instance;

    v.check(inst.digest() == report.digest, "report", "digest", || {
        format!("stored {} but instance hashes to {}", report.digest, inst.digest())
    });
    let mut bad_decimals = Vec::new();
    decimals_agree(&serde_json::to_value(report)?, "$", &mut bad_decimals);
    v.check(bad_decimals.is_empty(), "report", "decimal columns", || bad_decimals.join(", "));

    for w in traj.phases.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        let reached = p.duration().and_then(|d| {
            advance(inst, &p.start, &p.classification, &p.label_rates, &p.thin_flow.flows, &d).ok()
        });
        v.check(reached.as_ref() == Some(&q.start), "dynamics", "phase continuity", || {
            format!("phase {} does not advance to the start of phase {}", p.index, q.index)
        });
    }
    for p in &traj.phases {
        v.check(p.start.check(inst).is_ok(), "dynamics", "snapshot consistency", || {
            format!("phase {} start state", p.index)
        });
    }

    let entries = &report.potential.entries;
    v.check(entries.len() == traj.phases.len(), "potential", "phi telescoping", || {
        "potential trace length differs from the phase table".into()
    });
    let mut stored = Vec::new();
    for e in entries {
        stored.push((e.theta.value()?, e.phi.value()?, e.rate.value()?));
    }
    for (p, (theta, phi_s, rate_s)) in traj.phases.iter().zip(&stored) {
        let rate = phi_rate(inst, &p.classification, &p.label_rates, &p.thin_flow.flows);
        let oracle = phi_rate_oracle(inst, &p.classification, &p.label_rates, &p.thin_flow.flows);
        v.check(theta == &p.theta_start && phi_s == &phi(inst, &p.start), "potential", "phi telescoping", || {
            format!("phi at phase {} does not match the stored state", p.index)
        });
        v.check(rate_s == &rate && rate == oracle, "potential", "phi rate", || {
            format!("phase {}: stored {}, recomputed {}, oracle {}", p.index, to_exact(rate_s), to_exact(&rate), to_exact(&oracle))
        });
        v.check(rate_s >= &Rat::zero(), "potential", "monotonicity", || {
            format!("phase {} has rate {}", p.index, to_exact(rate_s))
        });
        if p.is_steady() {
            v.check(rate_s.is_zero(), "potential", "monotonicity", || {
                format!("steady phase {} has nonzero rate", p.index)
            });
        }
    }
    for (w, p) in stored.windows(2).zip(&traj.phases) {
        let ((t0, f0, r0), (t1, f1, _)) = (&w[0], &w[1]);
        v.check(f1 == &(f0 + r0 * (t1 - t0)), "potential", "phi telescoping", || {
            format!("phi jumps between phases {} and {}", p.index, p.index + 1)
        });
    }
    if let Some(alpha) = &report.potential.alpha {
        let alpha = alpha.value()?;
        for (_, f, _) in &stored {
            v.check(f <= &alpha, "potential", "phi below optimum", || {
                format!("phi {} exceeds {}", to_exact(f), to_exact(&alpha))
            });
        }
    }

    for p in &traj.phases {
        if let Some(end) = &p.theta_end {
            let r = check_cumulative_identity(&traj, end);
            v.check(r.is_ok(), "dynamics", "cumulative identity", || r.unwrap_err().to_string());
        }
    }

    match (&report.steady, steady_report(&traj)) {
        (Some(s), Ok(r)) => {
            v.check(r.passes(), "steady", "LP complementarity", || r.violations.join("; "));
            let lp_cost = s.lp.cost.value()?;
            v.check(
                lp_cost == s.lp.dual_objective.value()? && lp_cost == r.lp_flow.cost,
                "steady",
                "LP duality",
                || "primal cost differs from the dual objective".into(),
            );
            v.check(values(&s.simulated.queues)? == r.queues, "steady", "steady queues", || {
                "stored steady queues differ from the phase table".into()
            });
        }
        (None, Err(_)) => {}
        (Some(_), Err(e)) => v.check(false, "steady", "LP complementarity", || e.to_string()),
        (None, Ok(_)) => v.check(false, "steady", "LP complementarity", || "steady block missing".into()),
    }

    let b = pseudo_bounds(inst);
    v.check(
        report.bounds.time_bound.value()? == b.time_bound && report.bounds.queue_bound.value()? == b.queue_bound,
        "potential",
        "bounds",
        || "stored bounds differ from the instance".into(),
    );
    let delay = max_queue_delay(&traj);
    if inst.inflow <= min_queuing_cut(inst).capacity {
        if let Some(theta) = traj.steady_time() {
            v.check(theta <= &b.time_bound, "potential", "bounds", || {
                format!("steady at {} beyond {}", to_exact(theta), to_exact(&b.time_bound))
            });
        }
        v.check(delay <= b.queue_bound, "potential", "bounds", || {
            format!("waiting time {} beyond {}", to_exact(&delay), to_exact(&b.queue_bound))
        });
    }

    match solve_equilibrium(inst, &report.limits()?) {
        Ok(fresh) => {
            let again = RunReport::build(&fresh, &report.limits()?);
            v.check(&again == report, "engine", "reproduction", || {
                "re-solving the embedded instance gives a different report".into()
            });
        }
        Err(e) => v.check(false, "engine", "reproduction", || e.to_string()),
    }
    Ok(v)
}

fn csv_row(w: &mut csv::Writer<Vec<u8>>, row: &[String]) {
    w.write_record(row).expect("in-memory CSV write");
}

/// Plot tables: sink outflow against sink local time, then potential, labels
/// and queues against source time `θ`.
pub fn render_csv(report: &RunReport) -> Result<String, ReportError> {
    let inst = report.instance()?;
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    let opt = |n: &Option<Num>| n.as_ref().map_or(("inf".to_string(), "inf".to_string()), |n| (n.exact.clone(), n.decimal.clone()));
    csv_row(&mut w, &["table".into(), "sink_time_start".into(), "sink_time_start_decimal".into(), "sink_time_end".into(), "sink_time_end_decimal".into(), "outflow_rate".into(), "outflow_rate_decimal".into()]);
    for p in &report.sink_schedule {
        let (e, ed) = opt(&p.end);
        csv_row(&mut w, &["sink_outflow".into(), p.start.exact.clone(), p.start.decimal.clone(), e, ed, p.rate.exact.clone(), p.rate.decimal.clone()]);
    }
    csv_row(&mut w, &["table".into(), "theta".into(), "theta_decimal".into(), "phi".into(), "phi_decimal".into(), "phi_rate".into(), "phi_rate_decimal".into()]);
    for e in &report.potential.entries {
        csv_row(&mut w, &["potential".into(), e.theta.exact.clone(), e.theta.decimal.clone(), e.phi.exact.clone(), e.phi.decimal.clone(), e.rate.exact.clone(), e.rate.decimal.clone()]);
    }
    let mut head = vec!["table".to_string(), "theta".into(), "theta_decimal".into()];
    head.extend(inst.nodes.iter().map(|n| format!("label:{n}")));
    head.extend(inst.arcs.iter().map(|a| format!("queue:{}", a.id)));
    csv_row(&mut w, &head);
    for p in &report.phases {
        let mut row = vec!["state".to_string(), p.theta_start.exact.clone(), p.theta_start.decimal.clone()];
        row.extend(p.labels.iter().map(|n| n.decimal.clone()));
        row.extend(p.queues.iter().map(|n| n.decimal.clone()));
        csv_row(&mut w, &row);
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Malformed(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV is UTF-8"))
}

/// Human-readable phase table and summary.
pub fn render_text(report: &RunReport) -> Result<String, ReportError> {
    let inst = report.instance()?;
    let s = &report.summary;
    let mut out = String::new();
    let _ = writeln!(out, "instance {} ({} nodes, {} arcs)", &report.digest[..16], inst.nodes.len(), inst.arcs.len());
    let _ = write!(out, "status {} after {} phases", s.status, s.phases);
    if let Some(t) = &s.theta_star {
        let _ = write!(out, ", steady from theta = {}", t.exact);
    }
    out.push('\n');
    let _ = writeln!(out, "{:>5}  {:>24}  {:>24}  {:>14}  {:>14}  end", "phase", "theta_start", "theta_end", "sink rate", "phi rate");
    for (p, e) in report.phases.iter().zip(&report.potential.entries) {
        let sink_rate = &p.label_rates[inst.sink];
        let ends = match p.end.as_str() {
            "events" => {
                let mut parts = Vec::new();
                if !p.activates.is_empty() {
                    parts.push(format!("activates {}", p.activates.join(",")));
                }
                if !p.depletes.is_empty() {
                    parts.push(format!("depletes {}", p.depletes.join(",")));
                }
                parts.join("; ")
            }
            other => other.to_string(),
        };
        let _ = writeln!(
            out,
            "{:>5}  {:>24}  {:>24}  {:>14}  {:>14}  {}",
            p.index,
            p.theta_start.exact,
            p.theta_end.as_ref().map_or("inf", |n| &n.exact),
            sink_rate.exact,
            e.rate.exact,
            ends
        );
    }
    let _ = writeln!(out, "sink outflow (sink local time):");
    for p in &report.sink_schedule {
        let _ = writeln!(out, "  [{}, {}) rate {}", p.start.exact, p.end.as_ref().map_or("inf", |n| &n.exact), p.rate.exact);
    }
    if let Some(st) = &report.steady {
        let _ = writeln!(out, "steady-state LP optimum {}, simulated objective {}", st.lp.cost.exact, st.simulated.objective.exact);
    }
    let b = &report.bounds;
    let _ = writeln!(
        out,
        "bounds: K = {}, time bound {}, waiting-time bound {}, max waiting time {}",
        b.k, b.time_bound.decimal, b.queue_bound.decimal, b.max_queue_delay.decimal
    );
    Ok(out)
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

    fn report() -> RunReport {
        let limits = Limits::default();
        RunReport::build(&solve_equilibrium(&example_one(), &limits).unwrap(), &limits)
    }

    #[test]
    fn roundtrip_and_verify() {
        let r = report();
        assert_eq!(r.summary.exit_code, EXIT_STEADY);
        assert_eq!(r.summary.theta_star, Some(Num::of(&int(4))));
        let back = RunReport::parse(&r.to_json_string()).unwrap();
        assert_eq!(back, r);
        let v = verify_report(&back).unwrap();
        assert!(v.passed(), "{:?}", v.failures);
    }

    #[test]
    fn tampered_phi_is_named() {
        let mut r = report();
        r.potential.entries[1].phi = Num::of(&frac(1, 7));
        let v = verify_report(&r).unwrap();
        assert!(v.failures.iter().any(|f| f.invariant == "phi telescoping"));
    }

    #[test]
    fn tampered_decimal_is_named() {
        let mut r = report();
        r.phases[0].labels[1].decimal = "2.5".into();
        let v = verify_report(&r).unwrap();
        assert!(v.failures.iter().any(|f| f.invariant == "decimal columns"));
    }

    #[test]
    fn renderings() {
        let r = report();
        let csv = render_csv(&r).unwrap();
        assert!(csv.starts_with("table,sink_time_start"));
        assert!(csv.contains("sink_outflow,0,0,3,3,1/3,"));
        let text = render_text(&r).unwrap();
        assert!(text.contains("steady from theta = 4"));
    }
}
