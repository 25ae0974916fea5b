//! Generators for the instance families: the three-node example network, its
//! steady-queue extension, the pulse chain, damper, exponential-phase gadget,
//! and the two-link lower-bound instance.

use crate::dynamics::sink_inflow_schedule;
use crate::engine::{solve_equilibrium, Limits, Status, Trajectory};
use crate::instance::{Instance, ModelError};
use crate::rat::{frac, int, pow, to_exact, Rat};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use std::collections::BTreeMap;

/// Amplification factor of one pulse stage.
pub fn lambda() -> Rat {
    frac(13, 12)
}

#[derive(Debug, thiserror::Error)]
pub enum GadgetError {
    #[error("parameter {0} must be positive")]
    NonPositive(&'static str),
    #[error("constant C = {given} is below the minimum {minimum} for d = {d}")]
    ConstantTooSmall { d: u32, given: String, minimum: String },
    #[error("damper calibration failed: {0}")]
    Calibration(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn positive(name: &'static str, r: &Rat) -> Result<(), GadgetError> {
    if r > &Rat::zero() {
        Ok(())
    } else {
        Err(GadgetError::NonPositive(name))
    }
}

fn count(name: &'static str, n: u32) -> Result<(), GadgetError> {
    if n > 0 {
        Ok(())
    } else {
        Err(GadgetError::NonPositive(name))
    }
}

pub fn example_one(u: &Rat, tau: &Rat) -> Result<Instance, GadgetError> {
    positive("u", u)?;
    positive("tau", tau)?;
    Ok(Instance::builder("s", "t", u.clone())
        .node("v")
        .arc("e", "s", "t", u / int(3), tau.clone())
        .arc("f", "s", "v", u * frac(3, 4), int(0))
        .arc("g", "v", "t", u / int(3), int(0))
        .arc("h", "v", "t", u.clone(), tau.clone())
        .meta("gadget", "example_one")
        .meta("u", to_exact(u))
        .meta("tau", to_exact(tau))
        .build()?)
}

/// The example network with `u = 1`, `τ = 2`, followed by two parallel arcs
/// `a` (capacity 2/3, delay 0) and `b` (capacity `nu_b`, delay 1) into a new
/// sink.
pub fn example_three(nu_b: Option<&Rat>) -> Result<Instance, GadgetError> {
    let nu_b = nu_b.cloned().unwrap_or_else(|| frac(1, 3));
    positive("nu_b", &nu_b)?;
    let mut b = Instance::builder("s", "t_hat", int(1)).node("t").node("v");
    let base = example_one(&int(1), &int(2))?;
    for a in &base.arcs {
        b = b.arc(&a.id, &base.nodes[a.tail], &base.nodes[a.head], a.capacity.clone(), a.delay.clone());
    }
    Ok(b.arc("a", "t", "t_hat", frac(2, 3), int(0))
        .arc("b", "t", "t_hat", nu_b.clone(), int(1))
        .meta("gadget", "example_three")
        .meta("nu_b", to_exact(&nu_b))
        .build()?)
}

/// The example network with `τ = 5ρ/6` followed by arcs `e'` (capacity `u`,
/// delay `ρ/4`) and `f'` (capacity `u/3`, delay 0) into a new sink `t'`.
pub fn figure_chain(u: &Rat, rho: &Rat) -> Result<Instance, GadgetError> {
    positive("u", u)?;
    positive("rho", rho)?;
    let tau = rho * frac(5, 6);
    Ok(Instance::builder("s", "t'", u.clone())
        .node("t")
        .node("v")
        .arc("e", "s", "t", u / int(3), tau.clone())
        .arc("f", "s", "v", u * frac(3, 4), int(0))
        .arc("g", "v", "t", u / int(3), int(0))
        .arc("h", "v", "t", u.clone(), tau)
        .arc("e'", "t", "t'", u.clone(), rho / int(4))
        .arc("f'", "t", "t'", u / int(3), int(0))
        .meta("gadget", "figure_chain")
        .meta("u", to_exact(u))
        .meta("rho", to_exact(rho))
        .build()?)
}

/// Joins `parts` in series, identifying each sink with the next source.
/// Node `x` and arc `a` of part `i` (from 1) become `"{i}.x"` and `"{i}.a"`;
/// a junction node takes the name it has in the later part.
pub fn series_chain(parts: &[Instance]) -> Result<Instance, GadgetError> {
    assert!(!parts.is_empty(), "series_chain needs at least one part");
    let name = |i: usize, x: &str| format!("{}.{x}", i + 1);
    let node_name = |i: usize, v: usize| -> String {
        let p = &parts[i];
        if v == p.sink && i + 1 < parts.len() {
            name(i + 1, &parts[i + 1].nodes[parts[i + 1].source])
        } else {
            name(i, &p.nodes[v])
        }
    };
    let last = parts.len() - 1;
    let mut b = Instance::builder(
        &node_name(0, parts[0].source),
        &node_name(last, parts[last].sink),
        parts[0].inflow.clone(),
    );
    for (i, p) in parts.iter().enumerate() {
        for v in 0..p.nodes.len() {
            b = b.node(&node_name(i, v));
        }
    }
    for (i, p) in parts.iter().enumerate() {
        for a in &p.arcs {
            b = b.arc_with_queue(
                &name(i, &a.id),
                &node_name(i, a.tail),
                &node_name(i, a.head),
                a.capacity.clone(),
                a.delay.clone(),
                a.initial_queue.clone(),
            );
        }
    }
    Ok(b.meta("gadget", "series").build()?)
}

pub fn series_compose(g: &Instance, h: &Instance) -> Result<Instance, GadgetError> {
    series_chain(&[g.clone(), h.clone()])
}

/// `(21/8)((5/3)^k − 1)`: start of the amplified outflow, in units of `ρ`.
pub fn pulse_alpha(k: u32) -> Rat {
    frac(21, 8) * (pow(&frac(5, 3), k) - int(1))
}

/// `k` chained stages; stage `j` is `figure_chain(λ^{j−1}u, (5/3)^{k−j}ρ)`.
pub fn pulse(u: &Rat, k: u32, rho: &Rat) -> Result<Instance, GadgetError> {
    count("k", k)?;
    positive("u", u)?;
    positive("rho", rho)?;
    let stages = (1..=k)
        .map(|j| figure_chain(&(u * pow(&lambda(), j - 1)), &(rho * pow(&frac(5, 3), k - j))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut inst = if k == 1 {
        stages.into_iter().next().unwrap()
    } else {
        series_chain(&stages)?
    };
    inst.metadata = BTreeMap::from([
        ("gadget".into(), "pulse".into()),
        ("u".into(), to_exact(u)),
        ("k".into(), k.to_string()),
        ("rho".into(), to_exact(rho)),
        ("alpha".into(), to_exact(&pulse_alpha(k))),
    ]);
    Ok(inst)
}

/// Measured timing of a damper built from an uncalibrated sub-instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DamperTiming {
    /// Bypass delay: the travel time through the pulse side at `theta_c`.
    pub tau_f: Rat,
    /// Source time at which the bypass becomes active.
    pub theta_c: Rat,
    /// Sink time at which the unit pulse starts.
    pub theta_1: Rat,
    /// Sink time at which the damped outflow `λ^{−k}` starts.
    pub damped_start: Rat,
    /// Sink time at which the outflow returns to 1.
    pub theta_2: Rat,
}

fn damper_parts(k: u32, rho: &Rat) -> Result<Instance, GadgetError> {
    let low = pow(&lambda(), k).recip();
    let p = pulse(&low, k, rho)?;
    let mut b = Instance::builder("s", "t", int(1));
    let pn = |x: &str| format!("p.{x}");
    for v in &p.nodes {
        b = b.node(&pn(v));
    }
    b = b.arc("e", "s", &pn(&p.nodes[p.source]), low.clone(), int(0));
    for a in &p.arcs {
        b = b.arc(&pn(&a.id), &pn(&p.nodes[a.tail]), &pn(&p.nodes[a.head]), a.capacity.clone(), a.delay.clone());
    }
    Ok(b.arc("g", &pn(&p.nodes[p.sink]), "t", int(1), int(0)).build()?)
}

/// Simulates the damper without its bypass and picks the bypass delay so the
/// bypass opens once the damped outflow has lasted `ρ`, the pulse-side
/// travel time exceeds every earlier value, and the outflow returns to 1
/// strictly later than `θ₁ + 2ρ`.
pub fn calibrate_damper(sub: &Trajectory, rho: &Rat, low: &Rat) -> Result<DamperTiming, GadgetError> {
    let fail = |m: &str| GadgetError::Calibration(m.to_string());
    if sub.status != Status::UnboundedGrowth {
        return Err(fail("sub-instance did not settle into linear queue growth"));
    }
    let inst = &sub.instance;
    let t = inst.sink;
    let sched = sink_inflow_schedule(sub);
    let last = sched.pieces.last().ok_or_else(|| fail("empty outflow schedule"))?;
    if &last.rate != low {
        return Err(fail("final outflow differs from the damped rate"));
    }
    let damped_start = last.start.clone();
    let theta_1 = sched
        .pieces
        .iter()
        .find(|p| p.rate.is_one())
        .map(|p| p.start.clone())
        .ok_or_else(|| fail("no unit pulse"))?;
    let fin = sub.phases.last().unwrap();
    let slope = &fin.label_rates[t];
    let delay_at = |theta: &Rat| -> Rat {
        &fin.start.labels[t] + slope * (theta - &fin.theta_start) - theta
    };
    let d_max = sub
        .phases
        .iter()
        .map(|p| &p.start.labels[t] - &p.theta_start)
        .max()
        .unwrap();
    let growth = slope - int(1);
    if growth <= Rat::zero() {
        return Err(fail("pulse-side delay does not grow"));
    }
    let by_length = &fin.theta_start + (&damped_start + rho - &fin.start.labels[t]) / slope;
    let by_delay = &fin.theta_start + (&d_max - delay_at(&fin.theta_start)) / &growth;
    let mut theta_c = [fin.theta_start.clone(), by_length, by_delay]
        .into_iter()
        .max()
        .unwrap();
    if delay_at(&theta_c) <= d_max {
        theta_c += rho;
    }
    if &theta_c + delay_at(&theta_c) <= &theta_1 + rho * int(2) {
        theta_c += rho;
    }
    let tau_f = delay_at(&theta_c);
    let theta_2 = &theta_c + &tau_f;
    Ok(DamperTiming {
        tau_f,
        theta_c,
        theta_1,
        damped_start,
        theta_2,
    })
}

/// Entry arc `e` (capacity `λ^{−k}`) into `pulse(λ^{−k}, k, ρ)`, exit arc `g`
/// (capacity 1) to the sink, and a bypass `f` (capacity 1) whose delay is
/// calibrated by simulation.
pub fn damper(k: u32, rho: &Rat) -> Result<Instance, GadgetError> {
    count("k", k)?;
    positive("rho", rho)?;
    let low = pow(&lambda(), k).recip();
    let sub = damper_parts(k, rho)?;
    let traj = solve_equilibrium(&sub, &Limits::default())
        .map_err(|e| GadgetError::Calibration(e.to_string()))?;
    let timing = calibrate_damper(&traj, rho, &low)?;
    let mut b = Instance::builder("s", "t", int(1));
    for v in &sub.nodes {
        b = b.node(v);
    }
    let mut arcs = sub.arcs.clone();
    let g = arcs.pop().unwrap();
    for a in &arcs {
        b = b.arc(&a.id, &sub.nodes[a.tail], &sub.nodes[a.head], a.capacity.clone(), a.delay.clone());
    }
    b = b
        .arc("f", "s", "t", int(1), timing.tau_f.clone())
        .arc(&g.id, &sub.nodes[g.tail], &sub.nodes[g.head], g.capacity.clone(), g.delay.clone());
    Ok(b.meta("gadget", "damper")
        .meta("k", k.to_string())
        .meta("rho", to_exact(rho))
        .meta("tau_f", to_exact(&timing.tau_f))
        .meta("theta_c", to_exact(&timing.theta_c))
        .meta("theta_1", to_exact(&timing.theta_1))
        .meta("damped_start", to_exact(&timing.damped_start))
        .meta("theta_2", to_exact(&timing.theta_2))
        .build()?)
}

/// Least power of two `C` with `C^{j−1} ≥ 2(10j)^4·12^{30j}` for all
/// `2 ≤ j ≤ d`; 1 for `d = 1`.
pub fn minimum_constant(d: u32) -> BigInt {
    let mut best = BigInt::one();
    for j in 2..=d {
        let need = BigInt::from(2) * num_traits::pow(BigInt::from(10 * j), 4) * num_traits::pow(BigInt::from(12), (30 * j) as usize);
        let mut c = BigInt::one();
        while num_traits::pow(c.clone(), (j - 1) as usize) < need {
            c *= 2;
        }
        best = best.max(c);
    }
    best
}

/// Two parallel arcs for `d = 1`; otherwise `damper(15d, C^{(d−1)²})`
/// followed in series by `exponential(d − 1)`.
pub fn exponential(d: u32, c: Option<&BigInt>) -> Result<Instance, GadgetError> {
    count("d", d)?;
    let minimum = minimum_constant(d);
    let c = c.cloned().unwrap_or_else(|| minimum.clone());
    if c < minimum {
        return Err(GadgetError::ConstantTooSmall {
            d,
            given: c.to_string(),
            minimum: minimum.to_string(),
        });
    }
    let mut inst = if d == 1 {
        Instance::builder("s", "t", int(1))
            .arc("a", "s", "t", frac(1, 3), int(0))
            .arc("b", "s", "t", frac(2, 3), int(1))
            .build()?
    } else {
        let rho = Rat::from_integer(num_traits::pow(c.clone(), ((d - 1) * (d - 1)) as usize));
        let g = damper(15 * d, &rho)?;
        let h = exponential(d - 1, Some(&c))?;
        let mut joined = series_chain(&[g.clone(), h])?;
        for (key, value) in &g.metadata {
            if key != "gadget" {
                joined.metadata.insert(format!("damper.{key}"), value.clone());
            }
        }
        joined
    };
    inst.metadata.insert("gadget".into(), "exponential".into());
    inst.metadata.insert("d".into(), d.to_string());
    inst.metadata.insert("C".into(), c.to_string());
    Ok(inst)
}

/// Arcs of capacity `1 − 2^{−L}` (delay 0) and 1 (delay 1), inflow 1.
pub fn two_link(l: u32) -> Result<Instance, GadgetError> {
    count("L", l)?;
    let short = int(1) - pow(&frac(1, 2), l);
    Ok(Instance::builder("s", "t", int(1))
        .arc("short", "s", "t", short, int(0))
        .arc("long", "s", "t", int(1), int(1))
        .meta("gadget", "two_link")
        .meta("L", l.to_string())
        .build()?)
}

/// Every generator with its parameters, for the command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GadgetSpec {
    ExampleOne { u: Rat, tau: Rat },
    ExampleThree { nu_b: Option<Rat> },
    FigureChain { u: Rat, rho: Rat },
    Pulse { u: Rat, k: u32, rho: Rat },
    Damper { k: u32, rho: Rat },
    Exponential { d: u32, c: Option<BigInt> },
    TwoLink { l: u32 },
}

impl GadgetSpec {
    pub fn generate(&self) -> Result<Instance, GadgetError> {
        match self {
            GadgetSpec::ExampleOne { u, tau } => example_one(u, tau),
            GadgetSpec::ExampleThree { nu_b } => example_three(nu_b.as_ref()),
            GadgetSpec::FigureChain { u, rho } => figure_chain(u, rho),
            GadgetSpec::Pulse { u, k, rho } => pulse(u, *k, rho),
            GadgetSpec::Damper { k, rho } => damper(*k, rho),
            GadgetSpec::Exponential { d, c } => exponential(*d, c.as_ref()),
            GadgetSpec::TwoLink { l } => two_link(*l),
        }
    }
}
