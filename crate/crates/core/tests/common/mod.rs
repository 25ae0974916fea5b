#![allow(dead_code)]

use nashflow::gadgets::{damper, example_one, example_three, exponential, figure_chain, pulse, two_link};
use nashflow::instance::{validate, Instance};
use nashflow::ntfr::ThinFlowProblem;
use nashflow::rat::{frac, int, Rat};
use rand::Rng;

/// Example 1 with `u = 1`, `τ = 2`, started from its steady-state queue on `g`.
pub fn steady_start() -> Instance {
    let mut inst = example_one(&int(1), &int(2)).unwrap();
    let g = inst.arc_index("g").unwrap();
    inst.arcs[g].initial_queue = frac(2, 3);
    inst
}

/// Instances with `u₀ ≤ ν̄` used by the catalog-wide checks.
pub fn catalog() -> Vec<(&'static str, Instance)> {
    vec![
        ("example_one(1,2)", example_one(&int(1), &int(2)).unwrap()),
        ("example_one(12,1)", example_one(&int(12), &int(1)).unwrap()),
        ("example_one steady start", steady_start()),
        ("example_three", example_three(None).unwrap()),
        ("example_three nu_b=103/300", example_three(Some(&frac(103, 300))).unwrap()),
        ("figure_chain(1,1)", figure_chain(&int(1), &int(1)).unwrap()),
        ("figure_chain(3,2/5)", figure_chain(&int(3), &frac(2, 5)).unwrap()),
        ("pulse(1,2,1)", pulse(&int(1), 2, &int(1)).unwrap()),
        ("two_link(5)", two_link(5).unwrap()),
        ("damper(1,1)", damper(1, &int(1)).unwrap()),
        ("damper(2,1)", damper(2, &int(1)).unwrap()),
        ("exponential(1)", exponential(1, None).unwrap()),
    ]
}

fn small_rat(rng: &mut impl Rng) -> Rat {
    frac(rng.gen_range(1..=6), rng.gen_range(1..=4))
}

/// A random acyclic thin-flow problem with at most 6 nodes and 10 arcs, all
/// arcs active and a random subset of them resetting.
pub fn random_problem(rng: &mut impl Rng) -> ThinFlowProblem {
    let n = rng.gen_range(2..=6);
    let names: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
    let mut b = Instance::builder(&names[0], &names[n - 1], small_rat(rng));
    for name in &names[1..n - 1] {
        b = b.node(name);
    }
    let mut arcs = Vec::new();
    let mut v = 0;
    while v < n - 1 {
        let w = rng.gen_range(v + 1..n);
        arcs.push((v, w));
        v = w;
    }
    let extra = rng.gen_range(0..=10 - arcs.len());
    for _ in 0..extra {
        let a = rng.gen_range(0..n - 1);
        let c = rng.gen_range(a + 1..n);
        arcs.push((a, c));
    }
    for (i, &(a, c)) in arcs.iter().enumerate() {
        b = b.arc(&format!("a{i}"), &names[a], &names[c], small_rat(rng), int(1));
    }
    let inst = b.build().unwrap();
    let active = vec![true; inst.arcs.len()];
    let queued: Vec<bool> = (0..inst.arcs.len()).map(|_| rng.gen_bool(0.4)).collect();
    ThinFlowProblem::new(&inst, &active, &queued).unwrap()
}

/// A random acyclic instance with at most 6 nodes and 10 arcs, pruned to its
/// s-t paths; about one arc in four has zero delay.
pub fn random_instance(rng: &mut impl Rng) -> Instance {
    let n = rng.gen_range(2..=6);
    let names: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
    let mut b = Instance::builder(&names[0], &names[n - 1], small_rat(rng));
    for name in &names[1..n - 1] {
        b = b.node(name);
    }
    let mut pairs = Vec::new();
    let mut v = 0;
    while v < n - 1 {
        let w = rng.gen_range(v + 1..n);
        pairs.push((v, w));
        v = w;
    }
    for _ in 0..rng.gen_range(0..=10 - pairs.len()) {
        let a = rng.gen_range(0..n - 1);
        pairs.push((a, rng.gen_range(a + 1..n)));
    }
    for (i, &(a, c)) in pairs.iter().enumerate() {
        let delay = if rng.gen_bool(0.25) { int(0) } else { frac(rng.gen_range(1..=4), rng.gen_range(1..=2)) };
        b = b.arc(&format!("a{i}"), &names[a], &names[c], small_rat(rng), delay);
    }
    validate(&b.build().unwrap()).unwrap().into_instance()
}
