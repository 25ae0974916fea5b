use nashflow::dynamics::sink_inflow_schedule;
use nashflow::engine::{solve_equilibrium, Limits, Trajectory};
use nashflow::gadgets::{damper, exponential, lambda, pulse, pulse_alpha, series_chain, two_link};
use nashflow::instance::{min_queuing_cut, validate, Instance};
use nashflow::rat::{frac, int, parse_rat, pow, Rat};
use num_bigint::BigInt;

fn solve(inst: &Instance) -> Trajectory {
    solve_equilibrium(inst, &Limits::default()).unwrap()
}

fn meta(inst: &Instance, key: &str) -> Rat {
    parse_rat(&inst.metadata[key]).unwrap()
}

#[test]
fn pulse_structure() {
    for (u, rho) in [(int(1), int(1)), (frac(2, 5), frac(3, 2))] {
        for k in 1..=5u32 {
            let p = pulse(&u, k, &rho).unwrap();
            assert_eq!(p.arcs.len(), 6 * k as usize);
            let grid = pow(&int(12), k) / &u;
            for a in &p.arcs {
                assert!(a.capacity >= &u / int(3));
                assert!((&a.capacity * &grid).is_integer(), "{}", a.id);
            }
            assert!(validate(&p).unwrap().warnings.is_empty());
            assert!(p.inflow <= min_queuing_cut(&p).capacity);
        }
    }
}

#[test]
fn pulse_peaks_at_alpha() {
    for k in 1..=4u32 {
        for rho in [int(1), frac(3, 7)] {
            let u = int(1);
            let traj = solve(&pulse(&u, k, &rho).unwrap());
            let sched = sink_inflow_schedule(&traj);
            let peak = pow(&lambda(), k);
            let start = pulse_alpha(k) * &rho;
            assert_eq!(sched.peak(), peak);
            let top: Vec<_> = sched.pieces.iter().filter(|p| p.rate == peak).collect();
            assert_eq!(top.len(), 1);
            assert_eq!(top[0].start, start);
            assert_eq!(top[0].end, Some(&start + &rho));
            for p in sched.pieces.iter().take_while(|p| p.start < start) {
                assert!(p.rate <= pow(&lambda(), k - 1) / int(3));
            }
            assert_eq!(sched.pieces.last().unwrap().rate, u);
        }
    }
}

#[test]
fn damper_outflow_pattern() {
    for k in 1..=3u32 {
        for rho in [int(1), int(2)] {
            let d = damper(k, &rho).unwrap();
            let low = pow(&lambda(), k).recip();
            assert_eq!(d.arcs.len(), 6 * k as usize + 3);
            let grid = int(12) * pow(&int(13), k);
            for a in &d.arcs {
                assert!(a.capacity >= &low / int(3) && a.capacity <= int(1), "{}", a.id);
                assert!((&a.capacity * &grid).is_integer(), "{}", a.id);
            }
            let traj = solve(&d);
            let sched = sink_inflow_schedule(&traj);
            let (theta_1, theta_2) = (meta(&d, "theta_1"), meta(&d, "theta_2"));
            assert!(&theta_1 + &rho * int(2) < theta_2);
            let one = &sched.pieces.iter().find(|p| p.start == theta_1).unwrap();
            assert!(one.rate == int(1) && one.end.as_ref().unwrap() >= &(&theta_1 + &rho));
            let damped = sched.pieces.iter().find(|p| p.end.as_ref() == Some(&theta_2)).unwrap();
            assert_eq!(damped.rate, low);
            assert!(&theta_2 - &damped.start >= rho);
            let last = sched.pieces.last().unwrap();
            assert_eq!((&last.start, &last.rate), (&theta_2, &int(1)));
            let tau_f = meta(&d, "tau_f");
            for p in &traj.phases {
                assert!(&p.start.labels[d.sink] - &p.theta_start <= tau_f);
            }
        }
    }
}

#[test]
fn exponential_structure() {
    assert_eq!(exponential(1, None).unwrap().arcs.len(), 2);
    let c = BigInt::from(1) << 234;
    let e = exponential(2, Some(&c)).unwrap();
    assert!(e.arcs.len() < 400);
    assert_eq!(e.metadata["C"], c.to_string());
    assert!(validate(&e).unwrap().warnings.is_empty());
    let bigger = exponential(2, Some(&(&c * 2))).unwrap();
    assert_eq!(bigger.arcs.len(), e.arcs.len());
}

#[test]
fn exponential_phase_counts_grow() {
    let one = solve(&exponential(1, None).unwrap()).phases.len();
    let two = solve(&exponential(2, None).unwrap()).phases.len();
    assert_eq!(one, 2);
    assert!(two >= 4 && two > one);
}

#[test]
fn chains_of_two_links_are_valid() {
    let parts: Vec<_> = (1..=3).map(|l| two_link(l).unwrap()).collect();
    let chain = series_chain(&parts).unwrap();
    assert_eq!(chain.arcs.len(), 6);
    assert_eq!(chain.nodes[chain.source], "1.s");
    assert_eq!(chain.nodes[chain.sink], "3.t");
    assert!(validate(&chain).unwrap().warnings.is_empty());
    let traj = solve(&chain);
    assert!(traj.steady_time().is_some());
}
