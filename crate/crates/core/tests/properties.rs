mod common;

use common::{random_instance, random_problem};
use nashflow::dynamics::check_cumulative_identity;
use nashflow::engine::{solve_equilibrium, Limits, Status};
use nashflow::instance::{emit_instance, min_queuing_cut, parse_instance};
use nashflow::ntfr::{solve_ntfr, solve_ntfr_with, verify_ntfr, Method, Order, SolveOptions};
use nashflow::potential::PotentialTrace;
use nashflow::rat::{frac, int, Rat};
use nashflow::steady::steady_report;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ntfr_labels_do_not_depend_on_search_order(seed in any::<u64>()) {
        let prob = random_problem(&mut rng(seed));
        let fwd = solve_ntfr_with(&prob, SolveOptions { method: Method::Enumerate, order: Order::Forward }).unwrap();
        let rev = solve_ntfr_with(&prob, SolveOptions { method: Method::Enumerate, order: Order::Reverse }).unwrap();
        let auto = solve_ntfr(&prob).unwrap();
        prop_assert_eq!(&fwd.labels, &rev.labels);
        prop_assert_eq!(&fwd.labels, &auto.labels);
        prop_assert_eq!(&fwd.flows, &auto.flows);
        for tf in [&fwd, &rev, &auto] {
            let bad = verify_ntfr(&prob, tf);
            prop_assert!(bad.is_empty(), "{:?}", bad);
        }
    }

    #[test]
    fn ntfr_is_scale_invariant(seed in any::<u64>(), num in 1i64..10, den in 1i64..10) {
        let prob = random_problem(&mut rng(seed));
        let c = frac(num, den);
        let base = solve_ntfr(&prob).unwrap();
        let scaled = solve_ntfr(&prob.scaled(&c)).unwrap();
        prop_assert_eq!(&base.labels, &scaled.labels);
        let expected: Vec<Rat> = base.flows.iter().map(|x| x * &c).collect();
        prop_assert_eq!(scaled.flows, expected);
    }

    #[test]
    fn instance_text_roundtrips(seed in any::<u64>()) {
        let inst = random_instance(&mut rng(seed));
        let text = emit_instance(&inst);
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(emit_instance(&back), text);
        prop_assert_eq!(back.digest(), inst.digest());
    }

    #[test]
    fn min_cut_scales_with_capacities(seed in any::<u64>(), num in 1i64..10, den in 1i64..10) {
        let inst = random_instance(&mut rng(seed));
        let c = frac(num, den);
        let mut scaled = inst.clone();
        for a in &mut scaled.arcs {
            a.capacity *= &c;
        }
        let (x, y) = (min_queuing_cut(&inst), min_queuing_cut(&scaled));
        prop_assert_eq!(&x.capacity * &c, y.capacity);
        prop_assert_eq!(x.cut_arcs, y.cut_arcs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_equilibria_are_consistent(seed in any::<u64>(), picks in prop::collection::vec(0u32..=1000, 8)) {
        let inst = random_instance(&mut rng(seed));
        let traj = solve_equilibrium(&inst, &Limits::default()).unwrap();
        for p in &traj.phases {
            prop_assert!(p.start.check(&inst).is_ok());
        }
        let end = traj.boundaries().last().cloned().unwrap_or_else(|| int(0)) + int(1);
        for k in picks {
            let theta = &end * frac(k as i64, 1000);
            let r = check_cumulative_identity(&traj, &theta);
            prop_assert!(r.is_ok(), "{:?}", r);
        }
        if inst.inflow <= min_queuing_cut(&inst).capacity {
            prop_assert!(matches!(traj.status, Status::SteadyState { .. }), "{:?}", traj.status);
            let trace = PotentialTrace::of(&traj);
            prop_assert!(trace.is_nondecreasing());
            prop_assert!(trace.telescoping_violations(&traj).is_empty());
            let alpha = trace.alpha.clone().unwrap();
            prop_assert!(trace.entries.iter().all(|e| e.phi <= alpha));
            prop_assert_eq!(&trace.entries.last().unwrap().phi, &alpha);
            let report = steady_report(&traj).unwrap();
            prop_assert!(report.passes(), "{:?}", report.violations);
        } else {
            prop_assert_eq!(traj.status, Status::UnboundedGrowth);
        }
    }
}
