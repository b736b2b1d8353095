mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_peakload::numsolve::{self, Tolerances};
use robust_peakload::{poa, random, robustcore};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tau_lies_between_one_over_n_and_one(seed in any::<u64>(), n in 1usize..=5) {
        let set = random::valid_set(&mut rng(seed), n);
        let tau = set.tau().unwrap();
        prop_assert!(tau.tau >= 1.0 / n as f64 - 1e-9);
        prop_assert!(tau.tau <= 1.0 + 1e-9);
        prop_assert!(set.contains(&tau.witness, 1e-7));
        prop_assert!(tau.witness.iter().all(|w| *w >= tau.tau - 1e-7));
    }

    #[test]
    fn lifting_keeps_tau(seed in any::<u64>(), n in 1usize..=3, periods in 1usize..=3) {
        let set = random::valid_set(&mut rng(seed), n);
        let base = set.tau().unwrap().tau;
        prop_assert!((set.lift_product(periods).tau().unwrap().tau - base).abs() <= 1e-9);
    }

    #[test]
    fn vertices_are_feasible_and_attain_maxima(seed in any::<u64>(), n in 1usize..=4) {
        let mut r = rng(seed);
        let set = random::valid_set(&mut r, n);
        let vertices = set.enumerate_vertices().unwrap();
        prop_assert!(vertices.iter().all(|v| set.contains(v, 1e-9)));
        let w: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..=1.0)).collect();
        let (best, _) = set.maximize(&w).unwrap();
        let by_vertex = vertices
            .iter()
            .map(|v| v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((best - by_vertex).abs() <= 1e-9);
    }

    #[test]
    fn robust_lp_value_chain(seed in any::<u64>()) {
        let p = random::robust_lp(&mut rng(seed));
        let rep = robustcore::solve_robust_lp(&p).unwrap();
        prop_assert!(rep.chain_ok, "{} {} {}", rep.val_r, rep.val_b, rep.val_btilde);
        prop_assert!(rep.bound_ok);
        prop_assert!(p.u.contains(&rep.worst_u, 1e-7));
    }

    #[test]
    fn fixed_market_within_tau_bound(seed in any::<u64>()) {
        let inst = random::fixed_market(&mut rng(seed));
        let rep = poa::poa_fixed(&inst).unwrap();
        prop_assert!(rep.c <= rep.e + 1e-7 * (1.0 + rep.e.abs()));
        prop_assert!(rep.e <= rep.c / rep.tau + 1e-7);
        if let Some(rho) = rep.rho {
            prop_assert!(rep.e <= poa::restricted_bound(rho, rep.tau) * rep.c + 1e-7);
        }
    }

    #[test]
    fn planner_worst_case_reproduces_value(seed in any::<u64>()) {
        let inst = random::fixed_market(&mut rng(seed));
        let (sol, c, u) = robustcore::solve_robust_cp_fixed(&inst).unwrap();
        let flat: Vec<f64> = (0..inst.periods).flat_map(|t| u.iter().map(move |ui| ui[t])).collect();
        prop_assert!(inst.uncertainty.lift_product(inst.periods).contains(&flat, 1e-7));
        let at = inst.objective_at(&sol.capacities, &sol.production, &u);
        prop_assert!((at - c).abs() <= 1e-6 * (1.0 + c.abs()));
    }

    #[test]
    fn elastic_market_welfare_below_planner(seed in any::<u64>(), n in 2usize..=3) {
        let inst = random::elastic_market(&mut rng(seed), n, 1);
        let rep = poa::poa_elastic(&inst).unwrap();
        prop_assert!(rep.e <= rep.c + 1e-7);
    }

    #[test]
    fn lp_certificates_pass(seed in any::<u64>()) {
        let lp = common::random_lp(&mut rng(seed));
        let out = numsolve::solve_lp(&lp).unwrap();
        if out.is_optimal() {
            let cert = out.certificate.unwrap();
            prop_assert!(cert.passes(&Tolerances::default()), "{cert:?}");
        }
    }

    #[test]
    fn qp_matches_active_set_oracle(seed in any::<u64>()) {
        let qp = common::random_qp(&mut rng(seed));
        let out = numsolve::solve_qp(&qp).unwrap();
        match common::qp_brute_force(&qp) {
            Some(best) => {
                prop_assert!(out.is_optimal());
                prop_assert!((out.objective - best).abs() <= 1e-7 * (1.0 + best.abs()));
                prop_assert!((common::objective(&qp, &out.primal) - out.objective).abs() <= 1e-9 * (1.0 + best.abs()));
            }
            None => prop_assert!(!out.is_optimal()),
        }
    }
}
