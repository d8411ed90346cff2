//! Simulator-based and episodic learners against the exact planner.

use proptest::prelude::*;
use riskdp::dp::{evaluate_policy, solve_optimal, PlanningModel};
use riskdp::grid::{discretize, Grid};
use riskdp::mdp::{gen_mdp, GeneratorSpec, TabularRSMDP};
use riskdp::ucb::{iota2, vigu_ucb, InitialState, McScoring, UcbOptions};
use riskdp::utility::{make_utility, UtilityFn, UtilitySpec};
use riskdp::vigu::{collect_samples, vigu};
use riskdp::SeedTree;

fn env() -> TabularRSMDP {
    gen_mdp(&GeneratorSpec::Random {
        states: 3,
        actions: 2,
        horizon: 3,
        seed: 11,
    })
    .unwrap()
}

fn exp(beta: f64, h: usize) -> UtilityFn {
    make_utility(&UtilitySpec::Exponential { beta }, h).unwrap()
}

#[test]
fn reward_estimates_are_unbiased_for_the_bins() {
    let mdp = env();
    let grid = Grid::new(8, 3).unwrap();
    let denv = discretize(&mdp, grid).unwrap();
    let (reps, n) = (200, 500);
    let cells = [(0, 0, 0), (1, 2, 1), (2, 1, 0)];
    let mut sums = vec![vec![0.0; grid.reward_points()]; cells.len()];
    for rep in 0..reps {
        let model = collect_samples(&mdp, grid, n, &SeedTree::new(rep)).unwrap();
        for (c, &(h, s, a)) in cells.iter().enumerate() {
            for (acc, x) in sums[c].iter_mut().zip(model.reward_bins(h, s, a)) {
                *acc += x;
            }
        }
    }
    for (c, &(h, s, a)) in cells.iter().enumerate() {
        for (i, &p) in denv.reward_bins(h, s, a).iter().enumerate() {
            let mean = sums[c][i] / reps as f64;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            let tol = 4.0 * sigma / (reps as f64).sqrt() + 1e-15;
            assert!((mean - p).abs() <= tol, "cell {c} bin {i}: {mean} vs {p}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn learned_policies_never_beat_the_optimum(seed in any::<u64>(), n in 1usize..200, beta in -2.0f64..2.0) {
        prop_assume!(beta.abs() > 1e-3);
        let mdp = env();
        let u = exp(beta, 3);
        let grid = Grid::new(6, 3).unwrap();
        let denv = discretize(&mdp, grid).unwrap();
        let (v_star, _, _) = solve_optimal(&denv, &u).unwrap();
        let out = vigu(&mdp, &u, grid, n, 0.1, &SeedTree::new(seed)).unwrap();
        let v = evaluate_policy(&denv, &u, &out.grid_policy).unwrap();
        for h in 0..=3 {
            for s in 0..3 {
                for y in 0..grid.y_points(h) {
                    prop_assert!(v.get(h, s, y) <= v_star.get(h, s, y) + 1e-12);
                }
            }
        }
        prop_assert_eq!(out.simulator_calls, 3 * 3 * 2 * n);
    }

    #[test]
    fn learning_runs_conserve_counts_and_respect_the_cap(seed in any::<u64>(), k in 1usize..60) {
        let mdp = env();
        let u = exp(-1.0, 3);
        let grid = Grid::new(4, 3).unwrap();
        let opts = UcbOptions {
            initial: InitialState::Distribution(vec![0.2, 0.3, 0.5]),
            audit_optimism: true,
            mc: None,
        };
        let t = vigu_ucb(&mdp, &u, grid, k, 0.1, &SeedTree::new(seed), &opts).unwrap();
        prop_assert_eq!(t.records.len(), k);
        for r in &t.records {
            prop_assert!(r.regret >= -1e-12 && r.regret <= 3.0 * u.kappa());
        }
        for h in 0..3 {
            let total: u64 = (0..3).flat_map(|s| (0..2).map(move |a| (s, a)))
                .map(|(s, a)| t.final_state.visits(h, s, a))
                .sum();
            prop_assert_eq!(total, k as u64);
        }
        let planned = riskdp::ucb::ucb_plan(&t.final_state, &u, grid, 0.1, k).unwrap();
        prop_assert!(planned.max_entry() <= 3.0 * u.kappa());
    }
}

#[test]
fn original_environment_regret_respects_the_conversion_bound() {
    let mdp = gen_mdp(&GeneratorSpec::Chain { length: 2, horizon: 3 }).unwrap();
    let u = exp(1.0, 3);
    let grid = Grid::new(8, 3).unwrap();
    let k = 40;
    let opts = UcbOptions {
        mc: Some(McScoring {
            trials: 4000,
            every: 1,
            fine_multiplier: 16,
        }),
        ..Default::default()
    };
    let t = vigu_ucb(&mdp, &u, grid, k, 0.1, &SeedTree::new(21), &opts).unwrap();
    let (mut mc_regret, mut ci) = (0.0, 0.0);
    for r in &t.records {
        let mc = r.mc.expect("every episode scored");
        mc_regret += r.v_opt_fine.unwrap() - mc.mean;
        ci += mc.half_width;
    }
    let (h, tt, kappa, eps) = (3.0, (3 * k) as f64, u.kappa(), grid.eps());
    let (lambda, eta) = (mdp.lambda_max(), mdp.eta_max());
    let i2 = iota2(3, 2, 2, k, 0.1, eps);
    assert_eq!(t.iota2, i2);
    let bound = t.cumulative_regret()
        + (h * h * tt * kappa * kappa * i2).sqrt()
        + 0.5 * h * tt * kappa * (lambda + 2.0 * eta) * eps
        + tt * kappa * eps
        + ci;
    assert!(mc_regret <= bound, "{mc_regret} > {bound}");
}

#[test]
fn reruns_are_identical() {
    let mdp = env();
    let u = exp(2.0, 3);
    let grid = Grid::new(5, 3).unwrap();
    let a = vigu(&mdp, &u, grid, 100, 0.1, &SeedTree::new(3)).unwrap();
    let b = vigu(&mdp, &u, grid, 100, 0.1, &SeedTree::new(3)).unwrap();
    assert_eq!(a.q, b.q);
    assert_eq!(a.grid_policy, b.grid_policy);
    let c = vigu(&mdp, &u, grid, 100, 0.1, &SeedTree::new(4)).unwrap();
    assert_ne!(a.model, c.model);
    let opts = UcbOptions::default();
    let ta = vigu_ucb(&mdp, &u, grid, 80, 0.1, &SeedTree::new(3), &opts).unwrap();
    let tb = vigu_ucb(&mdp, &u, grid, 80, 0.1, &SeedTree::new(3), &opts).unwrap();
    assert_eq!(ta, tb);
}
