//! Simulator-based value iteration under a general utility.
//!
//! Each `(step, s, a)` cell is queried `n` times; the transition row and the
//! distribution of projected rewards are estimated by counting, and the
//! estimated model is solved by backward induction. The greedy grid policy is
//! returned together with its continuous-`y` extension.

use crate::dp::{backward_induction, CellRule, PlanningModel, QTable, ValueTable};
use crate::error::{Error, Result};
use crate::grid::{lift_policy, DiscretePolicy, DiscretizedEnv, Grid, LiftedPolicy};
use crate::mdp::{sample_step, TabularRSMDP};
use crate::rng::{tag, SeedTree};
use crate::utility::UtilityFn;

/// Empirical transition rows and projected-reward distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalModel {
    grid: Grid,
    states: usize,
    actions: usize,
    /// Samples per cell; zero for a model copied from an exact kernel.
    n: usize,
    /// Flattened `(step, s, a, s')`.
    p_hat: Vec<f64>,
    /// Flattened `(step, s, a, reward index)`.
    r_hat: Vec<f64>,
}

impl EmpiricalModel {
    /// The model whose estimates equal the discretized kernel exactly.
    pub fn from_env(denv: &DiscretizedEnv<'_>) -> Self {
        let mdp = denv.mdp();
        let mut p_hat = Vec::new();
        let mut r_hat = Vec::new();
        for h in 0..mdp.horizon() {
            for s in 0..mdp.states() {
                for a in 0..mdp.actions() {
                    p_hat.extend_from_slice(mdp.transition(h, s, a));
                    r_hat.extend_from_slice(denv.reward_bins(h, s, a));
                }
            }
        }
        Self {
            grid: denv.grid(),
            states: mdp.states(),
            actions: mdp.actions(),
            n: 0,
            p_hat,
            r_hat,
        }
    }

    pub fn samples_per_cell(&self) -> usize {
        self.n
    }

    fn cell(&self, step: usize, s: usize, a: usize) -> usize {
        (step * self.states + s) * self.actions + a
    }
}

impl PlanningModel for EmpiricalModel {
    fn grid(&self) -> Grid {
        self.grid
    }
    fn states(&self) -> usize {
        self.states
    }
    fn actions(&self) -> usize {
        self.actions
    }
    fn next_states(&self, step: usize, s: usize, a: usize) -> &[f64] {
        let c = self.cell(step, s, a) * self.states;
        &self.p_hat[c..c + self.states]
    }
    fn reward_bins(&self, step: usize, s: usize, a: usize) -> &[f64] {
        let n_r = self.grid.reward_points();
        let c = self.cell(step, s, a) * n_r;
        &self.r_hat[c..c + n_r]
    }
}

/// Queries the simulator `n` times at every `(step, s, a)` and counts next
/// states and projected rewards. Each cell draws from its own stream keyed by
/// `(step, s, a)`.
pub fn collect_samples(
    mdp: &TabularRSMDP,
    grid: Grid,
    n: usize,
    seeds: &SeedTree,
) -> Result<EmpiricalModel> {
    if n == 0 {
        return Err(Error::InvalidParam("VIGU needs n >= 1 samples per cell".into()));
    }
    if grid.horizon() != mdp.horizon() {
        return Err(Error::InvalidParam("grid horizon does not match the MDP".into()));
    }
    let (s_n, a_n) = (mdp.states(), mdp.actions());
    let n_r = grid.reward_points();
    let cells = mdp.horizon() * s_n * a_n;
    let mut p_hat = Vec::with_capacity(cells * s_n);
    let mut r_hat = Vec::with_capacity(cells * n_r);
    let inv_n = 1.0 / n as f64;
    for h in 0..mdp.horizon() {
        for s in 0..s_n {
            for a in 0..a_n {
                let mut rng = seeds.stream(&[tag::VIGU_SAMPLES, h as u64, s as u64, a as u64]);
                let mut state_counts = vec![0usize; s_n];
                let mut reward_counts = vec![0usize; n_r];
                for _ in 0..n {
                    let (s2, r) = sample_step(mdp, s, a, h, &mut rng)?;
                    state_counts[s2] += 1;
                    reward_counts[grid.project_r(r)?] += 1;
                }
                p_hat.extend(state_counts.iter().map(|&c| c as f64 * inv_n));
                r_hat.extend(reward_counts.iter().map(|&c| c as f64 * inv_n));
            }
        }
    }
    Ok(EmpiricalModel {
        grid,
        states: s_n,
        actions: a_n,
        n,
        p_hat,
        r_hat,
    })
}

/// Backward induction on the estimated model, without clipping.
pub fn plan(
    model: &EmpiricalModel,
    u: &UtilityFn,
    grid: Grid,
) -> Result<(QTable, ValueTable, DiscretePolicy)> {
    if grid != model.grid {
        return Err(Error::InvalidParam("model was estimated on a different grid".into()));
    }
    let (v, q, pol) = backward_induction(model, u, |_, _, _| CellRule::Backup {
        bonus: 0.0,
        cap: None,
    })?;
    Ok((q, v, pol))
}

/// `log(4 H^2 S A / (p eps))`, the confidence term of the VIGU guarantee.
pub fn iota1(horizon: usize, states: usize, actions: usize, p: f64, eps: f64) -> f64 {
    let h = horizon as f64;
    (4.0 * h * h * states as f64 * actions as f64 / (p * eps)).ln()
}

#[derive(Debug, Clone)]
pub struct ViguOutput {
    /// Greedy policy extended to continuous `y` by projection.
    pub policy: LiftedPolicy,
    pub grid_policy: DiscretePolicy,
    pub values: ValueTable,
    pub q: QTable,
    pub model: EmpiricalModel,
    pub simulator_calls: usize,
    pub iota1: f64,
}

/// Sample collection, planning and policy interpolation in one call.
pub fn vigu(
    mdp: &TabularRSMDP,
    u: &UtilityFn,
    grid: Grid,
    n: usize,
    p: f64,
    seeds: &SeedTree,
) -> Result<ViguOutput> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParam(format!("failure probability must lie in (0, 1), got {p}")));
    }
    let model = collect_samples(mdp, grid, n, seeds)?;
    let (q, values, grid_policy) = plan(&model, u, grid)?;
    Ok(ViguOutput {
        policy: lift_policy(&grid_policy, grid)?,
        grid_policy,
        values,
        q,
        simulator_calls: mdp.horizon() * mdp.states() * mdp.actions() * n,
        iota1: iota1(mdp.horizon(), mdp.states(), mdp.actions(), p, grid.eps()),
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::{evaluate_policy, solve_optimal};
    use crate::grid::discretize;
    use crate::mdp::{gen_mdp, GeneratorSpec, RewardDist};
    use crate::utility::{make_utility, UtilitySpec};

    fn exp(beta: f64, h: usize) -> UtilityFn {
        make_utility(&UtilitySpec::Exponential { beta }, h).unwrap()
    }

    #[test]
    fn deterministic_cells_give_one_hot_estimates() {
        let mdp = TabularRSMDP::new(
            2,
            1,
            2,
            vec![0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0],
            vec![
                RewardDist::GridPointMass { r: 0.5 },
                RewardDist::GridPointMass { r: 0.25 },
                RewardDist::GridPointMass { r: 1.0 },
                RewardDist::GridPointMass { r: 0.0 },
            ],
        )
        .unwrap();
        let grid = Grid::new(4, 2).unwrap();
        let model = collect_samples(&mdp, grid, 50, &SeedTree::new(1)).unwrap();
        assert_eq!(model.next_states(0, 0, 0), &[0.0, 1.0]);
        assert_eq!(model.reward_bins(0, 0, 0), &[0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(model.reward_bins(1, 0, 0), &[0.0, 0.0, 0.0, 0.0, 1.0]);

        // hand rollup along the deterministic chain s0 -> s1 with rewards 0.5 then 0.0
        let u = exp(1.0, 2);
        let (q, _, _) = plan(&model, &u, grid).unwrap();
        assert_eq!(q.get(0, 0, 0, 0), u.eval(0.5).unwrap());
        // from s1 at step 0: reward 0.25, then s0 at step 1 pays 1.0
        assert_eq!(q.get(0, 1, 0, 0), u.eval(1.25).unwrap());
        assert_eq!(q.get(1, 1, 2, 0), u.eval(0.5).unwrap());
    }

    #[test]
    fn single_sample_is_one_hot() {
        let mdp = gen_mdp(&GeneratorSpec::Random {
            states: 3,
            actions: 2,
            horizon: 2,
            seed: 3,
        })
        .unwrap();
        let grid = Grid::new(5, 2).unwrap();
        let model = collect_samples(&mdp, grid, 1, &SeedTree::new(2)).unwrap();
        for h in 0..2 {
            for s in 0..3 {
                for a in 0..2 {
                    for v in [model.next_states(h, s, a), model.reward_bins(h, s, a)] {
                        assert_eq!(v.iter().filter(|&&x| x == 1.0).count(), 1);
                        assert_eq!(v.iter().filter(|&&x| x == 0.0).count(), v.len() - 1);
                    }
                }
            }
        }
    }

    #[test]
    fn uniform_first_bin_frequency() {
        let mdp = TabularRSMDP::new(1, 1, 1, vec![1.0], vec![RewardDist::uniform01()]).unwrap();
        let grid = Grid::new(4, 1).unwrap();
        let model = collect_samples(&mdp, grid, 10_000, &SeedTree::new(5)).unwrap();
        let sigma = (0.125f64 * 0.875 / 1e4).sqrt();
        assert!((model.reward_bins(0, 0, 0)[0] - 0.125).abs() <= 4.0 * sigma);
        let total: f64 = model.reward_bins(0, 0, 0).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_model_reproduces_the_oracle() {
        let mdp = gen_mdp(&GeneratorSpec::Random {
            states: 3,
            actions: 2,
            horizon: 3,
            seed: 11,
        })
        .unwrap();
        let grid = Grid::new(6, 3).unwrap();
        let denv = discretize(&mdp, grid).unwrap();
        let u = exp(-1.0, 3);
        let (v, q, pol) = solve_optimal(&denv, &u).unwrap();
        let (q2, v2, pol2) = plan(&EmpiricalModel::from_env(&denv), &u, grid).unwrap();
        assert_eq!((v, q, pol), (v2, q2, pol2));
    }

    #[test]
    fn large_samples_approach_the_oracle() {
        let mdp = gen_mdp(&GeneratorSpec::Random {
            states: 2,
            actions: 2,
            horizon: 2,
            seed: 6,
        })
        .unwrap();
        let grid = Grid::new(8, 2).unwrap();
        let denv = discretize(&mdp, grid).unwrap();
        let u = exp(1.0, 2);
        let (v, _, _) = solve_optimal(&denv, &u).unwrap();
        let out = vigu(&mdp, &u, grid, 100_000, 0.1, &SeedTree::new(3)).unwrap();
        assert!(v.max_abs_diff(&out.values) <= 0.02 * 2.0 * u.kappa());
        assert_eq!(out.simulator_calls, 2 * 2 * 2 * 100_000);
        // the learned policy is never better than optimal in the true grid model
        let ve = evaluate_policy(&denv, &u, &out.grid_policy).unwrap();
        for s in 0..2 {
            assert!(ve.get(0, s, 0) <= v.get(0, s, 0) + 1e-12);
        }
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let mdp = gen_mdp(&GeneratorSpec::Chain { length: 3, horizon: 2 }).unwrap();
        let grid = Grid::new(4, 2).unwrap();
        let u = exp(2.0, 2);
        let a = vigu(&mdp, &u, grid, 200, 0.1, &SeedTree::new(9)).unwrap();
        let b = vigu(&mdp, &u, grid, 200, 0.1, &SeedTree::new(9)).unwrap();
        assert_eq!(a.grid_policy, b.grid_policy);
        assert_eq!(a.values, b.values);
        assert!(vigu(&mdp, &u, grid, 0, 0.1, &SeedTree::new(9)).is_err());
        assert!(vigu(&mdp, &u, grid, 10, 1.5, &SeedTree::new(9)).is_err());
    }

    #[test]
    fn iota1_formula() {
        let v = iota1(3, 2, 2, 0.1, 0.25);
        assert!((v - (4.0f64 * 9.0 * 4.0 / 0.025).ln()).abs() < 1e-12);
    }
}
