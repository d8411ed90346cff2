//! Exact planning on grid models: optimal backward induction, policy
//! evaluation, an exhaustive history-dependent oracle, and Monte Carlo
//! evaluation of continuous-`y` policies in the original environment.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{ContinuousPolicy, DiscretePolicy, DiscretizedEnv, Grid};
use crate::mdp::{sample_step, TabularRSMDP};
use crate::utility::UtilityFn;

/// Relative tolerance under which two action values count as tied. Ties go to
/// the lowest action index.
pub const TIE_TOL: f64 = 1e-12;

/// Largest number of decision histories [`brute_force_history_optimum`] will visit.
pub const HISTORY_LIMIT: usize = 100_000;

/// z-score of a two-sided 99% normal interval.
pub const Z99: f64 = 2.575_829_303_548_900_4;

/// A finite model with grid-valued rewards that backward induction can run on.
pub trait PlanningModel {
    fn grid(&self) -> Grid;
    fn states(&self) -> usize;
    fn actions(&self) -> usize;
    /// Next-state distribution at `(step, s, a)`.
    fn next_states(&self, step: usize, s: usize, a: usize) -> &[f64];
    /// Reward-index distribution at `(step, s, a)`.
    fn reward_bins(&self, step: usize, s: usize, a: usize) -> &[f64];
}

impl PlanningModel for DiscretizedEnv<'_> {
    fn grid(&self) -> Grid {
        DiscretizedEnv::grid(self)
    }
    fn states(&self) -> usize {
        self.mdp().states()
    }
    fn actions(&self) -> usize {
        self.mdp().actions()
    }
    fn next_states(&self, step: usize, s: usize, a: usize) -> &[f64] {
        self.mdp().transition(step, s, a)
    }
    fn reward_bins(&self, step: usize, s: usize, a: usize) -> &[f64] {
        DiscretizedEnv::reward_bins(self, step, s, a)
    }
}

/// `V(step, s, y index)` for steps `0..=H`; the last layer is `U(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    grid: Grid,
    states: usize,
    layers: Vec<Vec<f64>>,
}

impl ValueTable {
    /// Table holding only the terminal layer `U(y)`; earlier layers are zero.
    fn with_terminal(grid: Grid, states: usize, u: &UtilityFn) -> Result<Self> {
        let horizon = grid.horizon();
        if u.horizon_cap() < horizon as f64 {
            return Err(Error::InvalidParam(format!(
                "utility is defined on [0, {}] but the horizon is {horizon}",
                u.horizon_cap()
            )));
        }
        let mut layers: Vec<Vec<f64>> = (0..horizon)
            .map(|h| vec![0.0; states * grid.y_points(h)])
            .collect();
        let terminal: Vec<f64> = (0..grid.y_points(horizon))
            .map(|i| u.eval(grid.value(i)))
            .collect::<Result<_>>()?;
        layers.push(terminal.repeat(states));
        Ok(Self { grid, states, layers })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn get(&self, step: usize, s: usize, y: usize) -> f64 {
        self.layers[step][s * self.grid.y_points(step) + y]
    }

    /// Flattened `(s, y)` values at `step`.
    pub fn layer(&self, step: usize) -> &[f64] {
        &self.layers[step]
    }

    /// Largest absolute entry-wise difference to another table on the same grid.
    pub fn max_abs_diff(&self, other: &ValueTable) -> f64 {
        self.layers
            .iter()
            .flatten()
            .zip(other.layers.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `Q(step, s, y index, a)` for steps `0..H`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    grid: Grid,
    states: usize,
    actions: usize,
    layers: Vec<Vec<f64>>,
}

impl QTable {
    fn zeros(grid: Grid, states: usize, actions: usize) -> Self {
        let layers = (0..grid.horizon())
            .map(|h| vec![0.0; states * grid.y_points(h) * actions])
            .collect();
        Self {
            grid,
            states,
            actions,
            layers,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    fn offset(&self, step: usize, s: usize, y: usize) -> usize {
        (s * self.grid.y_points(step) + y) * self.actions
    }

    pub fn get(&self, step: usize, s: usize, y: usize, a: usize) -> f64 {
        self.layers[step][self.offset(step, s, y) + a]
    }

    /// Action values at `(step, s, y)`.
    pub fn row(&self, step: usize, s: usize, y: usize) -> &[f64] {
        let o = self.offset(step, s, y);
        &self.layers[step][o..o + self.actions]
    }

    fn row_mut(&mut self, step: usize, s: usize, y: usize) -> &mut [f64] {
        let o = self.offset(step, s, y);
        &mut self.layers[step][o..o + self.actions]
    }

    /// Greedy action at `(step, s, y)`.
    pub fn greedy_action(&self, step: usize, s: usize, y: usize) -> usize {
        greedy(self.row(step, s, y)).0
    }

    pub fn greedy_policy(&self) -> DiscretePolicy {
        DiscretePolicy::from_fn(self.grid, self.states, |h, s, y| self.greedy_action(h, s, y))
    }

    /// Smallest entry-wise difference `self - other`.
    pub fn min_diff(&self, other: &QTable) -> f64 {
        self.layers
            .iter()
            .flatten()
            .zip(other.layers.iter().flatten())
            .map(|(a, b)| a - b)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_entry(&self) -> f64 {
        self.layers.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Index and value of the best action; near-ties go to the lowest index.
pub(crate) fn greedy(q: &[f64]) -> (usize, f64) {
    let mut best_a = 0;
    let mut best = q[0];
    for (a, &v) in q.iter().enumerate().skip(1) {
        if v > best + TIE_TOL * best.abs().max(1.0) {
            best = v;
            best_a = a;
        }
    }
    (best_a, best)
}

/// `sum_{s'} p(s') sum_i r(i) V(s', y + i)` against the next layer.
#[inline]
pub(crate) fn expected_next(p: &[f64], r: &[f64], next: &[f64], ny_next: usize, y: usize) -> f64 {
    let mut total = 0.0;
    for (s2, &ps) in p.iter().enumerate() {
        if ps == 0.0 {
            continue;
        }
        let row = &next[s2 * ny_next + y..];
        let mut inner = 0.0;
        for (i, &pr) in r.iter().enumerate() {
            if pr != 0.0 {
                inner += pr * row[i];
            }
        }
        total += ps * inner;
    }
    total
}

/// How backward induction fills the action values of one `(step, s, a)` cell.
#[derive(Debug, Clone, Copy)]
pub(crate) enum CellRule {
    /// Expected next value plus `bonus`, optionally capped.
    Backup { bonus: f64, cap: Option<f64> },
    /// A fixed value for every `y`, without touching the model.
    Fixed(f64),
}

/// Backward induction with a per-cell rule; returns `(V, Q, greedy policy)`.
pub(crate) fn backward_induction<M: PlanningModel + ?Sized>(
    model: &M,
    u: &UtilityFn,
    rule: impl Fn(usize, usize, usize) -> CellRule,
) -> Result<(ValueTable, QTable, DiscretePolicy)> {
    let grid = model.grid();
    let (s_n, a_n) = (model.states(), model.actions());
    let mut v = ValueTable::with_terminal(grid, s_n, u)?;
    let mut q = QTable::zeros(grid, s_n, a_n);
    let mut pol_layers = vec![Vec::new(); grid.horizon()];
    for h in (0..grid.horizon()).rev() {
        let ny = grid.y_points(h);
        let ny_next = grid.y_points(h + 1);
        let (head, tail) = v.layers.split_at_mut(h + 1);
        let next = &tail[0];
        let cur = &mut head[h];
        let mut actions = vec![0usize; s_n * ny];
        for s in 0..s_n {
            for a in 0..a_n {
                match rule(h, s, a) {
                    CellRule::Fixed(val) => {
                        for y in 0..ny {
                            q.row_mut(h, s, y)[a] = val;
                        }
                    }
                    CellRule::Backup { bonus, cap } => {
                        let p = model.next_states(h, s, a);
                        let r = model.reward_bins(h, s, a);
                        for y in 0..ny {
                            let mut val = expected_next(p, r, next, ny_next, y) + bonus;
                            if let Some(c) = cap {
                                val = val.min(c);
                            }
                            q.row_mut(h, s, y)[a] = val;
                        }
                    }
                }
            }
            for y in 0..ny {
                let (best_a, best) = greedy(q.row(h, s, y));
                cur[s * ny + y] = best;
                actions[s * ny + y] = best_a;
            }
        }
        pol_layers[h] = actions;
    }
    Ok((v, q, DiscretePolicy::from_layers(grid, s_n, pol_layers)))
}

/// Optimal values, action values and greedy policy of the discretized environment.
pub fn solve_optimal(
    denv: &DiscretizedEnv<'_>,
    u: &UtilityFn,
) -> Result<(ValueTable, QTable, DiscretePolicy)> {
    plan_model(denv, u)
}

/// Optimal backward induction on any grid model.
pub fn plan_model<M: PlanningModel + ?Sized>(
    model: &M,
    u: &UtilityFn,
) -> Result<(ValueTable, QTable, DiscretePolicy)> {
    backward_induction(model, u, |_, _, _| CellRule::Backup {
        bonus: 0.0,
        cap: None,
    })
}

fn check_policy<M: PlanningModel + ?Sized>(model: &M, pol: &DiscretePolicy) -> Result<()> {
    if pol.grid() != model.grid() || pol.states() != model.states() {
        return Err(Error::InvalidParam("policy shape does not match the model".into()));
    }
    if pol.max_action() >= model.actions() {
        return Err(Error::IndexOutOfRange {
            what: "action",
            index: pol.max_action(),
            limit: model.actions(),
        });
    }
    Ok(())
}

/// Value of a grid policy in the discretized environment.
pub fn evaluate_policy(
    denv: &DiscretizedEnv<'_>,
    u: &UtilityFn,
    pol: &DiscretePolicy,
) -> Result<ValueTable> {
    evaluate_policy_model(denv, u, pol)
}

/// Policy evaluation on any grid model.
pub fn evaluate_policy_model<M: PlanningModel + ?Sized>(
    model: &M,
    u: &UtilityFn,
    pol: &DiscretePolicy,
) -> Result<ValueTable> {
    check_policy(model, pol)?;
    let grid = model.grid();
    let mut v = ValueTable::with_terminal(grid, model.states(), u)?;
    for h in (0..grid.horizon()).rev() {
        let ny = grid.y_points(h);
        let ny_next = grid.y_points(h + 1);
        let (head, tail) = v.layers.split_at_mut(h + 1);
        let next = &tail[0];
        for s in 0..model.states() {
            for y in 0..ny {
                let a = pol.action(h, s, y);
                let p = model.next_states(h, s, a);
                let r = model.reward_bins(h, s, a);
                head[h][s * ny + y] = expected_next(p, r, next, ny_next, y);
            }
        }
    }
    Ok(v)
}

/// One-step action values `Q(step, s, y, a)` implied by a value table.
pub fn action_values<M: PlanningModel + ?Sized>(model: &M, v: &ValueTable) -> QTable {
    let grid = model.grid();
    let mut q = QTable::zeros(grid, model.states(), model.actions());
    for h in 0..grid.horizon() {
        let ny_next = grid.y_points(h + 1);
        let next = v.layer(h + 1);
        for s in 0..model.states() {
            for a in 0..model.actions() {
                let p = model.next_states(h, s, a);
                let r = model.reward_bins(h, s, a);
                for y in 0..grid.y_points(h) {
                    q.row_mut(h, s, y)[a] = expected_next(p, r, next, ny_next, y);
                }
            }
        }
    }
    q
}

/// Optimum over deterministic history-dependent policies, found by enumerating
/// every reachable history.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryPolicyValue {
    /// Optimal expected utility from each start state.
    pub values: Vec<f64>,
    /// Distinct decision histories visited.
    pub histories: usize,
    /// `histories * A` action evaluations.
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct HistoryStep {
    reward: f64,
    next_state: usize,
}

struct Enumerator<'e, 'a> {
    denv: &'e DiscretizedEnv<'a>,
    u: &'e UtilityFn,
    histories: usize,
    evaluations: usize,
}

impl Enumerator<'_, '_> {
    /// Best continuation value after history `(s1, past)`; the decision at
    /// this node may depend on the whole history.
    fn best(&mut self, s1: usize, past: &mut Vec<HistoryStep>) -> Result<f64> {
        let mdp = self.denv.mdp();
        let grid = self.denv.grid();
        let step = past.len();
        if step == grid.horizon() {
            let total: f64 = past.iter().map(|x| x.reward).sum();
            return self.u.eval(total);
        }
        self.histories += 1;
        if self.histories > HISTORY_LIMIT {
            return Err(Error::TooManyHistories {
                needed: self.histories,
                limit: HISTORY_LIMIT,
            });
        }
        let s = past.last().map_or(s1, |x| x.next_state);
        let mut best = f64::NEG_INFINITY;
        for a in 0..mdp.actions() {
            self.evaluations += 1;
            let mut value = 0.0;
            for (s2, &ps) in mdp.transition(step, s, a).iter().enumerate() {
                if ps == 0.0 {
                    continue;
                }
                for (i, &pr) in self.denv.reward_bins(step, s, a).iter().enumerate() {
                    if pr == 0.0 {
                        continue;
                    }
                    past.push(HistoryStep {
                        reward: grid.value(i),
                        next_state: s2,
                    });
                    let cont = self.best(s1, past)?;
                    past.pop();
                    value += ps * pr * cont;
                }
            }
            best = best.max(value);
        }
        Ok(best)
    }
}

/// Exhaustive optimum over history-dependent policies in the discretized
/// environment, from every start state with zero cumulative reward.
pub fn brute_force_history_optimum(
    denv: &DiscretizedEnv<'_>,
    u: &UtilityFn,
) -> Result<HistoryPolicyValue> {
    let mut e = Enumerator {
        denv,
        u,
        histories: 0,
        evaluations: 0,
    };
    let mut past = Vec::with_capacity(denv.grid().horizon());
    let values = (0..denv.mdp().states())
        .map(|s| e.best(s, &mut past))
        .collect::<Result<Vec<_>>>()?;
    Ok(HistoryPolicyValue {
        values,
        histories: e.histories,
        evaluations: e.evaluations,
    })
}

/// Sample mean and 99% normal-approximation half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub half_width: f64,
    pub trials: usize,
}

impl McEstimate {
    /// Mean and half-width of `values`.
    pub fn from_samples(values: impl IntoIterator<Item = f64>) -> Self {
        let (mut n, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
        for x in values {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        let half_width = if n > 1 {
            Z99 * (m2 / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            half_width,
            trials: n,
        }
    }
}

/// Monte Carlo value of `pol` from `(s1, y = 0)` in the original environment,
/// tracking the true continuous cumulative reward.
pub fn mc_policy_value<R: Rng + ?Sized>(
    mdp: &TabularRSMDP,
    u: &UtilityFn,
    pol: &dyn ContinuousPolicy,
    s1: usize,
    trials: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    if trials == 0 {
        return Err(Error::InvalidParam("mc_policy_value needs at least one trial".into()));
    }
    if s1 >= mdp.states() {
        return Err(Error::IndexOutOfRange {
            what: "state",
            index: s1,
            limit: mdp.states(),
        });
    }
    let mut samples = Vec::with_capacity(trials);
    for _ in 0..trials {
        let mut s = s1;
        let mut y = 0.0;
        for h in 0..mdp.horizon() {
            let a = pol.act(h, s, y)?;
            let (s2, r) = sample_step(mdp, s, a, h, rng)?;
            s = s2;
            y += r;
        }
        samples.push(u.eval(y)?);
    }
    Ok(McEstimate::from_samples(samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{discretize, lift_policy};
    use crate::mdp::{gen_mdp, GeneratorSpec, RewardDist};
    use crate::rng::SeedTree;
    use crate::utility::{make_utility, UtilitySpec};

    fn lin(h: usize) -> UtilityFn {
        make_utility(&UtilitySpec::Linear { slope: 1.0 }, h).unwrap()
    }

    fn exp(beta: f64, h: usize) -> UtilityFn {
        make_utility(&UtilitySpec::Exponential { beta }, h).unwrap()
    }

    fn uniform_single() -> TabularRSMDP {
        TabularRSMDP::new(1, 1, 1, vec![1.0], vec![RewardDist::uniform01()]).unwrap()
    }

    #[test]
    fn single_step_uniform_values() {
        let mdp = uniform_single();
        let denv = discretize(&mdp, Grid::new(4, 1).unwrap()).unwrap();
        let (v, _, _) = solve_optimal(&denv, &lin(1)).unwrap();
        assert!((v.get(0, 0, 0) - 0.5).abs() < 1e-15);

        let u = exp(1.0, 1);
        let (v, _, _) = solve_optimal(&denv, &u).unwrap();
        // bin masses times U at the grid points
        let oracle = 0.25 * (u.eval(0.25).unwrap() + u.eval(0.5).unwrap() + u.eval(0.75).unwrap())
            + 0.125 * u.eval(1.0).unwrap();
        assert!((v.get(0, 0, 0) - oracle).abs() < 1e-15);
        assert!((v.get(0, 0, 0) - 0.364_59).abs() < 1e-5);
        assert!((v.get(0, 0, 0) - (-1f64).exp()).abs() <= u.kappa() * 0.25);
    }

    #[test]
    fn bandit_prefers_safe_arm_under_concave_utility() {
        let mdp = gen_mdp(&GeneratorSpec::SafeRiskyBandit { horizon: 1 }).unwrap();
        let denv = discretize(&mdp, Grid::new(256, 1).unwrap()).unwrap();
        let (_, q, pol) = solve_optimal(&denv, &exp(4.0, 1)).unwrap();
        assert_eq!(pol.action(0, 0, 0), 0);
        assert!(q.get(0, 0, 0, 0) > q.get(0, 0, 0, 1));

        let bad = DiscretePolicy::constant(denv.grid(), 1, 1);
        let (v, _, _) = solve_optimal(&denv, &exp(4.0, 1)).unwrap();
        let vb = evaluate_policy(&denv, &exp(4.0, 1), &bad).unwrap();
        assert!(vb.get(0, 0, 0) < v.get(0, 0, 0));
    }

    #[test]
    fn evaluating_the_optimal_policy_reproduces_its_values() {
        let mdp = gen_mdp(&GeneratorSpec::Random {
            states: 3,
            actions: 3,
            horizon: 3,
            seed: 9,
        })
        .unwrap();
        let denv = discretize(&mdp, Grid::new(6, 3).unwrap()).unwrap();
        for u in [lin(3), exp(2.0, 3), exp(-1.0, 3)] {
            let (v, q, pol) = solve_optimal(&denv, &u).unwrap();
            let ve = evaluate_policy(&denv, &u, &pol).unwrap();
            assert!(v.max_abs_diff(&ve) <= 1e-12);
            // one more optimal backup leaves the table unchanged
            let q2 = action_values(&denv, &v);
            assert!(q.min_diff(&q2).abs() <= 1e-12 && q2.min_diff(&q).abs() <= 1e-12);
            for h in 0..3 {
                for s in 0..3 {
                    for y in 0..denv.grid().y_points(h) {
                        let best = q.row(h, s, y).iter().copied().fold(f64::MIN, f64::max);
                        assert!((v.get(h, s, y) - best).abs() <= 1e-12 * best.abs().max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn single_action_evaluation_equals_optimum() {
        let mdp = gen_mdp(&GeneratorSpec::Random {
            states: 2,
            actions: 1,
            horizon: 3,
            seed: 1,
        })
        .unwrap();
        let denv = discretize(&mdp, Grid::new(5, 3).unwrap()).unwrap();
        let u = exp(1.5, 3);
        let (v, _, _) = solve_optimal(&denv, &u).unwrap();
        let ve = evaluate_policy(&denv, &u, &DiscretePolicy::constant(denv.grid(), 2, 0)).unwrap();
        assert_eq!(v, ve);
    }

    #[test]
    fn policy_with_bad_action_is_rejected() {
        let mdp = uniform_single();
        let denv = discretize(&mdp, Grid::new(2, 1).unwrap()).unwrap();
        let pol = DiscretePolicy::constant(denv.grid(), 1, 3);
        assert!(evaluate_policy(&denv, &lin(1), &pol).is_err());
    }

    #[test]
    fn short_utility_domain_is_rejected() {
        let mdp = gen_mdp(&GeneratorSpec::Chain { length: 2, horizon: 3 }).unwrap();
        let denv = discretize(&mdp, Grid::new(2, 3).unwrap()).unwrap();
        assert!(solve_optimal(&denv, &lin(2)).is_err());
    }

    #[test]
    fn history_oracle_single_step() {
        let mdp = gen_mdp(&GeneratorSpec::Random {
            states: 2,
            actions: 3,
            horizon: 1,
            seed: 4,
        })
        .unwrap();
        let denv = discretize(&mdp, Grid::new(4, 1).unwrap()).unwrap();
        let u = exp(1.0, 1);
        let hv = brute_force_history_optimum(&denv, &u).unwrap();
        for s in 0..2 {
            let direct = (0..3)
                .map(|a| {
                    denv.reward_bins(0, s, a)
                        .iter()
                        .enumerate()
                        .map(|(i, p)| p * u.eval(i as f64 / 4.0).unwrap())
                        .sum::<f64>()
                })
                .fold(f64::MIN, f64::max);
            assert!((hv.values[s] - direct).abs() < 1e-14);
        }
        assert_eq!(hv.histories, 2);
        assert_eq!(hv.evaluations, 6);
    }

    #[test]
    fn history_oracle_with_action_independent_dynamics_is_a_convolution() {
        // two actions with identical rows and rewards
        let h_n = 2;
        let mut rng = SeedTree::new(8).stream(&[]);
        let dens: Vec<RewardDist> = (0..h_n * 2)
            .map(|_| {
                let f: Vec<f64> = (0..3).map(|_| 0.5 + rng.random::<f64>()).collect();
                let area = 0.25 * (f[0] + 2.0 * f[1] + f[2]);
                RewardDist::PiecewiseLinearDensity {
                    knots: vec![(0.0, f[0] / area), (0.5, f[1] / area), (1.0, f[2] / area)],
                }
            })
            .collect();
        let mut trans = Vec::new();
        let mut rewards = Vec::new();
        for h in 0..h_n {
            for s in 0..2 {
                for _a in 0..2 {
                    trans.extend([0.3, 0.7]);
                    rewards.push(dens[h * 2 + s].clone());
                }
            }
        }
        let mdp = TabularRSMDP::new(2, 2, h_n, trans, rewards).unwrap();
        let m = 3;
        let denv = discretize(&mdp, Grid::new(m, h_n).unwrap()).unwrap();
        let u = exp(-0.7, h_n);
        let hv = brute_force_history_optimum(&denv, &u).unwrap();
        // E[U(r1 + r2)] by convolving bin-mass vectors over the state path
        for s1 in 0..2 {
            let r1 = denv.reward_bins(0, s1, 0);
            let mut total = 0.0;
            for (s2, p) in [0.3, 0.7].iter().enumerate() {
                let r2 = denv.reward_bins(1, s2, 0);
                let mut conv = vec![0.0; 2 * m + 1];
                for (i, a) in r1.iter().enumerate() {
                    for (j, b) in r2.iter().enumerate() {
                        conv[i + j] += a * b;
                    }
                }
                total += p * conv
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * u.eval(k as f64 / m as f64).unwrap())
                    .sum::<f64>();
            }
            assert!((hv.values[s1] - total).abs() < 1e-12);
        }
    }

    #[test]
    fn history_guard_trips() {
        let mdp = gen_mdp(&GeneratorSpec::Random {
            states: 3,
            actions: 3,
            horizon: 4,
            seed: 4,
        })
        .unwrap();
        let denv = discretize(&mdp, Grid::new(8, 4).unwrap()).unwrap();
        assert!(matches!(
            brute_force_history_optimum(&denv, &lin(4)),
            Err(Error::TooManyHistories { .. })
        ));
    }

    #[test]
    fn mc_examples() {
        let mdp = TabularRSMDP::new(
            1,
            1,
            2,
            vec![1.0, 1.0],
            vec![RewardDist::GridPointMass { r: 0.5 }; 2],
        )
        .unwrap();
        let grid = Grid::new(4, 2).unwrap();
        let pol = lift_policy(&DiscretePolicy::constant(grid, 1, 0), grid).unwrap();
        let est = mc_policy_value(&mdp, &lin(2), &pol, 0, 100, &mut SeedTree::new(1).stream(&[])).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.half_width, 0.0);

        let mdp = uniform_single();
        let grid = Grid::new(4, 1).unwrap();
        let pol = lift_policy(&DiscretePolicy::constant(grid, 1, 0), grid).unwrap();
        let u = exp(1.0, 1);
        let est = mc_policy_value(&mdp, &u, &pol, 0, 1_000_000, &mut SeedTree::new(2).stream(&[])).unwrap();
        assert!((est.mean - (-1f64).exp()).abs() < 0.002);
        let again = mc_policy_value(&mdp, &u, &pol, 0, 1000, &mut SeedTree::new(3).stream(&[])).unwrap();
        let twice = mc_policy_value(&mdp, &u, &pol, 0, 1000, &mut SeedTree::new(3).stream(&[])).unwrap();
        assert_eq!(again, twice);
        assert!(mc_policy_value(&mdp, &u, &pol, 0, 0, &mut SeedTree::new(3).stream(&[])).is_err());
    }
}
