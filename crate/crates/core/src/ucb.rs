//! Episodic learning with Hoeffding bonuses.
//!
//! Each episode the learner rebuilds optimistic action values from its running
//! counts, acts greedily while tracking the cumulative reward on the grid, and
//! adds the observed transitions to its counts. Regret is scored exactly by
//! evaluating each episode's greedy policy in the discretized environment.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dp::{
    backward_induction, evaluate_policy, mc_policy_value, solve_optimal, CellRule, McEstimate,
    PlanningModel, QTable,
};
use crate::error::{Error, Result};
use crate::grid::{discretize, lift_policy, Grid};
use crate::mdp::{sample_step, StepRecord, TabularRSMDP, Trajectory};
use crate::rng::{tag, SeedTree};
use crate::utility::UtilityFn;

/// Upper bound on the grid resolution chosen by [`recommended_eps`].
pub const MAX_AUTO_GRID_M: usize = 4096;

/// Slack below which an optimism audit counts a violation.
pub const OPTIMISM_TOL: f64 = 1e-9;

/// Exploration bonus `sqrt(H^2 kappa^2 iota2 / N)` for a pair visited `N >= 1` times.
pub fn bonus(visits: u64, horizon: usize, kappa: f64, iota2: f64) -> f64 {
    debug_assert!(visits >= 1, "bonus is only defined for visited pairs");
    let h = horizon as f64;
    (h * h * kappa * kappa * iota2 / visits as f64).sqrt()
}

/// `log(16 H^2 S A K / (p eps))`.
pub fn iota2(horizon: usize, states: usize, actions: usize, episodes: usize, p: f64, eps: f64) -> f64 {
    let h = horizon as f64;
    (16.0 * h * h * states as f64 * actions as f64 * episodes as f64 / (p * eps)).ln()
}

/// Grid resolution `m = round(1/eps)` for `eps = sqrt(H^2 S^2 A / (T kappa (lambda + eta)))`,
/// with `eps` clamped to at most 1 and `m` to at most [`MAX_AUTO_GRID_M`].
pub fn recommended_eps(
    horizon: usize,
    states: usize,
    actions: usize,
    steps: usize,
    kappa: f64,
    lambda: f64,
    eta: f64,
) -> usize {
    let (h, s) = (horizon as f64, states as f64);
    let eps = (h * h * s * s * actions as f64 / (steps as f64 * kappa * (lambda + eta)))
        .sqrt()
        .min(1.0);
    if eps.is_nan() || eps <= 0.0 {
        return MAX_AUTO_GRID_M;
    }
    ((1.0 / eps).round() as usize).clamp(1, MAX_AUTO_GRID_M)
}

/// How the first state of each episode is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    Fixed(usize),
    /// Categorical distribution over states, sampled from the episode stream.
    Distribution(Vec<f64>),
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Fixed(0)
    }
}

impl InitialState {
    pub fn validate(&self, states: usize) -> Result<()> {
        match self {
            InitialState::Fixed(s) if *s >= states => Err(Error::IndexOutOfRange {
                what: "initial state",
                index: *s,
                limit: states,
            }),
            InitialState::Distribution(p) => {
                let sum: f64 = p.iter().sum();
                if p.len() != states || p.iter().any(|x| x.is_nan() || *x < 0.0) || (sum - 1.0).abs() > 1e-9 {
                    Err(Error::InvalidParam(format!(
                        "initial distribution must be {states} nonnegative weights summing to 1"
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Probability of each start state.
    pub fn weights(&self, states: usize) -> Vec<f64> {
        match self {
            InitialState::Fixed(s) => {
                let mut w = vec![0.0; states];
                w[*s] = 1.0;
                w
            }
            InitialState::Distribution(p) => p.clone(),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            InitialState::Fixed(s) => *s,
            InitialState::Distribution(p) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut last = 0;
                for (i, &w) in p.iter().enumerate() {
                    if w <= 0.0 {
                        continue;
                    }
                    acc += w;
                    last = i;
                    if u < acc {
                        return i;
                    }
                }
                last
            }
        }
    }
}

/// Sufficient statistics of all transitions observed so far.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    grid: Grid,
    states: usize,
    actions: usize,
    /// `(step, s, a, s')` counts.
    n_sas: Vec<u64>,
    /// `(step, s, a)` counts.
    n_sa: Vec<u64>,
    /// `(step, s, a, reward index)` counts of projected rewards.
    reward_hist: Vec<u64>,
    /// Normalized estimates, kept in sync with the counts.
    p_hat: Vec<f64>,
    r_hat: Vec<f64>,
    episode: usize,
}

/// One observed transition to add to the counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountUpdate {
    pub step: usize,
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
    pub reward_index: usize,
}

impl LearnerState {
    pub fn new(grid: Grid, states: usize, actions: usize) -> Self {
        let cells = grid.horizon() * states * actions;
        let n_r = grid.reward_points();
        Self {
            grid,
            states,
            actions,
            n_sas: vec![0; cells * states],
            n_sa: vec![0; cells],
            reward_hist: vec![0; cells * n_r],
            p_hat: vec![0.0; cells * states],
            r_hat: vec![0.0; cells * n_r],
            episode: 0,
        }
    }

    fn cell(&self, step: usize, s: usize, a: usize) -> usize {
        (step * self.states + s) * self.actions + a
    }

    /// Completed episodes.
    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn visits(&self, step: usize, s: usize, a: usize) -> u64 {
        self.n_sa[self.cell(step, s, a)]
    }

    pub fn transition_count(&self, step: usize, s: usize, a: usize, s_next: usize) -> u64 {
        self.n_sas[self.cell(step, s, a) * self.states + s_next]
    }

    pub fn reward_counts(&self, step: usize, s: usize, a: usize) -> &[u64] {
        let n_r = self.grid.reward_points();
        let c = self.cell(step, s, a) * n_r;
        &self.reward_hist[c..c + n_r]
    }

    /// Pairs visited at `step`.
    pub fn visited(&self, step: usize) -> Vec<(usize, usize)> {
        (0..self.states)
            .flat_map(|s| (0..self.actions).map(move |a| (s, a)))
            .filter(|&(s, a)| self.visits(step, s, a) > 0)
            .collect()
    }

    /// Adds one episode's transitions.
    pub fn apply(&mut self, updates: &[CountUpdate]) {
        let n_r = self.grid.reward_points();
        for u in updates {
            let c = self.cell(u.step, u.state, u.action);
            self.n_sa[c] += 1;
            self.n_sas[c * self.states + u.next_state] += 1;
            self.reward_hist[c * n_r + u.reward_index] += 1;
            let n = self.n_sa[c] as f64;
            for (dst, &cnt) in self.p_hat[c * self.states..(c + 1) * self.states]
                .iter_mut()
                .zip(&self.n_sas[c * self.states..(c + 1) * self.states])
            {
                *dst = cnt as f64 / n;
            }
            for (dst, &cnt) in self.r_hat[c * n_r..(c + 1) * n_r]
                .iter_mut()
                .zip(&self.reward_hist[c * n_r..(c + 1) * n_r])
            {
                *dst = cnt as f64 / n;
            }
        }
        self.episode += 1;
    }
}

impl PlanningModel for LearnerState {
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

/// Optimistic backward induction on `model`. Visited pairs get the expected
/// next value plus the bonus for their visit count, capped at `H kappa`;
/// unvisited pairs get `H kappa`.
pub fn optimistic_plan<M: PlanningModel + ?Sized>(
    model: &M,
    u: &UtilityFn,
    visits: impl Fn(usize, usize, usize) -> u64,
    iota2: f64,
) -> Result<QTable> {
    let horizon = model.grid().horizon();
    let kappa = u.kappa();
    let cap = horizon as f64 * kappa;
    let (_, q, _) = backward_induction(model, u, |h, s, a| match visits(h, s, a) {
        0 => CellRule::Fixed(cap),
        n => CellRule::Backup {
            bonus: bonus(n, horizon, kappa, iota2),
            cap: Some(cap),
        },
    })?;
    Ok(q)
}

/// Optimistic action values from the learner's counts.
pub fn ucb_plan(
    state: &LearnerState,
    u: &UtilityFn,
    grid: Grid,
    p: f64,
    episodes: usize,
) -> Result<QTable> {
    if grid != state.grid {
        return Err(Error::InvalidParam("learner state uses a different grid".into()));
    }
    let i2 = iota2(grid.horizon(), state.states, state.actions, episodes, p, grid.eps());
    optimistic_plan(state, u, |h, s, a| state.visits(h, s, a), i2)
}

/// A finished episode and the counts it contributes.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub trajectory: Trajectory,
    pub updates: Vec<CountUpdate>,
}

/// Plays one episode greedily with respect to `q`, advancing the cumulative
/// reward on the grid by the projected reward of each step.
pub fn run_episode<R: Rng + ?Sized>(
    mdp: &TabularRSMDP,
    s1: usize,
    q: &QTable,
    grid: Grid,
    episode: usize,
    rng: &mut R,
) -> Result<EpisodeOutcome> {
    let mut s = s1;
    let mut y = 0usize;
    let mut steps = Vec::with_capacity(mdp.horizon());
    let mut cumulative = Vec::with_capacity(mdp.horizon());
    let mut updates = Vec::with_capacity(mdp.horizon());
    for h in 0..mdp.horizon() {
        cumulative.push(grid.value(y));
        let a = q.greedy_action(h, s, y);
        let (s2, r) = sample_step(mdp, s, a, h, rng)?;
        let ri = grid.project_r(r)?;
        steps.push(StepRecord {
            step: h,
            state: s,
            action: a,
            reward: r,
            reward_index: Some(ri),
            next_state: s2,
        });
        updates.push(CountUpdate {
            step: h,
            state: s,
            action: a,
            next_state: s2,
            reward_index: ri,
        });
        s = s2;
        y += ri;
    }
    Ok(EpisodeOutcome {
        trajectory: Trajectory {
            episode,
            steps,
            cumulative,
        },
        updates,
    })
}

/// Optional Monte Carlo scoring of episodes in the original environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McScoring {
    pub trials: usize,
    /// Score episodes whose 1-based index is a multiple of this.
    pub every: usize,
    /// The reference optimum is solved on a grid this many times finer
    /// (see [`Grid::refined`]).
    pub fine_multiplier: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UcbOptions {
    pub initial: InitialState,
    /// Compare the optimistic values against the exact optimum every episode.
    pub audit_optimism: bool,
    pub mc: Option<McScoring>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimismAudit {
    /// Smallest `Q_hat - Q_star` over all audited entries.
    pub min_gap: f64,
    /// Episodes in which some entry fell below `Q_star - OPTIMISM_TOL`.
    pub violating_episodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    /// 1-based episode index.
    pub k: usize,
    pub s1: usize,
    pub v_opt: f64,
    pub v_pik: f64,
    pub regret: f64,
    pub cum_regret: f64,
    pub mc: Option<McEstimate>,
    /// Fine-grid optimum standing in for the original-environment optimum.
    pub v_opt_fine: Option<f64>,
}

/// Per-episode values and regret of one learning run.
#[derive(Debug, Clone)]
pub struct RegretTrace {
    pub records: Vec<EpisodeRecord>,
    pub seed: u64,
    pub m: usize,
    pub episodes: usize,
    pub p: f64,
    pub iota2: f64,
    pub optimism: Option<OptimismAudit>,
    pub final_state: LearnerState,
    /// Wall time of each episode in milliseconds; excluded from equality.
    pub wall_ms: Vec<f64>,
}

impl PartialEq for RegretTrace {
    fn eq(&self, o: &Self) -> bool {
        self.records == o.records
            && self.seed == o.seed
            && self.m == o.m
            && self.episodes == o.episodes
            && self.p == o.p
            && self.iota2 == o.iota2
            && self.optimism == o.optimism
            && self.final_state == o.final_state
    }
}

impl RegretTrace {
    pub fn cumulative_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_regret)
    }

    /// Mean per-episode regret over episodes `from..to` (0-based, half-open).
    pub fn mean_regret(&self, from: usize, to: usize) -> f64 {
        let slice = &self.records[from..to];
        slice.iter().map(|r| r.regret).sum::<f64>() / slice.len() as f64
    }
}

/// Runs `episodes` episodes of optimistic learning and scores each episode's
/// greedy policy against the exact optimum of the discretized environment.
pub fn vigu_ucb(
    mdp: &TabularRSMDP,
    u: &UtilityFn,
    grid: Grid,
    episodes: usize,
    p: f64,
    seeds: &SeedTree,
    opts: &UcbOptions,
) -> Result<RegretTrace> {
    if episodes == 0 {
        return Err(Error::InvalidParam("need at least one episode".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParam(format!("failure probability must lie in (0, 1), got {p}")));
    }
    opts.initial.validate(mdp.states())?;
    let denv = discretize(mdp, grid)?;
    let (v_star, q_star, _) = solve_optimal(&denv, u)?;
    let fine_opt = match opts.mc {
        Some(mc) => {
            let fine = grid.refined(mc.fine_multiplier);
            let (vf, _, _) = solve_optimal(&discretize(mdp, fine)?, u)?;
            Some(vf)
        }
        None => None,
    };

    let i2 = iota2(grid.horizon(), mdp.states(), mdp.actions(), episodes, p, grid.eps());
    let mut state = LearnerState::new(grid, mdp.states(), mdp.actions());
    let mut rng = seeds.stream(&[tag::UCB_EPISODES]);
    let mut records = Vec::with_capacity(episodes);
    let mut wall_ms = Vec::with_capacity(episodes);
    let mut audit = opts.audit_optimism.then_some(OptimismAudit {
        min_gap: f64::INFINITY,
        violating_episodes: 0,
    });
    let mut cum = 0.0;
    for k in 1..=episodes {
        let started = Instant::now();
        let q = optimistic_plan(&state, u, |h, s, a| state.visits(h, s, a), i2)?;
        if let Some(a) = audit.as_mut() {
            let gap = q.min_diff(&q_star);
            a.min_gap = a.min_gap.min(gap);
            if gap < -OPTIMISM_TOL {
                a.violating_episodes += 1;
            }
        }
        let s1 = opts.initial.sample(&mut rng);
        let pol = q.greedy_policy();
        let v_pik = evaluate_policy(&denv, u, &pol)?.get(0, s1, 0);
        let v_opt = v_star.get(0, s1, 0);
        let regret = v_opt - v_pik;
        cum += regret;

        let (mc, v_opt_fine) = match (opts.mc, &fine_opt) {
            (Some(mc), Some(vf)) if k % mc.every.max(1) == 0 => {
                let lifted = lift_policy(&pol, grid)?;
                let mut mc_rng = seeds.stream(&[tag::UCB_MC, k as u64]);
                let est = mc_policy_value(mdp, u, &lifted, s1, mc.trials, &mut mc_rng)?;
                (Some(est), Some(vf.get(0, s1, 0)))
            }
            _ => (None, None),
        };

        let outcome = run_episode(mdp, s1, &q, grid, k, &mut rng)?;
        state.apply(&outcome.updates);
        records.push(EpisodeRecord {
            k,
            s1,
            v_opt,
            v_pik,
            regret,
            cum_regret: cum,
            mc,
            v_opt_fine,
        });
        wall_ms.push(started.elapsed().as_secs_f64() * 1e3);
    }
    Ok(RegretTrace {
        records,
        seed: seeds.master(),
        m: grid.m(),
        episodes,
        p,
        iota2: i2,
        optimism: audit,
        final_state: state,
        wall_ms,
    })
}
