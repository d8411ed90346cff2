//! The tabular risk-sensitive MDP, its reward distributions and the sampling simulator.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedTree;

/// Tolerance on transition row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Tolerance on the total mass of a reward density.
pub const DENSITY_MASS_TOL: f64 = 1e-9;

/// Reward distribution on `[0, 1]`.
///
/// Continuous families are sampled by analytic inverse CDF. `GridPointMass` has
/// no density and exists for exact-arithmetic tests only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RewardDist {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Density given by linear interpolation of `(r, f(r))` knots, zero outside them.
    PiecewiseLinearDensity {
        knots: Vec<(f64, f64)>,
    },
    GridPointMass {
        r: f64,
    },
}

impl RewardDist {
    pub fn uniform01() -> Self {
        RewardDist::Uniform { lo: 0.0, hi: 1.0 }
    }

    /// Symmetric triangular density on `[center - half_width, center + half_width]`.
    pub fn triangular(center: f64, half_width: f64) -> Self {
        RewardDist::PiecewiseLinearDensity {
            knots: vec![
                (center - half_width, 0.0),
                (center, 1.0 / half_width),
                (center + half_width, 0.0),
            ],
        }
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, RewardDist::GridPointMass { .. })
    }

    /// Lipschitz constant of the density on `[0, 1]`; infinite where the
    /// density jumps inside `[0, 1]` or does not exist.
    pub fn lambda(&self) -> f64 {
        match self {
            RewardDist::Uniform { lo, hi } => {
                if *lo <= 0.0 && *hi >= 1.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            RewardDist::PiecewiseLinearDensity { knots } => {
                let (r0, f0) = knots[0];
                let (rn, fn_) = knots[knots.len() - 1];
                if (r0 > 0.0 && f0 > 0.0) || (rn < 1.0 && fn_ > 0.0) {
                    return f64::INFINITY;
                }
                knots
                    .windows(2)
                    .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
                    .fold(0.0, f64::max)
            }
            RewardDist::GridPointMass { .. } => f64::INFINITY,
        }
    }

    /// Supremum of the density.
    pub fn eta(&self) -> f64 {
        match self {
            RewardDist::Uniform { lo, hi } => 1.0 / (hi - lo),
            RewardDist::PiecewiseLinearDensity { knots } => {
                knots.iter().map(|k| k.1).fold(0.0, f64::max)
            }
            RewardDist::GridPointMass { .. } => f64::INFINITY,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            RewardDist::Uniform { lo, hi } => 0.5 * (lo + hi),
            RewardDist::PiecewiseLinearDensity { knots } => knots
                .windows(2)
                .map(|w| {
                    let ((x0, f0), (x1, f1)) = (w[0], w[1]);
                    // integral of x f(x) over a linear segment
                    (x1 - x0) * (f0 * (2.0 * x0 + x1) + f1 * (x0 + 2.0 * x1)) / 6.0
                })
                .sum(),
            RewardDist::GridPointMass { r } => *r,
        }
    }

    /// `P(R <= x)` for continuous families.
    fn cdf(&self, x: f64) -> f64 {
        match self {
            RewardDist::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            RewardDist::PiecewiseLinearDensity { knots } => {
                let mut acc = 0.0;
                for w in knots.windows(2) {
                    let ((x0, f0), (x1, f1)) = (w[0], w[1]);
                    if x <= x0 {
                        break;
                    }
                    let t = x.min(x1) - x0;
                    let slope = (f1 - f0) / (x1 - x0);
                    acc += f0 * t + 0.5 * slope * t * t;
                    if x < x1 {
                        break;
                    }
                }
                acc
            }
            RewardDist::GridPointMass { r } => {
                if x >= *r {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Smallest `r` with `cdf(r) >= p`, for `p` in `[0, 1)`.
    fn inverse_cdf(&self, p: f64) -> f64 {
        match self {
            RewardDist::Uniform { lo, hi } => lo + p * (hi - lo),
            RewardDist::PiecewiseLinearDensity { knots } => {
                let mut acc = 0.0;
                let mut last = knots[0].0;
                for w in knots.windows(2) {
                    let ((x0, f0), (x1, f1)) = (w[0], w[1]);
                    let seg = 0.5 * (f0 + f1) * (x1 - x0);
                    if seg > 0.0 {
                        last = x1;
                    }
                    if acc + seg > p && seg > 0.0 {
                        let target = p - acc;
                        let slope = (f1 - f0) / (x1 - x0);
                        // Solve f0 d + slope d^2 / 2 = target for d in [0, x1 - x0].
                        let disc = (f0 * f0 + 2.0 * slope * target).max(0.0);
                        let denom = f0 + disc.sqrt();
                        let d = if denom > 0.0 { 2.0 * target / denom } else { 0.0 };
                        return (x0 + d).clamp(x0, x1);
                    }
                    acc += seg;
                }
                last
            }
            RewardDist::GridPointMass { r } => *r,
        }
        .clamp(0.0, 1.0)
    }

    fn violations(&self, at: &str) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            RewardDist::Uniform { lo, hi } => {
                if !(0.0 <= *lo && lo < hi && *hi <= 1.0) {
                    out.push(format!("reward {at}: uniform support [{lo}, {hi}] not inside [0, 1]"));
                }
            }
            RewardDist::PiecewiseLinearDensity { knots } => {
                if knots.len() < 2 {
                    out.push(format!("reward {at}: density needs at least two knots"));
                    return out;
                }
                for (i, &(r, f)) in knots.iter().enumerate() {
                    if !(0.0..=1.0).contains(&r) {
                        out.push(format!("reward {at}: knot {i} at r={r} outside [0, 1]"));
                    }
                    if !f.is_finite() || f < 0.0 {
                        out.push(format!("reward {at}: knot {i} at r={r} has negative density {f}"));
                    }
                }
                for (i, w) in knots.windows(2).enumerate() {
                    if w[1].0.partial_cmp(&w[0].0) != Some(std::cmp::Ordering::Greater) {
                        out.push(format!(
                            "reward {at}: knots {i} and {} are not strictly increasing in r",
                            i + 1
                        ));
                    }
                }
                if out.is_empty() {
                    let total = self.cdf(1.0);
                    if (total - 1.0).abs() > DENSITY_MASS_TOL {
                        out.push(format!("reward {at}: density integrates to {total}"));
                    }
                }
            }
            RewardDist::GridPointMass { r } => {
                if !(0.0..=1.0).contains(r) {
                    out.push(format!("reward {at}: point mass at {r} outside [0, 1]"));
                }
            }
        }
        out
    }
}

/// Exact probability mass the reward distribution puts on `[lo, hi]` intersected with `[0, 1]`.
///
/// Endpoints at or beyond the support boundary include the boundary itself.
/// Point masses use the half-open cell convention `(lo, hi]` of the reward
/// projection, so adjacent bins never both claim an atom.
pub fn reward_mass(dist: &RewardDist, lo: f64, hi: f64) -> Result<f64> {
    if lo > hi || lo.is_nan() || hi.is_nan() {
        return Err(Error::InvalidInterval { lo, hi });
    }
    let lo = if lo <= 0.0 { f64::NEG_INFINITY } else { lo };
    let hi = if hi >= 1.0 { f64::INFINITY } else { hi };
    Ok(match dist {
        RewardDist::GridPointMass { r } => {
            if *r > lo && *r <= hi {
                1.0
            } else {
                0.0
            }
        }
        _ => {
            let upper = if hi.is_infinite() { 1.0 } else { dist.cdf(hi) };
            let lower = if lo.is_infinite() { 0.0 } else { dist.cdf(lo) };
            (upper - lower).max(0.0)
        }
    })
}

/// Finite-horizon tabular MDP with continuous rewards on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularRSMDP {
    states: usize,
    actions: usize,
    horizon: usize,
    /// Flattened `(step, s, a, s')`.
    trans: Vec<f64>,
    /// Flattened `(step, s, a)`.
    rewards: Vec<RewardDist>,
    lambda_max: f64,
    eta_max: f64,
}

/// On-disk form of [`TabularRSMDP`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpJson {
    #[serde(rename = "S")]
    pub states: usize,
    #[serde(rename = "A")]
    pub actions: usize,
    #[serde(rename = "H")]
    pub horizon: usize,
    /// `trans[step][s][a][s']`.
    pub trans: Vec<Vec<Vec<Vec<f64>>>>,
    /// `rewards[step][s][a]`.
    pub rewards: Vec<Vec<Vec<RewardDist>>>,
}

impl TabularRSMDP {
    /// Builds the MDP without validation; see [`validate_mdp`].
    ///
    /// `trans` is flattened `(step, s, a, s')` and `rewards` is flattened `(step, s, a)`.
    pub fn new_unchecked(
        states: usize,
        actions: usize,
        horizon: usize,
        trans: Vec<f64>,
        rewards: Vec<RewardDist>,
    ) -> Self {
        let lambda_max = rewards.iter().map(RewardDist::lambda).fold(0.0, f64::max);
        let eta_max = rewards.iter().map(RewardDist::eta).fold(0.0, f64::max);
        Self {
            states,
            actions,
            horizon,
            trans,
            rewards,
            lambda_max,
            eta_max,
        }
    }

    /// Builds and validates the MDP.
    pub fn new(
        states: usize,
        actions: usize,
        horizon: usize,
        trans: Vec<f64>,
        rewards: Vec<RewardDist>,
    ) -> Result<Self> {
        let mdp = Self::new_unchecked(states, actions, horizon, trans, rewards);
        let v = validate_mdp(&mdp);
        if v.is_empty() {
            Ok(mdp)
        } else {
            Err(Error::InvalidMdp(v))
        }
    }

    pub fn from_json(j: &MdpJson) -> Result<Self> {
        let (s_n, a_n, h_n) = (j.states, j.actions, j.horizon);
        let shape_err = |what: &str| Error::InvalidMdp(vec![format!("{what} has the wrong shape for S={s_n}, A={a_n}, H={h_n}")]);
        if j.trans.len() != h_n || j.rewards.len() != h_n {
            return Err(shape_err("trans/rewards"));
        }
        let mut trans = Vec::with_capacity(h_n * s_n * a_n * s_n);
        let mut rewards = Vec::with_capacity(h_n * s_n * a_n);
        for (th, rh) in j.trans.iter().zip(&j.rewards) {
            if th.len() != s_n || rh.len() != s_n {
                return Err(shape_err("trans/rewards"));
            }
            for (ts, rs) in th.iter().zip(rh) {
                if ts.len() != a_n || rs.len() != a_n {
                    return Err(shape_err("trans/rewards"));
                }
                for (row, dist) in ts.iter().zip(rs) {
                    if row.len() != s_n {
                        return Err(shape_err("trans"));
                    }
                    trans.extend_from_slice(row);
                    rewards.push(dist.clone());
                }
            }
        }
        Self::new(s_n, a_n, h_n, trans, rewards)
    }

    pub fn to_json(&self) -> MdpJson {
        let (s_n, a_n) = (self.states, self.actions);
        MdpJson {
            states: s_n,
            actions: a_n,
            horizon: self.horizon,
            trans: (0..self.horizon)
                .map(|h| {
                    (0..s_n)
                        .map(|s| (0..a_n).map(|a| self.transition(h, s, a).to_vec()).collect())
                        .collect()
                })
                .collect(),
            rewards: (0..self.horizon)
                .map(|h| {
                    (0..s_n)
                        .map(|s| (0..a_n).map(|a| self.reward(h, s, a).clone()).collect())
                        .collect()
                })
                .collect(),
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Largest density Lipschitz constant over all `(step, s, a)`.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Largest density bound over all `(step, s, a)`.
    pub fn eta_max(&self) -> f64 {
        self.eta_max
    }

    fn cell(&self, step: usize, s: usize, a: usize) -> usize {
        (step * self.states + s) * self.actions + a
    }

    /// Next-state distribution at `(step, s, a)`.
    pub fn transition(&self, step: usize, s: usize, a: usize) -> &[f64] {
        let c = self.cell(step, s, a) * self.states;
        &self.trans[c..c + self.states]
    }

    pub fn reward(&self, step: usize, s: usize, a: usize) -> &RewardDist {
        &self.rewards[self.cell(step, s, a)]
    }

    /// True when every reward distribution has a density.
    pub fn has_densities(&self) -> bool {
        self.rewards.iter().all(RewardDist::is_continuous)
    }

    fn check_indices(&self, step: usize, s: usize, a: usize) -> Result<()> {
        let checks = [
            ("step", step, self.horizon),
            ("state", s, self.states),
            ("action", a, self.actions),
        ];
        for (what, index, limit) in checks {
            if index >= limit {
                return Err(Error::IndexOutOfRange { what, index, limit });
            }
        }
        Ok(())
    }
}

/// Every violated invariant of `mdp`, each naming its `(step, s, a)` cell.
/// An empty list means the MDP is well formed.
pub fn validate_mdp(mdp: &TabularRSMDP) -> Vec<String> {
    let mut out = Vec::new();
    let (s_n, a_n, h_n) = (mdp.states, mdp.actions, mdp.horizon);
    if s_n == 0 || a_n == 0 || h_n == 0 {
        out.push(format!("empty dimensions S={s_n}, A={a_n}, H={h_n}"));
        return out;
    }
    if mdp.trans.len() != h_n * s_n * a_n * s_n {
        out.push(format!(
            "transition table has {} entries, expected {}",
            mdp.trans.len(),
            h_n * s_n * a_n * s_n
        ));
        return out;
    }
    if mdp.rewards.len() != h_n * s_n * a_n {
        out.push(format!(
            "reward table has {} entries, expected {}",
            mdp.rewards.len(),
            h_n * s_n * a_n
        ));
        return out;
    }
    for h in 0..h_n {
        for s in 0..s_n {
            for a in 0..a_n {
                let at = format!("(h={h},s={s},a={a})");
                let row = mdp.transition(h, s, a);
                if let Some(i) = row.iter().position(|p| !p.is_finite() || *p < 0.0) {
                    out.push(format!("transition row {at} has invalid entry {} at s'={i}", row[i]));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    out.push(format!("transition row {at} sums to {sum}"));
                }
                out.extend(mdp.reward(h, s, a).violations(&at));
            }
        }
    }
    out
}

fn categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// One simulator call: next state and reward at `(step, s, a)`.
pub fn sample_step<R: Rng + ?Sized>(
    mdp: &TabularRSMDP,
    s: usize,
    a: usize,
    step: usize,
    rng: &mut R,
) -> Result<(usize, f64)> {
    mdp.check_indices(step, s, a)?;
    let next = categorical(mdp.transition(step, s, a), rng);
    let u: f64 = rng.random();
    let r = mdp.reward(step, s, a).inverse_cdf(u);
    Ok((next, r))
}

/// One transition of a rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    /// Grid index of the projected reward, when the rollout tracks the grid.
    pub reward_index: Option<usize>,
    pub next_state: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub episode: usize,
    pub steps: Vec<StepRecord>,
    /// Cumulative reward at the start of each step; `cumulative[0] == 0`.
    pub cumulative: Vec<f64>,
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|r| r.reward).sum()
    }
}

/// Built-in benchmark environments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// States `0..length` on a line. Action 0 drifts left, action 1 moves right
    /// at a small reward cost; rewards grow toward the right end.
    Chain { length: usize, horizon: usize },
    /// Dirichlet(1) transition rows and random piecewise-linear reward densities.
    Random {
        states: usize,
        actions: usize,
        horizon: usize,
        seed: u64,
    },
    /// One state, two arms with mean 0.5: a concentrated triangular arm
    /// (action 0) and a uniform arm (action 1).
    SafeRiskyBandit {
        #[serde(default = "default_bandit_horizon")]
        horizon: usize,
    },
}

fn default_bandit_horizon() -> usize {
    1
}

/// Half-width of the chain's triangular reward densities.
const CHAIN_HALF_WIDTH: f64 = 0.1;

/// Builds a validated benchmark MDP.
pub fn gen_mdp(spec: &GeneratorSpec) -> Result<TabularRSMDP> {
    match *spec {
        GeneratorSpec::Chain { length, horizon } => {
            if length < 2 || horizon == 0 {
                return Err(Error::InvalidParam(format!(
                    "chain needs length >= 2 and horizon >= 1, got length {length}, horizon {horizon}"
                )));
            }
            let (s_n, a_n) = (length, 2);
            let mut trans = Vec::with_capacity(horizon * s_n * a_n * s_n);
            let mut rewards = Vec::with_capacity(horizon * s_n * a_n);
            for _ in 0..horizon {
                for s in 0..s_n {
                    for a in 0..a_n {
                        let mut row = vec![0.0; s_n];
                        let (target, p_move) = if a == 0 {
                            (s.saturating_sub(1), 0.9)
                        } else {
                            ((s + 1).min(s_n - 1), 0.7)
                        };
                        row[target] += p_move;
                        row[s] += 1.0 - p_move;
                        trans.extend(row);
                        let center =
                            0.25 + 0.5 * s as f64 / (s_n - 1) as f64 - 0.15 * a as f64;
                        rewards.push(RewardDist::triangular(center, CHAIN_HALF_WIDTH));
                    }
                }
            }
            TabularRSMDP::new(s_n, a_n, horizon, trans, rewards)
        }
        GeneratorSpec::Random {
            states,
            actions,
            horizon,
            seed,
        } => {
            if states == 0 || actions == 0 || horizon == 0 {
                return Err(Error::InvalidParam("random MDP needs positive S, A, H".into()));
            }
            let mut rng = SeedTree::new(seed).stream(&[crate::rng::tag::ENV_GEN]);
            let mut trans = Vec::with_capacity(horizon * states * actions * states);
            let mut rewards = Vec::with_capacity(horizon * states * actions);
            for _ in 0..horizon * states * actions {
                let raw: Vec<f64> = (0..states)
                    .map(|_| -(1.0 - rng.random::<f64>()).ln())
                    .collect();
                let total: f64 = raw.iter().sum();
                trans.extend(raw.iter().map(|x| x / total));
                rewards.push(random_density(&mut rng));
            }
            TabularRSMDP::new(states, actions, horizon, trans, rewards)
        }
        GeneratorSpec::SafeRiskyBandit { horizon } => {
            if horizon == 0 {
                return Err(Error::InvalidParam("bandit horizon must be >= 1".into()));
            }
            let mut rewards = Vec::with_capacity(2 * horizon);
            for _ in 0..horizon {
                rewards.push(RewardDist::triangular(0.5, 0.25));
                rewards.push(RewardDist::uniform01());
            }
            TabularRSMDP::new(1, 2, horizon, vec![1.0; 2 * horizon], rewards)
        }
    }
}

/// Piecewise-linear density on four equal segments with random heights.
fn random_density<R: Rng + ?Sized>(rng: &mut R) -> RewardDist {
    let heights: Vec<f64> = (0..5).map(|_| 0.25 + 1.5 * rng.random::<f64>()).collect();
    // trapezoid rule on segments of width 1/4
    let area: f64 = heights.windows(2).map(|w| 0.125 * (w[0] + w[1])).sum();
    RewardDist::PiecewiseLinearDensity {
        knots: heights
            .iter()
            .enumerate()
            .map(|(i, f)| (i as f64 * 0.25, f / area))
            .collect(),
    }
}
