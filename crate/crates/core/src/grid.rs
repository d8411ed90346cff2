//! Uniform grids over single-step and cumulative rewards, nearest-point
//! projections, the binned reward kernel, and the maps between grid objects and
//! continuous-`y` objects.
//!
//! The spacing is `1/m` for an integer `m`, so a grid point is an integer index
//! and adding a reward index to a cumulative-reward index is exact.

use crate::error::{Error, Result};
use crate::mdp::{reward_mass, TabularRSMDP};

/// Tolerated overshoot outside a projection's domain.
pub const PROJECTION_SLACK: f64 = 1e-9;

/// Largest resolution [`Grid::refined`] will produce.
pub const MAX_FINE_GRID_M: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    m: usize,
    horizon: usize,
}

impl Grid {
    pub fn new(m: usize, horizon: usize) -> Result<Self> {
        if m == 0 || horizon == 0 {
            return Err(Error::InvalidParam(format!(
                "grid needs m >= 1 and horizon >= 1, got m={m}, horizon={horizon}"
            )));
        }
        Ok(Self { m, horizon })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// A reference grid `factor` times finer, capped at [`MAX_FINE_GRID_M`]
    /// and never coarser than `self`.
    pub fn refined(&self, factor: usize) -> Grid {
        let m = self.m.saturating_mul(factor.max(1)).min(MAX_FINE_GRID_M).max(self.m);
        Grid { m, horizon: self.horizon }
    }

    /// Grid spacing `1/m`.
    pub fn eps(&self) -> f64 {
        1.0 / self.m as f64
    }

    /// Number of single-step reward points, `m + 1`.
    pub fn reward_points(&self) -> usize {
        self.m + 1
    }

    /// Number of cumulative-reward points at `step` (`0..=H`), `step * m + 1`.
    pub fn y_points(&self, step: usize) -> usize {
        step * self.m + 1
    }

    /// Value of grid index `i`, exactly `i / m`.
    pub fn value(&self, i: usize) -> f64 {
        i as f64 / self.m as f64
    }

    fn nearest(&self, x: f64, top: usize) -> usize {
        // Nearest index to x*m; exact half-way points go to the smaller index.
        let scaled = x * self.m as f64;
        let i = (scaled - 0.5).ceil();
        if i <= 0.0 {
            0
        } else {
            (i as usize).min(top)
        }
    }

    /// Index of the grid point of `{0, 1/m, ..., 1}` nearest to `r`.
    pub fn project_r(&self, r: f64) -> Result<usize> {
        if !(-PROJECTION_SLACK..=1.0 + PROJECTION_SLACK).contains(&r) {
            return Err(Error::OutOfDomain {
                value: r,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(self.nearest(r, self.m))
    }

    /// Index of the cumulative-reward grid point at `step` nearest to `y`,
    /// for `y` in `[0, step]`.
    pub fn project_y(&self, step: usize, y: f64) -> Result<usize> {
        if step > self.horizon {
            return Err(Error::IndexOutOfRange {
                what: "step",
                index: step,
                limit: self.horizon + 1,
            });
        }
        let hi = step as f64;
        if !(y >= -PROJECTION_SLACK && y <= hi + PROJECTION_SLACK) {
            return Err(Error::OutOfDomain { value: y, lo: 0.0, hi });
        }
        Ok(self.nearest(y, step * self.m))
    }
}

/// The environment with each reward distribution replaced by its bin masses
/// on the reward grid. The joint kernel over `(s', y')` is the product of the
/// transition row and the bin masses of `y' - y`, so it is translation
/// invariant in `y` by construction.
#[derive(Debug, Clone)]
pub struct DiscretizedEnv<'a> {
    grid: Grid,
    mdp: &'a TabularRSMDP,
    /// Flattened `(step, s, a, reward index)`.
    bar_r: Vec<f64>,
}

/// Bins each reward distribution of `mdp` onto the reward grid. Bin `i`
/// integrates `[i/m - 1/(2m), i/m + 1/(2m)]` intersected with `[0, 1]`.
pub fn discretize(mdp: &TabularRSMDP, grid: Grid) -> Result<DiscretizedEnv<'_>> {
    if grid.horizon() != mdp.horizon() {
        return Err(Error::InvalidParam(format!(
            "grid horizon {} does not match MDP horizon {}",
            grid.horizon(),
            mdp.horizon()
        )));
    }
    let half = 0.5 * grid.eps();
    let n_r = grid.reward_points();
    let mut bar_r = Vec::with_capacity(mdp.horizon() * mdp.states() * mdp.actions() * n_r);
    for h in 0..mdp.horizon() {
        for s in 0..mdp.states() {
            for a in 0..mdp.actions() {
                let dist = mdp.reward(h, s, a);
                for i in 0..n_r {
                    let c = grid.value(i);
                    bar_r.push(reward_mass(dist, c - half, c + half)?);
                }
            }
        }
    }
    Ok(DiscretizedEnv { grid, mdp, bar_r })
}

impl<'a> DiscretizedEnv<'a> {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn mdp(&self) -> &'a TabularRSMDP {
        self.mdp
    }

    /// Bin masses of the reward at `(step, s, a)`.
    pub fn reward_bins(&self, step: usize, s: usize, a: usize) -> &[f64] {
        let n_r = self.grid.reward_points();
        let c = ((step * self.mdp.states() + s) * self.mdp.actions() + a) * n_r;
        &self.bar_r[c..c + n_r]
    }

    /// Joint kernel `P(s', y' | s, y, a)` at `step` on grid indices; zero when
    /// `y' - y` is not a reward index.
    pub fn joint_kernel(&self, step: usize, s: usize, y: usize, a: usize, s_next: usize, y_next: usize) -> f64 {
        match y_next.checked_sub(y) {
            Some(d) if d < self.grid.reward_points() => {
                self.mdp.transition(step, s, a)[s_next] * self.reward_bins(step, s, a)[d]
            }
            _ => 0.0,
        }
    }
}

/// Deterministic Markov policy on the grid: an action for every `(step, s, y index)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscretePolicy {
    grid: Grid,
    states: usize,
    /// `layers[step][s * y_points(step) + y]`.
    layers: Vec<Vec<usize>>,
}

impl DiscretePolicy {
    pub(crate) fn from_layers(grid: Grid, states: usize, layers: Vec<Vec<usize>>) -> Self {
        debug_assert_eq!(layers.len(), grid.horizon());
        Self { grid, states, layers }
    }

    /// The policy that plays `action` everywhere.
    pub fn constant(grid: Grid, states: usize, action: usize) -> Self {
        let layers = (0..grid.horizon())
            .map(|h| vec![action; states * grid.y_points(h)])
            .collect();
        Self { grid, states, layers }
    }

    /// Builds a policy from a rule over `(step, s, y index)`.
    pub fn from_fn(grid: Grid, states: usize, mut f: impl FnMut(usize, usize, usize) -> usize) -> Self {
        let layers = (0..grid.horizon())
            .map(|h| {
                let ny = grid.y_points(h);
                (0..states * ny).map(|c| f(h, c / ny, c % ny)).collect()
            })
            .collect();
        Self { grid, states, layers }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn action(&self, step: usize, s: usize, y: usize) -> usize {
        self.layers[step][s * self.grid.y_points(step) + y]
    }

    pub fn max_action(&self) -> usize {
        self.layers.iter().flatten().copied().max().unwrap_or(0)
    }
}

/// A policy over the continuous enlarged state `(step, s, y)`.
pub trait ContinuousPolicy {
    fn act(&self, step: usize, s: usize, y: f64) -> Result<usize>;
}

/// A grid policy extended to continuous `y` by projecting `y` before lookup.
#[derive(Debug, Clone)]
pub struct LiftedPolicy {
    policy: DiscretePolicy,
}

impl LiftedPolicy {
    pub fn inner(&self) -> &DiscretePolicy {
        &self.policy
    }
}

impl ContinuousPolicy for LiftedPolicy {
    fn act(&self, step: usize, s: usize, y: f64) -> Result<usize> {
        let grid = self.policy.grid();
        let yi = grid.project_y(step, y)?;
        Ok(self.policy.action(step, s, yi))
    }
}

pub fn lift_policy(pol: &DiscretePolicy, grid: Grid) -> Result<LiftedPolicy> {
    if pol.grid() != grid {
        return Err(Error::InvalidParam("policy was built on a different grid".into()));
    }
    Ok(LiftedPolicy { policy: pol.clone() })
}

/// A grid value table extended to continuous `y` by nearest-point projection.
#[derive(Debug, Clone)]
pub struct LiftedValue<'v> {
    table: &'v crate::dp::ValueTable,
    grid: Grid,
}

impl LiftedValue<'_> {
    pub fn value(&self, step: usize, s: usize, y: f64) -> Result<f64> {
        let yi = self.grid.project_y(step, y)?;
        Ok(self.table.get(step, s, yi))
    }
}

pub fn lift_value(v: &crate::dp::ValueTable, grid: Grid) -> Result<LiftedValue<'_>> {
    if v.grid() != grid {
        return Err(Error::InvalidParam("value table was built on a different grid".into()));
    }
    Ok(LiftedValue { table: v, grid })
}
