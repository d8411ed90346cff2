//! Tabular risk-sensitive reinforcement learning under general utility functions.
//!
//! The objective is `E[U(r_1 + ... + r_H)]` for a continuous, strictly increasing
//! utility `U`. Augmenting the state with the cumulative reward `y` restores the
//! Bellman equation; `y` is then discretized on a uniform grid of spacing `1/m`
//! so that planning is exact tabular dynamic programming.
//!
//! Steps are 0-based throughout the API: at step `t` (`0 <= t < H`) the
//! cumulative reward lies in `[0, t]`, and step `H` is the terminal layer where
//! the value is `U(y)`.
//!
//! Modules:
//! - [`utility`]: utility families and their Lipschitz coefficients.
//! - [`mdp`]: the tabular environment, reward distributions and the simulator.
//! - [`grid`]: the cumulative-reward grid, projections and the discretized kernel.
//! - [`dp`]: exact planning, policy evaluation and Monte Carlo evaluation.
//! - [`vigu`]: simulator-based value iteration.
//! - [`ucb`]: episodic learning with Hoeffding bonuses and regret accounting.
//! - [`harness`]: experiment configuration, orchestration and CSV output.

pub mod dp;
pub mod error;
pub mod grid;
pub mod harness;
pub mod mdp;
pub mod rng;
pub mod ucb;
pub mod utility;
pub mod vigu;

pub use dp::{
    brute_force_history_optimum, evaluate_policy, mc_policy_value, solve_optimal,
    HistoryPolicyValue, McEstimate, QTable, ValueTable,
};
pub use error::{Error, Result};
pub use grid::{discretize, lift_policy, lift_value, DiscretePolicy, DiscretizedEnv, Grid};
pub use harness::{load_config, run_experiment, write_csv, ExperimentConfig, ExperimentOutput, ResultRow};
pub use mdp::{gen_mdp, reward_mass, sample_step, GeneratorSpec, RewardDist, TabularRSMDP};
pub use rng::SeedTree;
pub use ucb::{bonus, recommended_eps, vigu_ucb, RegretTrace, UcbOptions};
pub use utility::{make_utility, UtilityFn, UtilitySpec};
pub use vigu::{collect_samples, plan, vigu, EmpiricalModel};
