//! Fixtures shared by the planning benchmarks.

use riskdp::{gen_mdp, make_utility, GeneratorSpec, TabularRSMDP, UtilityFn, UtilitySpec};

/// Two-state chain with horizon 3, the environment used by the learning benchmarks.
pub fn chain() -> TabularRSMDP {
    gen_mdp(&GeneratorSpec::Chain { length: 2, horizon: 3 }).expect("valid chain")
}

/// Random environment of the given size.
pub fn random(states: usize, actions: usize, horizon: usize) -> TabularRSMDP {
    gen_mdp(&GeneratorSpec::Random {
        states,
        actions,
        horizon,
        seed: 7,
    })
    .expect("valid random mdp")
}

pub fn exp_utility(beta: f64, horizon: usize) -> UtilityFn {
    make_utility(&UtilitySpec::Exponential { beta }, horizon).expect("valid utility")
}
