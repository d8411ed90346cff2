use std::time::Instant;

use rayon::prelude::*;

use crate::dp::{evaluate_policy, mc_policy_value, solve_optimal, ValueTable};
use crate::error::{Error, Result};
use crate::grid::{discretize, Grid};
use crate::mdp::TabularRSMDP;
use crate::rng::{tag, SeedTree};
use crate::ucb::{recommended_eps, vigu_ucb, McScoring, UcbOptions};
use crate::utility::UtilityFn;
use crate::vigu::vigu;

use super::config::{Algorithm, ExperimentConfig, GridM, Learner};
use super::output::{Cell, ExperimentOutput, ResultRow, Schema};

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "RISKDP_THREADS";

fn worker_threads() -> Result<usize> {
    let avail = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n.min(avail.max(1))),
            _ => Err(Error::Config(format!("{THREADS_ENV}: expected a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(avail),
    }
}

/// Immutable inputs shared by every cell of an experiment.
struct Shared {
    cfg: ExperimentConfig,
    mdp: TabularRSMDP,
    u: UtilityFn,
    hash: String,
    weights: Vec<f64>,
}

impl Shared {
    fn fixed_grid(&self) -> Result<Grid> {
        match self.cfg.grid_m {
            GridM::Fixed(m) => Grid::new(m, self.mdp.horizon()),
            GridM::Auto => Err(Error::Config("grid_m: \"auto\" needs a learning run".into())),
        }
    }

    fn learning_grid(&self, episodes: usize) -> Result<Grid> {
        match self.cfg.grid_m {
            GridM::Fixed(m) => Grid::new(m, self.mdp.horizon()),
            GridM::Auto => {
                let m = recommended_eps(
                    self.mdp.horizon(),
                    self.mdp.states(),
                    self.mdp.actions(),
                    episodes * self.mdp.horizon(),
                    self.u.kappa(),
                    self.mdp.lambda_max(),
                    self.mdp.eta_max(),
                );
                Grid::new(m, self.mdp.horizon())
            }
        }
    }

    /// `sum_s w(s) f(s)` over start states with positive weight.
    fn weighted(&self, mut f: impl FnMut(usize) -> Result<f64>) -> Result<f64> {
        let mut acc = 0.0;
        for (s, &w) in self.weights.iter().enumerate() {
            if w > 0.0 {
                acc += w * f(s)?;
            }
        }
        Ok(acc)
    }

    fn wall(&self, started: Instant) -> Cell {
        if self.cfg.timings {
            Cell::Float(started.elapsed().as_secs_f64() * 1e3)
        } else {
            Cell::Empty
        }
    }
}

/// Runs the configured algorithm for every seed (and sweep value) on a
/// bounded worker pool; rows come back ordered by seed, then parameter.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let algorithm = cfg
        .algorithm
        .ok_or_else(|| Error::Config("algorithm: not set".into()))?;
    cfg.validate()?;
    let mdp = cfg.build_mdp()?;
    let u = cfg.build_utility(mdp.horizon())?;
    let shared = Shared {
        hash: cfg.hash(),
        weights: cfg.initial_state.weights(mdp.states()),
        cfg: cfg.clone(),
        mdp,
        u,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_threads()?)
        .build()
        .map_err(|e| Error::InvalidParam(format!("worker pool: {e}")))?;
    pool.install(|| match algorithm {
        Algorithm::Solve => run_solve(&shared),
        Algorithm::Vigu => run_vigu(&shared, &[cfg.n.expect("validated")]),
        Algorithm::Ucb => run_ucb(&shared),
        Algorithm::Sweep => {
            let sw = cfg.sweep.as_ref().expect("validated");
            match sw.learner {
                Learner::Vigu => run_vigu(&shared, &sw.values),
                Learner::Ucb => run_ucb_sweep(&shared, &sw.values),
            }
        }
    })
}

fn cells(seeds: &[u64], values: &[usize]) -> Vec<(u64, usize)> {
    seeds
        .iter()
        .flat_map(|&s| values.iter().map(move |&v| (s, v)))
        .collect()
}

fn run_solve(sh: &Shared) -> Result<ExperimentOutput> {
    let grid = sh.fixed_grid()?;
    let denv = discretize(&sh.mdp, grid)?;
    let (v, _, pol) = solve_optimal(&denv, &sh.u)?;
    let mut rows = Vec::new();
    for &seed in &sh.cfg.seeds {
        for h in 0..grid.horizon() {
            for s in 0..sh.mdp.states() {
                for y in 0..grid.y_points(h) {
                    rows.push(vec![
                        Cell::Int(h as u64 + 1),
                        Cell::Int(s as u64),
                        Cell::Int(y as u64),
                        Cell::Float(grid.value(y)),
                        Cell::Float(v.get(h, s, y)),
                        Cell::Int(pol.action(h, s, y) as u64),
                        Cell::Int(seed),
                        Cell::Text(sh.hash.clone()),
                    ]);
                }
            }
        }
    }
    Ok(ExperimentOutput {
        schema: Schema::Solve,
        rows,
    })
}

fn run_vigu(sh: &Shared, ns: &[usize]) -> Result<ExperimentOutput> {
    let grid = sh.fixed_grid()?;
    let denv = discretize(&sh.mdp, grid)?;
    let (v_star, _, _) = solve_optimal(&denv, &sh.u)?;
    let trials = sh.cfg.mc_trials;
    let v_fine: Option<ValueTable> = if trials > 0 {
        let fine = grid.refined(sh.cfg.fine_grid_multiplier);
        Some(solve_optimal(&discretize(&sh.mdp, fine)?, &sh.u)?.0)
    } else {
        None
    };
    let rows = cells(&sh.cfg.seeds, ns)
        .into_par_iter()
        .map(|(seed, n)| -> Result<ResultRow> {
            let started = Instant::now();
            let seeds = SeedTree::new(seed);
            let out = vigu(&sh.mdp, &sh.u, grid, n, sh.cfg.p, &seeds)?;
            let v_pi = evaluate_policy(&denv, &sh.u, &out.grid_policy)?;
            let gap = sh.weighted(|s| Ok(v_star.get(0, s, 0) - v_pi.get(0, s, 0)))?;
            let (mc_mean, mc_ci) = match &v_fine {
                Some(vf) => {
                    let mut ci = 0.0;
                    let mean = sh.weighted(|s| {
                        let mut rng = seeds.stream(&[tag::MC_ROLLOUTS, s as u64]);
                        let est = mc_policy_value(&sh.mdp, &sh.u, &out.policy, s, trials, &mut rng)?;
                        ci += sh.weights[s] * est.half_width;
                        Ok(vf.get(0, s, 0) - est.mean)
                    })?;
                    (Cell::Float(mean), Cell::Float(ci))
                }
                None => (Cell::Empty, Cell::Empty),
            };
            Ok(vec![
                Cell::Int(n as u64),
                Cell::Int(seed),
                Cell::Float(gap),
                mc_mean,
                mc_ci,
                Cell::Float(out.iota1),
                sh.wall(started),
                Cell::Text(sh.hash.clone()),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentOutput {
        schema: Schema::Vigu,
        rows,
    })
}

fn ucb_options(sh: &Shared) -> UcbOptions {
    UcbOptions {
        initial: sh.cfg.initial_state.clone(),
        audit_optimism: false,
        mc: match (sh.cfg.mc_every, sh.cfg.mc_trials) {
            (Some(every), trials) if trials > 0 => Some(McScoring {
                trials,
                every,
                fine_multiplier: sh.cfg.fine_grid_multiplier,
            }),
            _ => None,
        },
    }
}

fn run_ucb(sh: &Shared) -> Result<ExperimentOutput> {
    let episodes = sh.cfg.episodes.expect("validated");
    let grid = sh.learning_grid(episodes)?;
    let opts = ucb_options(sh);
    let traces = sh
        .cfg
        .seeds
        .par_iter()
        .map(|&seed| vigu_ucb(&sh.mdp, &sh.u, grid, episodes, sh.cfg.p, &SeedTree::new(seed), &opts))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(traces.len() * episodes);
    for t in &traces {
        for (rec, &ms) in t.records.iter().zip(&t.wall_ms) {
            rows.push(vec![
                Cell::Int(rec.k as u64),
                Cell::Int(rec.s1 as u64),
                Cell::Float(rec.v_opt),
                Cell::Float(rec.v_pik),
                Cell::Float(rec.regret),
                Cell::Float(rec.cum_regret),
                Cell::opt_float(rec.mc.map(|m| m.mean)),
                Cell::opt_float(rec.mc.map(|m| m.half_width)),
                if sh.cfg.timings { Cell::Float(ms) } else { Cell::Empty },
                Cell::Int(t.seed),
                Cell::Text(sh.hash.clone()),
            ]);
        }
    }
    Ok(ExperimentOutput {
        schema: Schema::Ucb,
        rows,
    })
}

fn run_ucb_sweep(sh: &Shared, ks: &[usize]) -> Result<ExperimentOutput> {
    let opts = UcbOptions { mc: None, ..ucb_options(sh) };
    let rows = cells(&sh.cfg.seeds, ks)
        .into_par_iter()
        .map(|(seed, k)| -> Result<ResultRow> {
            let started = Instant::now();
            let grid = sh.learning_grid(k)?;
            let t = vigu_ucb(&sh.mdp, &sh.u, grid, k, sh.cfg.p, &SeedTree::new(seed), &opts)?;
            let tenth = (k / 10).max(1);
            Ok(vec![
                Cell::Int(k as u64),
                Cell::Int(seed),
                Cell::Int(grid.m() as u64),
                Cell::Float(t.cumulative_regret()),
                Cell::Float(t.mean_regret(0, tenth)),
                Cell::Float(t.mean_regret(k - tenth, k)),
                Cell::Float(t.iota2),
                sh.wall(started),
                Cell::Text(sh.hash.clone()),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentOutput {
        schema: Schema::UcbSweep,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::parse_config;

    fn cfg(grid_m: &str, seeds: &str, extra: &str) -> ExperimentConfig {
        parse_config(&format!(
            r#"{{
                "generator": {{"kind": "safe_risky_bandit"}},
                "utility": {{"kind": "exponential", "beta": 4.0}},
                "grid_m": {grid_m},
                "seeds": {seeds},
                "mc_trials": 2000,
                "fine_grid_multiplier": 4
                {extra}
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn solve_reports_the_safe_arm() {
        let mut c = cfg("256", "[0]", "");
        c.algorithm = Some(Algorithm::Solve);
        let out = run_experiment(&c).unwrap();
        assert_eq!(out.schema, Schema::Solve);
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.rows[0][5], Cell::Int(0));
    }

    #[test]
    fn sweep_rows_are_seed_major() {
        let mut c = cfg("16", "[3, 1]", r#", "sweep": {"learner": "vigu", "values": [50, 200]}"#);
        c.algorithm = Some(Algorithm::Sweep);
        let out = run_experiment(&c).unwrap();
        let keys: Vec<_> = out.rows.iter().map(|r| (r[1].clone(), r[0].clone())).collect();
        assert_eq!(
            keys,
            vec![
                (Cell::Int(3), Cell::Int(50)),
                (Cell::Int(3), Cell::Int(200)),
                (Cell::Int(1), Cell::Int(50)),
                (Cell::Int(1), Cell::Int(200)),
            ]
        );
        assert!(out.rows.iter().all(|r| r[6] == Cell::Empty));
    }

    #[test]
    fn ucb_runs_and_auto_grid_resolves() {
        let mut c = cfg(r#""auto""#, "[3, 1]", r#", "episodes": 20, "mc_every": 10"#);
        c.algorithm = Some(Algorithm::Ucb);
        let out = run_experiment(&c).unwrap();
        assert_eq!(out.rows.len(), 40);
        assert_eq!(out.rows[0][6], Cell::Empty);
        assert!(matches!(out.rows[9][6], Cell::Float(_)));
    }

    #[test]
    fn missing_algorithm_fields_are_config_errors() {
        let mut c = cfg("16", "[3, 1]", "");
        c.algorithm = Some(Algorithm::Ucb);
        assert!(run_experiment(&c).unwrap_err().is_config());
        c.algorithm = None;
        assert!(run_experiment(&c).unwrap_err().is_config());
    }
}
