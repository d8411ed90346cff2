use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mdp::{gen_mdp, GeneratorSpec, MdpJson, TabularRSMDP};
use crate::ucb::InitialState;
use crate::utility::{make_utility, UtilityFn, UtilitySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Solve,
    Vigu,
    Ucb,
    Sweep,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Solve => "solve",
            Algorithm::Vigu => "vigu",
            Algorithm::Ucb => "ucb",
            Algorithm::Sweep => "sweep",
        }
    }
}

/// Learner swept over by `sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    /// Sweeps the per-cell sample count `n`.
    Vigu,
    /// Sweeps the episode count `K`.
    Ucb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub learner: Learner,
    pub values: Vec<usize>,
}

/// Grid resolution: a fixed `m` or `"auto"` (learning runs only).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridM {
    Fixed(usize),
    Auto,
}

impl std::str::FromStr for GridM {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(GridM::Auto);
        }
        s.parse::<usize>()
            .map(GridM::Fixed)
            .map_err(|_| format!("expected a positive integer or \"auto\", got {s:?}"))
    }
}

impl Serialize for GridM {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            GridM::Fixed(m) => ser.serialize_u64(*m as u64),
            GridM::Auto => ser.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for GridM {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = GridM;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive integer or \"auto\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<GridM, E> {
                Ok(GridM::Fixed(v as usize))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<GridM, E> {
                match v {
                    "auto" => Ok(GridM::Auto),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        de.deserialize_any(V)
    }
}

fn default_p() -> f64 {
    0.1
}
fn default_fine() -> usize {
    64
}
fn default_mc_trials() -> usize {
    100_000
}

/// One experiment. Exactly one of `generator` and `mdp` must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mdp: Option<MdpJson>,
    pub utility: UtilitySpec,
    /// Overridden by the CLI subcommand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<Algorithm>,
    pub grid_m: GridM,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episodes: Option<usize>,
    #[serde(default = "default_p")]
    pub p: f64,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_fine")]
    pub fine_grid_multiplier: usize,
    /// Monte Carlo rollouts per evaluation; 0 disables Monte Carlo columns.
    #[serde(default = "default_mc_trials")]
    pub mc_trials: usize,
    /// Learning runs: Monte Carlo-score every this many episodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub initial_state: InitialState,
    /// Fill the `wall_ms` column; off by default so reruns are byte-identical.
    #[serde(default)]
    pub timings: bool,
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let cfg = parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    Ok(cfg)
}

/// Parses and validates config JSON.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    /// Checks everything that does not depend on the algorithm being run.
    pub fn validate(&self) -> Result<()> {
        let mdp = self.build_mdp()?;
        self.build_utility(mdp.horizon())?;
        if self.seeds.is_empty() {
            return Err(bad("seeds: must not be empty"));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(bad(format!("p: must lie in (0, 1), got {}", self.p)));
        }
        if self.grid_m == GridM::Fixed(0) {
            return Err(bad("grid_m: must be at least 1"));
        }
        if self.fine_grid_multiplier == 0 {
            return Err(bad("fine_grid_multiplier: must be at least 1"));
        }
        if self.mc_every == Some(0) {
            return Err(bad("mc_every: must be at least 1"));
        }
        if self.n == Some(0) {
            return Err(bad("n: must be at least 1"));
        }
        if self.episodes == Some(0) {
            return Err(bad("episodes: must be at least 1"));
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() || sw.values.contains(&0) {
                return Err(bad("sweep.values: must be a non-empty list of positive integers"));
            }
        }
        self.initial_state
            .validate(mdp.states())
            .map_err(|e| bad(format!("initial_state: {e}")))?;
        if let Some(a) = self.algorithm {
            self.validate_for(a)?;
        }
        Ok(())
    }

    /// Checks the fields `algorithm` needs.
    pub fn validate_for(&self, algorithm: Algorithm) -> Result<()> {
        let auto_ok = match algorithm {
            Algorithm::Solve => false,
            Algorithm::Vigu => {
                self.n.ok_or_else(|| bad("n: required by vigu"))?;
                false
            }
            Algorithm::Ucb => {
                self.episodes.ok_or_else(|| bad("episodes: required by ucb"))?;
                true
            }
            Algorithm::Sweep => {
                let sw = self.sweep.as_ref().ok_or_else(|| bad("sweep: required by sweep"))?;
                sw.learner == Learner::Ucb
            }
        };
        if self.grid_m == GridM::Auto && !auto_ok {
            return Err(bad(format!(
                "grid_m: \"auto\" is only available to learning runs, not {}",
                algorithm.name()
            )));
        }
        Ok(())
    }

    pub fn build_mdp(&self) -> Result<TabularRSMDP> {
        match (&self.generator, &self.mdp) {
            (Some(g), None) => gen_mdp(g).map_err(|e| bad(format!("generator: {e}"))),
            (None, Some(m)) => TabularRSMDP::from_json(m).map_err(|e| bad(format!("mdp: {e}"))),
            _ => Err(bad("exactly one of generator and mdp must be given")),
        }
    }

    pub fn build_utility(&self, horizon: usize) -> Result<UtilityFn> {
        make_utility(&self.utility, horizon).map_err(|e| bad(format!("utility: {e}")))
    }

    /// First 16 hex digits of the SHA-256 of the effective config as JSON.
    /// The output path is left out: it says where results go, not what they are.
    pub fn hash(&self) -> String {
        let keyed = ExperimentConfig {
            output: None,
            ..self.clone()
        };
        let json = serde_json::to_vec(&keyed).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
