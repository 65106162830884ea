//! Experiment configuration schema. Configs are TOML, or JSON when the file
//! name ends in `.json`; unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::builtins;
use crate::dynamics::{SimConfig, SrdVariant};
use crate::error::{Error, Result};
use crate::game::{
    make_harmonic_2x2x2, make_zero_sum, Face, Game, HarmonicStructure, MixedProfile,
};
use crate::noise::NoiseModel;
use crate::regularization::{Kernel, RegularizerSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Simulate,
    HittingTime,
    Stability,
    Energy,
    Club,
    HarmonicCheck,
    SrdCompare,
}

/// Payoff tensor in the storage layout of [`Game`]: one flat array per
/// player, row-major over pure profiles with the last player fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameData {
    pub action_counts: Vec<usize>,
    pub payoffs: Vec<Vec<f64>>,
}

impl GameData {
    pub fn from_game(game: &Game) -> Self {
        Self {
            action_counts: game.action_counts().to_vec(),
            payoffs: (0..game.num_players())
                .map(|i| game.payoffs(i).to_vec())
                .collect(),
        }
    }

    pub fn to_game(&self) -> Result<Game> {
        Game::new(self.action_counts.clone(), self.payoffs.clone())
    }
}

/// Where the game comes from; exactly one source must be set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inline: Option<GameData>,
    /// Path to a JSON or TOML [`GameData`] file, relative to the config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// `[a, b, c, d, delta]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harmonic_2x2x2: Option<[f64; 5]>,
    /// Row player's payoff matrix `M` of the game `(M, −M)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_sum: Option<Vec<Vec<f64>>>,
    /// Harmonic weights; defaults to the zero-sum equilibrium or to uniform
    /// weights with unit mass per player.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelSpec {
    Shared(Kernel),
    PerPlayer(Vec<Kernel>),
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Shared(Kernel::Entropic)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    Isotropic(f64),
    PerAction(Vec<Vec<f64>>),
}

/// Either `sigma` (a scalar or one row per player) or a full `covariance`
/// factor over all actions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<SigmaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    /// S-FTRL in score space (deterministic FTRL when `scheme` is `rk4` or `euler`).
    #[default]
    Sftrl,
    /// S-FTRL integrated directly in strategy space.
    SftrlStrategies,
    /// Stochastic replicator dynamics; pick the model with `variant`.
    Srd,
}

/// Experiment-specific settings. Each experiment reads only the keys it
/// needs; defaults are listed per field.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// `simulate`: which flow to integrate (default `sftrl`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<Dynamics>,
    /// `simulate` with `srd`: the replicator model (default `EW`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<SrdVariant>,
    /// `srd_compare`: models to run (default all three).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variants: Option<Vec<SrdVariant>>,
    /// `hitting_time`: target player (default 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub player: Option<usize>,
    /// `hitting_time`: neighborhood size (default 0.1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// `stability`: supports of the face, one list per player.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face: Option<Vec<Vec<usize>>>,
    /// `stability`: energy level `M`; `energy`: sublevel `c` (default 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    /// `stability`: target exit probability used to derive `M` (default 0.05).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob: Option<f64>,
    /// `stability`: final-window fraction for the convergence check (default 0.5).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    /// `club`, `harmonic_check`: comparison tolerance (default 1e-9).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// `srd_compare`: distance to a vertex counted as absorbed (default 0.01).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absorb_tol: Option<f64>,
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub game: GameSpec,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
    #[serde(default = "one")]
    pub runs: usize,
    /// Initial mixed profile; defaults to the harmonic center, else uniform.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub params: Params,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Directory that relative `game.file` paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn one() -> usize {
    1
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Everything an experiment needs, validated.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub game: Game,
    pub structure: Option<HarmonicStructure>,
    pub regs: RegularizerSet,
    pub noise: NoiseModel,
    pub sim: Option<SimConfig>,
    pub x0: MixedProfile,
    pub face: Option<Face>,
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when `json` is set.
    pub fn parse(text: &str, json: bool) -> Result<Self> {
        if json {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes =
            std::fs::read(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes).map_err(|e| Error::Config(e.to_string()))?;
        let mut cfg = Self::parse(text, is_json(path))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok((cfg, bytes))
    }

    /// Builds and checks every object the experiment uses.
    pub fn resolve(&self) -> Result<Resolved> {
        let cfg_err = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        let (game, default_structure) = self
            .game
            .build_in(self.base_dir.as_deref())
            .map_err(cfg_err)?;
        let counts = game.action_counts().to_vec();
        let structure = match &self.game.weights {
            Some(w) => Some(HarmonicStructure::from_weights(w.clone()).map_err(cfg_err)?),
            None => default_structure,
        };
        if let Some(s) = &structure {
            if s.weights.len() != counts.len()
                || s.weights.iter().zip(&counts).any(|(w, &n)| w.len() != n)
            {
                return Err(Error::Config("weights do not match the game".into()));
            }
        }
        let regs = match &self.kernel {
            KernelSpec::Shared(k) => RegularizerSet::uniform(*k, counts.len()),
            KernelSpec::PerPlayer(ks) => {
                if ks.len() != counts.len() {
                    return Err(Error::Config(format!(
                        "{} kernels for {} players",
                        ks.len(),
                        counts.len()
                    )));
                }
                RegularizerSet::new(ks.clone()).map_err(cfg_err)?
            }
        };
        let noise = self.noise.build(&counts).map_err(cfg_err)?;
        if let Some(sim) = &self.sim {
            sim.validate().map_err(cfg_err)?;
        }
        let x0 = match &self.initial {
            Some(x) => MixedProfile::new(x.clone()).map_err(cfg_err)?,
            None => structure
                .as_ref()
                .map(|s| s.center.clone())
                .unwrap_or_else(|| MixedProfile::uniform(&counts)),
        };
        if x0.len() != counts.len() || x0.iter().zip(&counts).any(|(xi, &n)| xi.len() != n) {
            return Err(Error::Config(
                "initial profile does not match the game".into(),
            ));
        }
        let face = match &self.params.face {
            Some(f) => {
                let face = Face::new(f.clone()).map_err(cfg_err)?;
                if face.supports().len() != counts.len()
                    || face
                        .supports()
                        .iter()
                        .zip(&counts)
                        .any(|(s, &n)| s.iter().any(|&a| a >= n))
                {
                    return Err(Error::Config("face does not match the game".into()));
                }
                Some(face)
            }
            None => None,
        };
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        let needs_sim = matches!(
            self.experiment,
            Experiment::Simulate
                | Experiment::HittingTime
                | Experiment::Stability
                | Experiment::Energy
                | Experiment::SrdCompare
        );
        if needs_sim && self.sim.is_none() {
            return Err(Error::Config(format!(
                "experiment {:?} needs a [sim] table",
                self.experiment
            )));
        }
        if self.experiment == Experiment::Stability && face.is_none() {
            return Err(Error::Config("stability needs params.face".into()));
        }
        Ok(Resolved {
            game,
            structure,
            regs,
            noise,
            sim: self.sim.clone(),
            x0,
            face,
        })
    }
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Default harmonic weights: uniform with unit mass per player.
pub fn unit_mass_structure(counts: &[usize]) -> HarmonicStructure {
    HarmonicStructure::from_weights(counts.iter().map(|&n| vec![1.0 / n as f64; n]).collect())
        .expect("uniform weights are positive")
}

impl GameSpec {
    /// The game and its default harmonic structure, if any.
    pub fn build(&self) -> Result<(Game, Option<HarmonicStructure>)> {
        self.build_in(None)
    }

    /// As [`GameSpec::build`], resolving a relative `file` against `base`.
    pub fn build_in(&self, base: Option<&Path>) -> Result<(Game, Option<HarmonicStructure>)> {
        let set = [
            self.builtin.is_some(),
            self.inline.is_some(),
            self.file.is_some(),
            self.harmonic_2x2x2.is_some(),
            self.zero_sum.is_some(),
        ]
        .iter()
        .filter(|&&b| b)
        .count();
        if set != 1 {
            return Err(Error::Config(
                "set exactly one of game.builtin, game.inline, game.file, game.harmonic_2x2x2, game.zero_sum".into(),
            ));
        }
        let game = if let Some(name) = &self.builtin {
            builtins::builtin_game(name)
                .ok_or_else(|| Error::Config(format!("unknown builtin game `{name}`")))?
        } else if let Some(data) = &self.inline {
            data.to_game()?
        } else if let Some(path) = &self.file {
            match base {
                Some(dir) if path.is_relative() => read_game_file(&dir.join(path))?,
                _ => read_game_file(path)?,
            }
        } else if let Some([a, b, c, d, delta]) = self.harmonic_2x2x2 {
            make_harmonic_2x2x2(a, b, c, d, delta)
        } else {
            let zs = make_zero_sum(self.zero_sum.as_ref().expect("one source is set"))?;
            let structure = zs.structure.clone();
            return Ok((zs.game, structure));
        };
        let structure = unit_mass_structure(game.action_counts());
        Ok((game, Some(structure)))
    }
}

/// Reads a [`GameData`] file, JSON when the extension is `.json`, TOML otherwise.
pub fn read_game_file(path: &Path) -> Result<Game> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let data: GameData = if is_json(path) {
        serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
    };
    data.to_game()
}

impl NoiseSpec {
    pub fn build(&self, counts: &[usize]) -> Result<NoiseModel> {
        match (&self.sigma, &self.covariance) {
            (Some(_), Some(_)) => Err(Error::Config(
                "set either noise.sigma or noise.covariance".into(),
            )),
            (None, None) => NoiseModel::isotropic(counts, 0.0),
            (Some(SigmaSpec::Isotropic(s)), None) => NoiseModel::isotropic(counts, *s),
            (Some(SigmaSpec::PerAction(rows)), None) => {
                if rows.len() != counts.len() || rows.iter().zip(counts).any(|(r, &n)| r.len() != n)
                {
                    return Err(Error::Config(
                        "noise.sigma rows do not match the game".into(),
                    ));
                }
                NoiseModel::uncorrelated(rows.clone())
            }
            (None, Some(m)) => NoiseModel::full(counts, m.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIMULATE: &str = r#"
experiment = "simulate"
runs = 2

[game]
builtin = "matching_pennies"

[noise]
sigma = 0.2

[sim]
dt = 0.01
horizon = 1.0
sample_stride = 10
seed = 4
"#;

    #[test]
    fn parses_and_resolves() {
        let cfg = ExperimentConfig::parse(SIMULATE, false).unwrap();
        assert_eq!(cfg.experiment, Experiment::Simulate);
        assert_eq!(cfg.kernel, KernelSpec::Shared(Kernel::Entropic));
        let r = cfg.resolve().unwrap();
        assert_eq!(r.game.action_counts(), &[2, 2]);
        assert!((r.noise.sigma_min_sq() - 0.04).abs() < 1e-15);
        assert_eq!(r.structure.unwrap().mass, vec![1.0, 1.0]);
        assert_eq!(r.x0, MixedProfile::uniform(&[2, 2]));
    }

    #[test]
    fn json_equivalent() {
        let toml_cfg = ExperimentConfig::parse(SIMULATE, false).unwrap();
        let json = serde_json::to_string(&toml_cfg).unwrap();
        assert_eq!(ExperimentConfig::parse(&json, true).unwrap(), toml_cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for bad in [
            SIMULATE.replace("runs = 2", "runs = 2\nbogus = 1"),
            SIMULATE.replace("sigma = 0.2", "sigma = 0.2\nrho = 1"),
            SIMULATE.replace("seed = 4", "seed = 4\nsteps = 3"),
            SIMULATE.replace("[game]", "[params]\nfoo = 1\n[game]"),
        ] {
            assert!(
                matches!(ExperimentConfig::parse(&bad, false), Err(Error::Config(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn game_sources_are_exclusive() {
        let two = SIMULATE.replace(
            "builtin = \"matching_pennies\"",
            "builtin = \"matching_pennies\"\nzero_sum = [[1.0]]",
        );
        assert!(ExperimentConfig::parse(&two, false)
            .unwrap()
            .resolve()
            .is_err());
        let none = SIMULATE.replace("builtin = \"matching_pennies\"", "");
        assert!(ExperimentConfig::parse(&none, false)
            .unwrap()
            .resolve()
            .is_err());
        let unknown = SIMULATE.replace("matching_pennies", "chess");
        assert!(ExperimentConfig::parse(&unknown, false)
            .unwrap()
            .resolve()
            .is_err());
    }

    #[test]
    fn other_sources() {
        let spec = GameSpec {
            harmonic_2x2x2: Some([1.0, 2.0, 3.0, 4.0, 5.0]),
            ..Default::default()
        };
        let (g, s) = spec.build().unwrap();
        assert!(g.max_harmonic_residual(&s.unwrap().weights).unwrap() < 1e-9);
        let spec = GameSpec {
            zero_sum: Some(vec![vec![2.0, -1.0], vec![-1.0, 1.0]]),
            ..Default::default()
        };
        let (_, s) = spec.build().unwrap();
        assert!((s.unwrap().center[0][0] - 0.4).abs() < 1e-12);
        let data = GameData::from_game(&builtins::builtin_game("prisoners_dilemma").unwrap());
        let spec = GameSpec {
            inline: Some(data.clone()),
            ..Default::default()
        };
        assert_eq!(spec.build().unwrap().0, data.to_game().unwrap());
    }

    #[test]
    fn noise_specs() {
        let n = NoiseSpec {
            sigma: Some(SigmaSpec::PerAction(vec![vec![0.1, 0.2], vec![0.3, 0.4]])),
            covariance: None,
        };
        let m = n.build(&[2, 2]).unwrap();
        assert!((m.sigma_max_sq() - 0.16).abs() < 1e-15);
        let bad = NoiseSpec {
            sigma: Some(SigmaSpec::Isotropic(0.1)),
            covariance: Some(vec![vec![1.0]]),
        };
        assert!(bad.build(&[2, 2]).is_err());
        assert!(NoiseSpec::default().build(&[2]).unwrap().is_zero());
    }

    #[test]
    fn kernel_lists() {
        let text = SIMULATE.replace(
            "runs = 2",
            "runs = 2\nkernel = [\"entropic\", \"tsallis:q=0.5\"]",
        );
        let r = ExperimentConfig::parse(&text, false)
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(r.regs.kernel(1), Kernel::Tsallis { q: 0.5 });
        let text = SIMULATE.replace("runs = 2", "runs = 2\nkernel = [\"entropic\"]");
        assert!(ExperimentConfig::parse(&text, false)
            .unwrap()
            .resolve()
            .is_err());
    }
}
