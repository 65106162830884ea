//! Hitting times of pure-strategy neighborhoods.

use serde::Serialize;

use super::{fan_out, Summary};
use crate::dynamics::{
    integrate_ftrl, integrate_sftrl_scores, Sample, Scheme, SimConfig, TerminalReason,
};
use crate::error::{invalid, Error, Result};
use crate::game::{Game, MixedProfile};
use crate::noise::{NoiseModel, NoiseStream};
use crate::regularization::RegularizerSet;

/// Monte Carlo summary of hitting times with right-censoring at the horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingStats {
    pub n_runs: usize,
    pub n_hit: usize,
    pub censored: usize,
    /// Mean over runs that hit; `None` when every run was censored.
    pub mean_hit_time: Option<f64>,
    pub sample_std: Option<f64>,
    pub ci95: Option<(f64, f64)>,
    pub horizon: f64,
    /// Per-run hitting time, `None` when censored.
    pub outcomes: Vec<Option<f64>>,
}

impl HittingStats {
    pub fn from_outcomes(outcomes: Vec<Option<f64>>, horizon: f64) -> Self {
        let hits: Vec<f64> = outcomes.iter().flatten().copied().collect();
        let summary = Summary::of(&hits);
        Self {
            n_runs: outcomes.len(),
            n_hit: hits.len(),
            censored: outcomes.len() - hits.len(),
            mean_hit_time: summary.map(|s| s.mean),
            sample_std: summary.map(|s| s.std),
            ci95: summary.map(|s| s.ci95()),
            horizon,
            outcomes,
        }
    }

    /// Fraction of runs still unhit at time `t`.
    pub fn censored_fraction_at(&self, t: f64) -> f64 {
        let unhit = self
            .outcomes
            .iter()
            .filter(|o| o.is_none_or(|h| h > t))
            .count();
        unhit as f64 / self.n_runs.max(1) as f64
    }
}

/// First recorded time at which `max_a X_{ia} ≥ 1 − ε` for `player`, or
/// `None` if the horizon is reached first. A deterministic scheme in `cfg`
/// runs the noiseless flow with that scheme instead of Euler–Maruyama.
pub fn pure_hitting_time(
    game: &Game,
    regs: &RegularizerSet,
    noise: &NoiseModel,
    x0: &MixedProfile,
    cfg: &SimConfig,
    player: usize,
    eps: f64,
) -> Result<Option<f64>> {
    if player >= game.num_players() {
        return Err(Error::PlayerOutOfRange {
            player,
            players: game.num_players(),
        });
    }
    let a = game.action_counts()[player] as f64;
    if !(eps > 0.0 && eps < 1.0 - 1.0 / a) {
        return Err(invalid(
            "eps",
            format!("must lie in (0, 1 − 1/A) = (0, {})", 1.0 - 1.0 / a),
        ));
    }
    let y0 = regs.gradient(x0)?;
    let threshold = 1.0 - eps;
    let mut stop = |s: &Sample| s.x[player].iter().any(|&p| p >= threshold);
    let outcome = if cfg.scheme == Scheme::EulerMaruyama {
        let mut stream = NoiseStream::new(cfg.seed, cfg.run_id, noise.driver_dim());
        integrate_sftrl_scores(game, regs, noise, &y0, cfg, &mut stream, &mut stop)?
    } else if noise.is_zero() {
        integrate_ftrl(game, regs, &y0, cfg, &mut stop)?
    } else {
        return Err(invalid("scheme", "noisy runs use euler_maruyama"));
    };
    match outcome.reason {
        TerminalReason::StopPredicate => Ok(Some(outcome.time)),
        TerminalReason::Horizon => Ok(None),
        TerminalReason::NumericalFailure => Err(Error::NumericalFailure {
            time: outcome.time,
            reason: outcome.failure.unwrap_or_default(),
        }),
    }
}

/// Hitting times over `n_runs` seeded runs; run `r` uses run id
/// `cfg.run_id + r`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_hitting_time(
    game: &Game,
    regs: &RegularizerSet,
    noise: &NoiseModel,
    x0: &MixedProfile,
    cfg: &SimConfig,
    player: usize,
    eps: f64,
    n_runs: usize,
) -> Result<HittingStats> {
    if n_runs == 0 {
        return Err(invalid("n_runs", "must be at least 1"));
    }
    let outcomes = fan_out(n_runs, |r| {
        let run_cfg = cfg.clone().with_run_id(cfg.run_id + r);
        pure_hitting_time(game, regs, noise, x0, &run_cfg, player, eps)
    })?;
    Ok(HittingStats::from_outcomes(outcomes, cfg.horizon))
}
