//! Energy statistics for harmonic games: the energy function, its growth
//! under noise, escape times, generator estimates and recurrence probes.

use rand::Rng;
use serde::Serialize;

use super::{fan_out, HittingStats, Summary};
use crate::dynamics::{integrate_sftrl_scores, Sample, SimConfig, TerminalReason};
use crate::error::{invalid, Error, Result};
use crate::game::{Game, HarmonicStructure, MixedProfile, DEFAULT_TOL};
use crate::noise::{auxiliary_rng, sample_dirichlet, NoiseModel, NoiseStream};
use crate::regularization::{RegularizerSet, ScoreProfile};

/// Default number of accepted sublevel samples for [`epsilon_c`].
pub const EPSILON_SAMPLES: usize = 100_000;

fn check_structure(
    structure: &HarmonicStructure,
    regs: &RegularizerSet,
    counts: &[usize],
) -> Result<()> {
    if structure.weights.len() != counts.len()
        || structure
            .weights
            .iter()
            .zip(counts)
            .any(|(w, &n)| w.len() != n)
    {
        return Err(invalid(
            "structure",
            "weights do not match the action counts",
        ));
    }
    if regs.len() != counts.len() {
        return Err(invalid("regularizers", "one kernel per player required"));
    }
    Ok(())
}

fn require_harmonic(game: &Game, structure: &HarmonicStructure) -> Result<()> {
    let r = game.max_harmonic_residual(&structure.weights)?;
    if r > DEFAULT_TOL {
        return Err(Error::InvalidGame(format!(
            "not harmonic for the given weights (max residual {r:e})"
        )));
    }
    Ok(())
}

/// `E(x) = Σ_i m_i D_i(p̂_i, x_i)`.
pub fn harmonic_energy(
    structure: &HarmonicStructure,
    regs: &RegularizerSet,
    x: &MixedProfile,
) -> Result<f64> {
    let counts: Vec<usize> = x.iter().map(Vec::len).collect();
    check_structure(structure, regs, &counts)?;
    if !x.is_interior() {
        return Err(Error::Domain("energy needs an interior profile".into()));
    }
    let mut e = 0.0;
    for (i, xi) in x.iter().enumerate() {
        e += structure.mass[i] * regs.kernel(i).bregman(&structure.center[i], xi)?;
    }
    Ok(e)
}

/// `Σ_i m_i F_i(p̂_i, y_i)`, equal to the energy of `Q(y)` but free of
/// underflow near the boundary.
pub fn energy_from_scores(
    structure: &HarmonicStructure,
    regs: &RegularizerSet,
    y: &[Vec<f64>],
) -> Result<f64> {
    let counts: Vec<usize> = y.iter().map(Vec::len).collect();
    check_structure(structure, regs, &counts)?;
    let mut e = 0.0;
    for (i, yi) in y.iter().enumerate() {
        e += structure.mass[i] * regs.kernel(i).fenchel(&structure.center[i], yi)?;
    }
    Ok(e)
}

fn weighted_trace(structure: &HarmonicStructure, regs: &RegularizerSet, x: &[Vec<f64>]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, xi)| structure.mass[i] * regs.kernel(i).trace_jacobian_at(xi))
        .sum()
}

fn failure_error(time: f64, reason: Option<String>) -> Error {
    Error::NumericalFailure {
        time,
        reason: reason.unwrap_or_default(),
    }
}

/// Per-time sample statistics of the energy across runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyProfile {
    pub n_runs: usize,
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub se: Vec<f64>,
}

impl EnergyProfile {
    /// Index of the recorded time closest to `t`.
    pub fn index_near(&self, t: f64) -> Option<usize> {
        self.times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(k, _)| k)
    }
}

/// Energy along `n_runs` score-space runs from `x0`, recorded at every
/// sample of `cfg`; run `r` uses run id `cfg.run_id + r`.
#[allow(clippy::too_many_arguments)]
pub fn energy_profile(
    game: &Game,
    structure: &HarmonicStructure,
    regs: &RegularizerSet,
    noise: &NoiseModel,
    x0: &MixedProfile,
    cfg: &SimConfig,
    n_runs: usize,
) -> Result<EnergyProfile> {
    check_structure(structure, regs, game.action_counts())?;
    if n_runs == 0 {
        return Err(invalid("n_runs", "must be at least 1"));
    }
    let y0 = regs.gradient(x0)?;
    let runs = fan_out(n_runs, |r| {
        let run_id = cfg.run_id + r;
        let run_cfg = cfg.clone().with_run_id(run_id);
        let mut stream = NoiseStream::new(cfg.seed, run_id, noise.driver_dim());
        let mut times = Vec::new();
        let mut energies = Vec::new();
        let mut err = None;
        let outcome = integrate_sftrl_scores(
            game,
            regs,
            noise,
            &y0,
            &run_cfg,
            &mut stream,
            &mut |s: &Sample| match energy_from_scores(
                structure,
                regs,
                s.y.expect("score-space sample"),
            ) {
                Ok(e) => {
                    times.push(s.t);
                    energies.push(e);
                    false
                }
                Err(e) => {
                    err = Some(e);
                    true
                }
            },
        )?;
        if let Some(e) = err {
            return Err(e);
        }
        if outcome.reason == TerminalReason::NumericalFailure {
            return Err(failure_error(outcome.time, outcome.failure));
        }
        Ok((times, energies))
    })?;
    let times = runs[0].0.clone();
    let mut mean = Vec::with_capacity(times.len());
    let mut std = Vec::with_capacity(times.len());
    let mut se = Vec::with_capacity(times.len());
    let mut column = vec![0.0; n_runs];
    for k in 0..times.len() {
        for (c, run) in column.iter_mut().zip(&runs) {
            *c = run.1[k];
        }
        let s = Summary::of(&column).expect("n_runs ≥ 1");
        mean.push(s.mean);
        std.push(s.std);
        se.push(s.se);
    }
    Ok(EnergyProfile {
        n_runs,
        times,
        mean,
        std,
        se,
    })
}

/// Sampled minimum of `Σ_i m_i tr Jac Q_i` over the sublevel set `{E ≤ c}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonEstimate {
    pub level: f64,
    pub value: f64,
    /// Dirichlet draws made.
    pub samples: usize,
    /// Draws inside the sublevel set.
    pub accepted: usize,
}

/// Rejection-samples Dirichlet(1,…,1) products, keeps those with `E ≤ c`,
/// and minimizes the weighted Jacobian trace over them. Sampling stops after
/// `accept` hits or `100·accept` draws.
pub fn epsilon_c(
    structure: &HarmonicStructure,
    regs: &RegularizerSet,
    c: f64,
    accept: usize,
    seed: u64,
) -> Result<EpsilonEstimate> {
    if !(c > 0.0) {
        return Err(invalid("c", "must be positive"));
    }
    if accept == 0 {
        return Err(invalid("accept", "must be at least 1"));
    }
    let counts: Vec<usize> = structure.weights.iter().map(Vec::len).collect();
    check_structure(structure, regs, &counts)?;
    // The center is always in the sublevel set.
    let mut value = weighted_trace(structure, regs, &structure.center);
    let mut rng = auxiliary_rng(seed, u64::MAX);
    let (mut samples, mut accepted) = (0usize, 0usize);
    while accepted < accept && samples < accept.saturating_mul(100) {
        samples += 1;
        let x = sample_dirichlet(&mut rng, &counts);
        if !x.is_interior() || harmonic_energy(structure, regs, &x)? > c {
            continue;
        }
        accepted += 1;
        value = value.min(weighted_trace(structure, regs, &x));
    }
    Ok(EpsilonEstimate {
        level: c,
        value,
        samples,
        accepted,
    })
}

/// Escape times from the sublevel set `{E ≤ c}` and the expected-time bound
/// `2(c − E(x0)) / (σ_min² ε(c))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyStats {
    pub level: f64,
    pub energy0: f64,
    pub hitting: HittingStats,
    pub eps_c: EpsilonEstimate,
    pub bound: f64,
}

impl EnergyStats {
    /// Whether every run escaped and the mean escape time is within the bound.
    pub fn within_bound(&self) -> bool {
        self.hitting.censored == 0 && self.hitting.mean_hit_time.is_some_and(|m| m <= self.bound)
    }
}

#[allow(clippy::too_many_arguments)]
fn first_passage(
    game: &Game,
    structure: &HarmonicStructure,
    regs: &RegularizerSet,
    noise: &NoiseModel,
    y0: &ScoreProfile,
    cfg: &SimConfig,
    n_runs: usize,
    stop: impl Fn(f64) -> bool + Sync,
) -> Result<HittingStats> {
    let outcomes = fan_out(n_runs, |r| {
        let run_id = cfg.run_id + r;
        let run_cfg = cfg.clone().with_run_id(run_id);
        let mut stream = NoiseStream::new(cfg.seed, run_id, noise.driver_dim());
        let mut err = None;
        let outcome = integrate_sftrl_scores(
            game,
            regs,
            noise,
            y0,
            &run_cfg,
            &mut stream,
            &mut |s: &Sample| match energy_from_scores(
                structure,
                regs,
                s.y.expect("score-space sample"),
            ) {
                Ok(e) => stop(e),
                Err(e) => {
                    err = Some(e);
                    true
                }
            },
        )?;
        if let Some(e) = err {
            return Err(e);
        }
        match outcome.reason {
            TerminalReason::StopPredicate => Ok(Some(outcome.time)),
            TerminalReason::Horizon => Ok(None),
            TerminalReason::NumericalFailure => Err(failure_error(outcome.time, outcome.failure)),
        }
    })?;
    Ok(HittingStats::from_outcomes(outcomes, cfg.horizon))
}

/// Escape times `τ_c = inf{t : E(X(t)) > c}` over `n_runs` runs from `x0`,
/// with `ε(c)` from [`EPSILON_SAMPLES`] sublevel samples.
#[allow(clippy::too_many_arguments)]
pub fn energy_escape_stats(
    game: &Game,
    structure: &HarmonicStructure,
    regs: &RegularizerSet,
    noise: &NoiseModel,
    x0: &MixedProfile,
    c: f64,
    n_runs: usize,
    cfg: &SimConfig,
) -> Result<EnergyStats> {
    check_structure(structure, regs, game.action_counts())?;
    require_harmonic(game, structure)?;
    noise.require_elliptic()?;
    if n_runs == 0 {
        return Err(invalid("n_runs", "must be at least 1"));
    }
    let energy0 = harmonic_energy(structure, regs, x0)?;
    if !(c > energy0) {
        return Err(invalid(
            "c",
            format!("must exceed the initial energy {energy0}"),
        ));
    }
    let eps_c = epsilon_c(structure, regs, c, EPSILON_SAMPLES, cfg.seed)?;
    let bound = 2.0 * (c - energy0) / (noise.sigma_min_sq() * eps_c.value);
    let y0 = regs.gradient(x0)?;
    let hitting = first_passage(game, structure, regs, noise, &y0, cfg, n_runs, |e| e > c)?;
    Ok(EnergyStats {
        level: c,
        energy0,
        hitting,
        eps_c,
        bound,
    })
}

/// Settings for [`generator_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorParams {
    /// One-step transitions per probe state.
    pub n_draws: usize,
    pub dt: f64,
    pub seed: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            n_draws: 20_000,
            dt: 1e-4,
            seed: 0,
        }
    }
}

/// Monte Carlo estimate of `𝓛F(y)` at one probe state, with the bounds
/// `(σ²/2) Σ_i m_i tr Jac Q_i(y_i)` for `σ² ∈ {σ_min², σ_max²}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorProbe {
    pub y: Vec<Vec<f64>>,
    pub estimate: f64,
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
    /// The standard error is too large relative to the bounds to decide.
    pub inconclusive: bool,
    /// `lower − 3 SE ≤ estimate ≤ upper + 3 SE`.
    pub within: bool,
}

/// Estimates the generator of the energy coupling `F(y) = Σ m_i F_i(p̂_i, y_i)`
/// from one-step Euler–Maruyama ensembles started at each probe. The linear
/// part `⟨∇F(y), ΔY⟩` is subtracted as a control variate; its expectation is
/// `δ⟨∇F, v⟩`, which vanishes in a harmonic game.
pub fn generator_estimate(
    game: &Game,
    structure: &HarmonicStructure,
    regs: &RegularizerSet,
    noise: &NoiseModel,
    probes: &[ScoreProfile],
    params: GeneratorParams,
) -> Result<Vec<GeneratorProbe>> {
    check_structure(structure, regs, game.action_counts())?;
    require_harmonic(game, structure)?;
    noise.check_shape(game.action_counts())?;
    if params.n_draws < 2 {
        return Err(invalid("n_draws", "need at least two draws"));
    }
    if !(params.dt > 0.0 && params.dt.is_finite()) {
        return Err(invalid("dt", "must be positive"));
    }
    let (lo2, hi2) = (noise.sigma_min_sq(), noise.sigma_max_sq());
    let sqrt_dt = params.dt.sqrt();
    let counts = game.action_counts();
    fan_out(probes.len(), |k| {
        let y = &probes[k as usize];
        check_structure(structure, regs, &y.iter().map(Vec::len).collect::<Vec<_>>())?;
        let x = regs.mirror(y)?;
        let v = game.payoff_field(&x)?;
        let f0 = energy_from_scores(structure, regs, y)?;
        let grad: Vec<Vec<f64>> = x
            .iter()
            .enumerate()
            .map(|(i, xi)| {
                xi.iter()
                    .zip(&structure.center[i])
                    .map(|(q, p)| structure.mass[i] * (q - p))
                    .collect()
            })
            .collect();
        let mut stream = NoiseStream::new(params.seed, k, noise.driver_dim());
        let mut xi = vec![0.0; noise.driver_dim()];
        let mut shock: Vec<Vec<f64>> = counts.iter().map(|&n| vec![0.0; n]).collect();
        let mut y1: Vec<Vec<f64>> = y.to_vec();
        let mut values = Vec::with_capacity(params.n_draws);
        for _ in 0..params.n_draws {
            stream.fill(&mut xi);
            noise.apply(&x, &xi, &mut shock);
            let mut linear = 0.0;
            for i in 0..y1.len() {
                for a in 0..y1[i].len() {
                    let dy = v[i][a] * params.dt + shock[i][a] * sqrt_dt;
                    y1[i][a] = y[i][a] + dy;
                    linear += grad[i][a] * dy;
                }
            }
            let f1 = energy_from_scores(structure, regs, &y1)?;
            values.push((f1 - f0 - linear) / params.dt);
        }
        let s = Summary::of(&values).expect("n_draws ≥ 2");
        let trace = weighted_trace(structure, regs, &x);
        let (lower, upper) = (0.5 * lo2 * trace, 0.5 * hi2 * trace);
        Ok(GeneratorProbe {
            y: y.to_vec(),
            estimate: s.mean,
            se: s.se,
            lower,
            upper,
            inconclusive: s.se > 0.5 * (upper - lower).max(lower),
            within: s.mean >= lower - 3.0 * s.se && s.mean <= upper + 3.0 * s.se,
        })
    })
}

/// A point on the segment from the center toward a vertex of `player`
/// (pure action `action`) with energy `target`, found by bisection.
pub fn point_at_energy(
    structure: &HarmonicStructure,
    regs: &RegularizerSet,
    player: usize,
    action: usize,
    target: f64,
) -> Result<MixedProfile> {
    let players = structure.weights.len();
    if player >= players {
        return Err(Error::PlayerOutOfRange { player, players });
    }
    if action >= structure.weights[player].len() {
        return Err(invalid("action", "out of range"));
    }
    if !(target >= 0.0 && target.is_finite()) {
        return Err(invalid("target", "must be a finite nonnegative energy"));
    }
    let at = |s: f64| {
        let mut x = structure.center.to_vec();
        for (b, p) in x[player].iter_mut().enumerate() {
            *p = (1.0 - s) * *p + if b == action { s } else { 0.0 };
        }
        MixedProfile::from_unchecked(x)
    };
    let (mut lo, mut hi) = (0.0, 1.0 - 1e-15);
    if harmonic_energy(structure, regs, &at(hi))? < target {
        return Err(invalid("target", "unreachable along the segment"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if harmonic_energy(structure, regs, &at(mid))? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(at(0.5 * (lo + hi)))
}

/// What [`recurrence_probe`] measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RecurrenceMode {
    /// Start at the center and wait for `E > level`.
    Escape { level: f64 },
    /// Start at energy `start` and wait for `E ≤ level`.
    Return { start: f64, level: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrenceStats {
    pub mode: RecurrenceMode,
    pub energy0: f64,
    pub hitting: HittingStats,
    /// `(t, fraction of runs not yet arrived by t)` at decades below the horizon.
    pub censoring_curve: Vec<(f64, f64)>,
}

/// Escape or return times for energy level sets. Return mode starts on the
/// segment from the center toward the first vertex of player 0.
#[allow(clippy::too_many_arguments)]
pub fn recurrence_probe(
    game: &Game,
    structure: &HarmonicStructure,
    regs: &RegularizerSet,
    noise: &NoiseModel,
    mode: RecurrenceMode,
    n_runs: usize,
    cfg: &SimConfig,
) -> Result<RecurrenceStats> {
    check_structure(structure, regs, game.action_counts())?;
    require_harmonic(game, structure)?;
    if n_runs == 0 {
        return Err(invalid("n_runs", "must be at least 1"));
    }
    let (x0, level) = match mode {
        RecurrenceMode::Escape { level } => (structure.center.clone(), level),
        RecurrenceMode::Return { start, level } => {
            if !(start > level) {
                return Err(invalid("start", "must exceed the return level"));
            }
            (point_at_energy(structure, regs, 0, 0, start)?, level)
        }
    };
    if !(level > 0.0) {
        return Err(invalid("level", "must be positive"));
    }
    let energy0 = harmonic_energy(structure, regs, &x0)?;
    let y0 = regs.gradient(&x0)?;
    let hitting = match mode {
        RecurrenceMode::Escape { .. } => {
            first_passage(game, structure, regs, noise, &y0, cfg, n_runs, |e| {
                e > level
            })?
        }
        RecurrenceMode::Return { .. } => {
            first_passage(game, structure, regs, noise, &y0, cfg, n_runs, |e| {
                e <= level
            })?
        }
    };
    let censoring_curve = [1e-3, 1e-2, 1e-1, 1.0]
        .iter()
        .map(|f| {
            let t = f * cfg.horizon;
            (t, hitting.censored_fraction_at(t))
        })
        .collect();
    Ok(RecurrenceStats {
        mode,
        energy0,
        hitting,
        censoring_curve,
    })
}

/// Random interior score probes for generator checks, drawn from Dirichlet
/// strategies mapped through `∇h`.
pub fn random_probes<R: Rng + ?Sized>(
    rng: &mut R,
    regs: &RegularizerSet,
    counts: &[usize],
    n: usize,
) -> Result<Vec<ScoreProfile>> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = sample_dirichlet(rng, counts);
        if x.is_interior() && x.iter().flatten().all(|&p| p > 0.02) {
            out.push(regs.gradient(&x)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::simulate_deterministic_ftrl;
    use crate::game::make_harmonic_2x2x2;
    use crate::regularization::Kernel;

    fn mp() -> Game {
        Game::bimatrix(
            &[vec![1.0, -1.0], vec![-1.0, 1.0]],
            &[vec![-1.0, 1.0], vec![1.0, -1.0]],
        )
        .unwrap()
    }

    /// Unit masses with the uniform center.
    fn unit() -> HarmonicStructure {
        HarmonicStructure::from_weights(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap()
    }

    fn entropic() -> RegularizerSet {
        RegularizerSet::uniform(Kernel::Entropic, 2)
    }

    #[test]
    fn energy_examples() {
        let x = MixedProfile::new(vec![vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap();
        let e = harmonic_energy(&unit(), &entropic(), &x).unwrap();
        let hand = 0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln();
        assert!((e - hand).abs() < 1e-12);
        assert!((e - 0.5108).abs() < 1e-4);
        assert_eq!(
            harmonic_energy(&unit(), &entropic(), &MixedProfile::uniform(&[2, 2])).unwrap(),
            0.0
        );
        let y = entropic().gradient(&x).unwrap();
        assert!((energy_from_scores(&unit(), &entropic(), &y).unwrap() - e).abs() < 1e-12);
        let edge = MixedProfile::new(vec![vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        assert!(harmonic_energy(&unit(), &entropic(), &edge).is_err());
    }

    #[test]
    fn energy_is_additive_over_players() {
        let s = HarmonicStructure::from_weights(vec![vec![1.0, 3.0], vec![2.0, 2.0, 1.0]]).unwrap();
        let regs = RegularizerSet::new(vec![Kernel::Entropic, Kernel::Tsallis { q: 0.5 }]).unwrap();
        let x = MixedProfile::new(vec![vec![0.3, 0.7], vec![0.2, 0.5, 0.3]]).unwrap();
        let total = harmonic_energy(&s, &regs, &x).unwrap();
        let parts = s.mass[0] * Kernel::Entropic.bregman(&s.center[0], &x[0]).unwrap()
            + s.mass[1]
                * Kernel::Tsallis { q: 0.5 }
                    .bregman(&s.center[1], &x[1])
                    .unwrap();
        assert!((total - parts).abs() < 1e-14);
    }

    #[test]
    fn deterministic_flow_conserves_energy() {
        let g = make_harmonic_2x2x2(1.0, 2.0, 3.0, 4.0, 5.0);
        let s = HarmonicStructure::uniform(&[2, 2, 2]);
        let regs = RegularizerSet::uniform(Kernel::Entropic, 3);
        let x0 = MixedProfile::new(vec![vec![0.7, 0.3], vec![0.4, 0.6], vec![0.5, 0.5]]).unwrap();
        let t = simulate_deterministic_ftrl(&g, &regs, &x0, &SimConfig::ode(1e-3, 100.0)).unwrap();
        let e0 = harmonic_energy(&s, &regs, &x0).unwrap();
        for x in &t.strategies {
            assert!((harmonic_energy(&s, &regs, x).unwrap() - e0).abs() <= 1e-6);
        }
    }

    #[test]
    fn energy_profile_grows_under_noise() {
        let noise = NoiseModel::isotropic(&[2, 2], 0.3).unwrap();
        let cfg = SimConfig::sde(0.01, 100.0).with_stride(1000);
        let p = energy_profile(
            &mp(),
            &unit(),
            &entropic(),
            &noise,
            &MixedProfile::uniform(&[2, 2]),
            &cfg,
            100,
        )
        .unwrap();
        assert_eq!(p.times.len(), 11);
        assert_eq!(p.mean[0], 0.0);
        let last = p.mean.len() - 1;
        assert!(p.mean[last] > p.mean[1] + 3.0 * (p.se[last].powi(2) + p.se[1].powi(2)).sqrt());
        assert_eq!(p.index_near(49.0), Some(5));
    }

    #[test]
    fn epsilon_at_small_level_is_near_the_center_value() {
        let est = epsilon_c(&unit(), &entropic(), 0.02, 1000, 3).unwrap();
        assert_eq!(est.accepted, 1000);
        assert!(est.value <= 1.0 && est.value > 0.9, "{}", est.value);
        let wide = epsilon_c(&unit(), &entropic(), 2.0, 20_000, 3).unwrap();
        assert!(wide.value < est.value);
    }

    #[test]
    fn escape_bound_and_arguments() {
        let noise = NoiseModel::isotropic(&[2, 2], 0.3).unwrap();
        let cfg = SimConfig::sde(0.01, 5000.0).with_seed(2);
        let x0 = MixedProfile::uniform(&[2, 2]);
        let s =
            energy_escape_stats(&mp(), &unit(), &entropic(), &noise, &x0, 0.5, 50, &cfg).unwrap();
        assert_eq!(s.hitting.censored, 0);
        assert!(
            s.within_bound(),
            "{:?} vs {}",
            s.hitting.mean_hit_time,
            s.bound
        );
        let pd = Game::bimatrix(
            &[vec![3.0, 0.0], vec![5.0, 1.0]],
            &[vec![3.0, 5.0], vec![0.0, 1.0]],
        )
        .unwrap();
        assert!(energy_escape_stats(&pd, &unit(), &entropic(), &noise, &x0, 0.5, 5, &cfg).is_err());
        let zero = NoiseModel::isotropic(&[2, 2], 0.0).unwrap();
        assert!(
            energy_escape_stats(&mp(), &unit(), &entropic(), &zero, &x0, 0.5, 5, &cfg).is_err()
        );
        assert!(
            energy_escape_stats(&mp(), &unit(), &entropic(), &noise, &x0, 0.0, 5, &cfg).is_err()
        );
    }

    #[test]
    fn generator_at_the_center() {
        let sigma = 0.2;
        let noise = NoiseModel::isotropic(&[2, 2], sigma).unwrap();
        let probes = vec![ScoreProfile::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap()];
        let params = GeneratorParams {
            n_draws: 20_000,
            dt: 1e-4,
            seed: 5,
        };
        let p =
            &generator_estimate(&mp(), &unit(), &entropic(), &noise, &probes, params).unwrap()[0];
        assert!((p.lower - sigma * sigma / 2.0).abs() < 1e-15);
        assert_eq!(p.lower, p.upper);
        assert!(p.within, "{p:?}");
        assert!(!p.inconclusive);
    }

    #[test]
    fn generator_within_bounds_at_random_probes() {
        let noise = NoiseModel::uncorrelated(vec![vec![0.2, 0.3], vec![0.25, 0.2]]).unwrap();
        let mut rng = auxiliary_rng(1, 1);
        let probes = random_probes(&mut rng, &entropic(), &[2, 2], 5).unwrap();
        let out = generator_estimate(
            &mp(),
            &unit(),
            &entropic(),
            &noise,
            &probes,
            GeneratorParams::default(),
        )
        .unwrap();
        for p in &out {
            assert!(p.within, "{p:?}");
            assert!(p.lower < p.upper);
        }
    }

    #[test]
    fn noiseless_generator_vanishes() {
        let zero = NoiseModel::isotropic(&[2, 2], 0.0).unwrap();
        let probes = vec![ScoreProfile::new(vec![vec![0.4, -0.3], vec![1.0, 0.2]]).unwrap()];
        let p = &generator_estimate(
            &mp(),
            &unit(),
            &entropic(),
            &zero,
            &probes,
            GeneratorParams::default(),
        )
        .unwrap()[0];
        assert!(p.estimate.abs() < 1e-3, "{}", p.estimate);
        assert_eq!(p.se, 0.0);
    }

    #[test]
    fn point_at_energy_hits_the_target() {
        for target in [0.1, 0.5, 2.0, 8.0] {
            let x = point_at_energy(&unit(), &entropic(), 0, 0, target).unwrap();
            let e = harmonic_energy(&unit(), &entropic(), &x).unwrap();
            assert!((e - target).abs() < 1e-9 * target.max(1.0), "{target}: {e}");
        }
        assert!(point_at_energy(&unit(), &entropic(), 2, 0, 1.0).is_err());
    }

    #[test]
    fn noiseless_flow_never_escapes() {
        let zero = NoiseModel::isotropic(&[2, 2], 0.0).unwrap();
        let cfg = SimConfig::sde(0.01, 200.0);
        let s = recurrence_probe(
            &mp(),
            &unit(),
            &entropic(),
            &zero,
            RecurrenceMode::Escape { level: 0.5 },
            2,
            &cfg,
        )
        .unwrap();
        assert_eq!(s.hitting.censored, 2);
    }

    #[test]
    fn escape_and_return_probes() {
        let noise = NoiseModel::isotropic(&[2, 2], 0.2).unwrap();
        let cfg = SimConfig::sde(0.01, 20_000.0).with_stride(10);
        let esc = recurrence_probe(
            &mp(),
            &unit(),
            &entropic(),
            &noise,
            RecurrenceMode::Escape { level: 2.0 },
            40,
            &cfg,
        )
        .unwrap();
        assert_eq!(esc.hitting.censored, 0);
        let cfg = SimConfig::sde(0.01, 1000.0).with_stride(10);
        let ret = recurrence_probe(
            &mp(),
            &unit(),
            &entropic(),
            &noise,
            RecurrenceMode::Return {
                start: 2.0,
                level: 0.5,
            },
            40,
            &cfg,
        )
        .unwrap();
        assert!((ret.energy0 - 2.0).abs() < 1e-9);
        let fractions: Vec<f64> = ret.censoring_curve.iter().map(|c| c.1).collect();
        assert!(fractions.windows(2).all(|w| w[0] >= w[1]));
        assert!(*fractions.last().unwrap() > 0.0);
    }
}
