//! Time integration of regularized learning dynamics: deterministic FTRL,
//! stochastic FTRL in score space and in strategy space, and the three
//! stochastic replicator variants.
//!
//! The `integrate_*` functions drive an observer at every recorded sample and
//! store nothing; the `simulate_*` wrappers collect a [`Trajectory`].

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::game::{Game, MixedProfile};
use crate::noise::{NoiseModel, NoiseStream};
use crate::regularization::{RegularizerSet, ScoreProfile};

/// Coordinates are clamped to this floor before renormalizing in strategy
/// space.
pub const STRATEGY_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Rk4,
    Euler,
    EulerMaruyama,
}

/// Step size, horizon, sampling and seeding of one integration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "one")]
    pub sample_stride: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub run_id: u64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
}

fn one() -> usize {
    1
}

fn default_scheme() -> Scheme {
    Scheme::EulerMaruyama
}

impl SimConfig {
    /// RK4 configuration for deterministic flows.
    pub fn ode(dt: f64, horizon: f64) -> Self {
        Self {
            dt,
            horizon,
            sample_stride: 1,
            seed: 0,
            run_id: 0,
            scheme: Scheme::Rk4,
        }
    }

    /// Euler–Maruyama configuration for stochastic flows.
    pub fn sde(dt: f64, horizon: f64) -> Self {
        Self {
            scheme: Scheme::EulerMaruyama,
            ..Self::ode(dt, horizon)
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.sample_stride = stride;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_run_id(mut self, run_id: u64) -> Self {
        self.run_id = run_id;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Checks the step, horizon and stride. A zero horizon is allowed and
    /// records only the initial state.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("dt", "step must be positive and finite"));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(invalid("horizon", "must be nonnegative and finite"));
        }
        if self.horizon > 0.0 && self.dt > self.horizon {
            return Err(invalid("dt", "step exceeds the horizon"));
        }
        if self.sample_stride == 0 {
            return Err(invalid("sample_stride", "must be at least 1"));
        }
        Ok(())
    }

    /// Number of integration steps, `round(T/δ)`.
    pub fn steps(&self) -> u64 {
        (self.horizon / self.dt).round() as u64
    }

    fn require_ode(&self) -> Result<()> {
        self.validate()?;
        if self.scheme == Scheme::EulerMaruyama {
            return Err(invalid("scheme", "deterministic flows use rk4 or euler"));
        }
        Ok(())
    }

    fn require_sde(&self) -> Result<()> {
        self.validate()?;
        if self.scheme != Scheme::EulerMaruyama {
            return Err(invalid("scheme", "stochastic flows use euler_maruyama"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    Horizon,
    StopPredicate,
    NumericalFailure,
}

/// State handed to observers at each recorded sample.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub t: f64,
    pub x: &'a [Vec<f64>],
    pub y: Option<&'a [Vec<f64>]>,
}

/// Observer callback; returning `true` stops the integration.
pub type Observer<'a> = dyn FnMut(&Sample) -> bool + 'a;

/// How an integration ended.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutcome {
    pub reason: TerminalReason,
    /// Time of the last observed sample.
    pub time: f64,
    pub failure: Option<String>,
}

/// Recorded samples of one run.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub scores: Option<Vec<ScoreProfile>>,
    pub strategies: Vec<MixedProfile>,
    pub config: SimConfig,
    pub terminal_reason: TerminalReason,
    pub failure: Option<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_strategy(&self) -> &MixedProfile {
        self.strategies
            .last()
            .expect("trajectories record the initial state")
    }

    /// Long-format CSV with header `t,player,action,x,y`; `y` is empty for
    /// strategy-space runs.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,player,action,x,y")?;
        for (k, (t, x)) in self.times.iter().zip(&self.strategies).enumerate() {
            let y = self.scores.as_ref().map(|s| &s[k]);
            for (i, xi) in x.iter().enumerate() {
                for (a, xa) in xi.iter().enumerate() {
                    match y {
                        Some(y) => writeln!(w, "{t},{i},{a},{xa},{}", y[i][a])?,
                        None => writeln!(w, "{t},{i},{a},{xa},")?,
                    }
                }
            }
        }
        Ok(())
    }

    /// JSON sidecar with the configuration echo and terminal reason.
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "config": self.config,
            "seed": self.config.seed,
            "run_id": self.config.run_id,
            "terminal_reason": self.terminal_reason,
            "failure": self.failure,
            "samples": self.times.len(),
            "final_time": self.times.last(),
            "final_strategy": self.strategies.last(),
        })
    }
}

/// The three stochastic replicator models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SrdVariant {
    /// Exponential weights.
    #[serde(rename = "EW")]
    Ew,
    /// Aggregate shocks.
    #[serde(rename = "AS")]
    As,
    /// Pairwise imitation.
    #[serde(rename = "PI")]
    Pi,
}

fn zeros_like(counts: &[usize]) -> Vec<Vec<f64>> {
    counts.iter().map(|&a| vec![0.0; a]).collect()
}

fn all_finite(v: &[Vec<f64>]) -> bool {
    v.iter().flatten().all(|x| x.is_finite())
}

fn check_interior(game: &Game, x0: &MixedProfile) -> Result<()> {
    if x0.num_players() != game.num_players()
        || x0
            .iter()
            .zip(game.action_counts())
            .any(|(xi, &a)| xi.len() != a)
    {
        return Err(Error::InvalidProfile(
            "initial profile shape mismatch".into(),
        ));
    }
    if !x0.is_interior() {
        return Err(Error::InvalidProfile(
            "initial profile must be interior".into(),
        ));
    }
    Ok(())
}

fn check_regs(game: &Game, regs: &RegularizerSet) -> Result<()> {
    if regs.len() != game.num_players() {
        return Err(invalid("regularizers", "one kernel per player required"));
    }
    Ok(())
}

fn mirror_all(regs: &RegularizerSet, y: &[Vec<f64>], x: &mut [Vec<f64>]) -> Result<()> {
    for ((k, yi), xi) in regs.kernels().iter().zip(y).zip(x.iter_mut()) {
        k.mirror_into(yi, xi)?;
    }
    Ok(())
}

/// Sampling schedule shared by all integrators.
struct Clock {
    dt: f64,
    steps: u64,
    stride: u64,
}

impl Clock {
    fn new(cfg: &SimConfig) -> Self {
        Self {
            dt: cfg.dt,
            steps: cfg.steps(),
            stride: cfg.sample_stride as u64,
        }
    }

    fn time(&self, k: u64) -> f64 {
        k as f64 * self.dt
    }

    fn records(&self, k: u64) -> bool {
        k.is_multiple_of(self.stride) || k == self.steps
    }
}

fn failure(clock: &Clock, k: u64, reason: impl Into<String>) -> RunOutcome {
    RunOutcome {
        reason: TerminalReason::NumericalFailure,
        time: clock.time(k),
        failure: Some(reason.into()),
    }
}

/// Deterministic FTRL `ẏ = v(Q(y))` from scores `y0` (RK4 or Euler).
pub fn integrate_ftrl(
    game: &Game,
    regs: &RegularizerSet,
    y0: &ScoreProfile,
    cfg: &SimConfig,
    observer: &mut Observer,
) -> Result<RunOutcome> {
    cfg.require_ode()?;
    check_regs(game, regs)?;
    let counts = game.action_counts();
    let clock = Clock::new(cfg);
    let mut y: Vec<Vec<f64>> = y0.to_vec();
    let mut x = zeros_like(counts);
    let mut stage = zeros_like(counts);
    let mut k1 = zeros_like(counts);
    let mut k2 = zeros_like(counts);
    let mut k3 = zeros_like(counts);
    let mut k4 = zeros_like(counts);
    let mut xs = zeros_like(counts);
    let h = cfg.dt;

    let field = |y: &[Vec<f64>], xbuf: &mut [Vec<f64>], out: &mut [Vec<f64>]| -> Result<()> {
        mirror_all(regs, y, xbuf)?;
        game.payoff_field_into(xbuf, out);
        Ok(())
    };
    let combine = |y: &[Vec<f64>], k: &[Vec<f64>], c: f64, out: &mut [Vec<f64>]| {
        for ((oi, yi), ki) in out.iter_mut().zip(y).zip(k) {
            for ((o, a), b) in oi.iter_mut().zip(yi).zip(ki) {
                *o = a + c * b;
            }
        }
    };

    mirror_all(regs, &y, &mut x)?;
    for step in 0..=clock.steps {
        if clock.records(step) {
            let sample = Sample {
                t: clock.time(step),
                x: &x,
                y: Some(&y),
            };
            if observer(&sample) {
                return Ok(RunOutcome {
                    reason: TerminalReason::StopPredicate,
                    time: sample.t,
                    failure: None,
                });
            }
        }
        if step == clock.steps {
            break;
        }
        let res = (|| -> Result<()> {
            field(&y, &mut xs, &mut k1)?;
            match cfg.scheme {
                Scheme::Euler => {
                    combine(&y.clone(), &k1, h, &mut y);
                }
                _ => {
                    combine(&y, &k1, 0.5 * h, &mut stage);
                    field(&stage, &mut xs, &mut k2)?;
                    combine(&y, &k2, 0.5 * h, &mut stage);
                    field(&stage, &mut xs, &mut k3)?;
                    combine(&y, &k3, h, &mut stage);
                    field(&stage, &mut xs, &mut k4)?;
                    for i in 0..y.len() {
                        for a in 0..y[i].len() {
                            y[i][a] +=
                                h / 6.0 * (k1[i][a] + 2.0 * k2[i][a] + 2.0 * k3[i][a] + k4[i][a]);
                        }
                    }
                }
            }
            if !all_finite(&y) {
                return Err(Error::NumericalFailure {
                    time: clock.time(step + 1),
                    reason: "non-finite score".into(),
                });
            }
            mirror_all(regs, &y, &mut x)
        })();
        if let Err(e) = res {
            return Ok(failure(&clock, step, e.to_string()));
        }
    }
    Ok(RunOutcome {
        reason: TerminalReason::Horizon,
        time: clock.time(clock.steps),
        failure: None,
    })
}

/// Stochastic FTRL in score space, `dY = v(X)dt + Σ(X)dW`, `X = Q(Y)`, by
/// Euler–Maruyama.
pub fn integrate_sftrl_scores(
    game: &Game,
    regs: &RegularizerSet,
    noise: &NoiseModel,
    y0: &ScoreProfile,
    cfg: &SimConfig,
    stream: &mut NoiseStream,
    observer: &mut Observer,
) -> Result<RunOutcome> {
    cfg.require_sde()?;
    check_regs(game, regs)?;
    noise.check_shape(game.action_counts())?;
    if stream.drivers() != noise.driver_dim() {
        return Err(invalid(
            "stream",
            "driver count does not match the noise model",
        ));
    }
    let counts = game.action_counts();
    let clock = Clock::new(cfg);
    let sqrt_dt = cfg.dt.sqrt();
    let mut y: Vec<Vec<f64>> = y0.to_vec();
    let mut x = zeros_like(counts);
    let mut v = zeros_like(counts);
    let mut shock = zeros_like(counts);
    let mut xi = vec![0.0; noise.driver_dim()];
    let noiseless = noise.is_zero();
    mirror_all(regs, &y, &mut x)?;
    for step in 0..=clock.steps {
        if clock.records(step) {
            let sample = Sample {
                t: clock.time(step),
                x: &x,
                y: Some(&y),
            };
            if observer(&sample) {
                return Ok(RunOutcome {
                    reason: TerminalReason::StopPredicate,
                    time: sample.t,
                    failure: None,
                });
            }
        }
        if step == clock.steps {
            break;
        }
        game.payoff_field_into(&x, &mut v);
        stream.fill(&mut xi);
        if !noiseless {
            noise.apply(&x, &xi, &mut shock);
        }
        for i in 0..y.len() {
            for a in 0..y[i].len() {
                y[i][a] += v[i][a] * cfg.dt;
                if !noiseless {
                    y[i][a] += shock[i][a] * sqrt_dt;
                }
            }
        }
        if !all_finite(&y) {
            return Ok(failure(&clock, step, "non-finite score"));
        }
        if let Err(e) = mirror_all(regs, &y, &mut x) {
            return Ok(failure(&clock, step, e.to_string()));
        }
    }
    Ok(RunOutcome {
        reason: TerminalReason::Horizon,
        time: clock.time(clock.steps),
        failure: None,
    })
}

/// One Euler–Maruyama increment of the strategy-space S-FTRL equation at `x`
/// given standard normal draws `xi`: drift, martingale and Itô correction.
pub fn strategy_increment(
    game: &Game,
    regs: &RegularizerSet,
    noise: &NoiseModel,
    x: &[Vec<f64>],
    xi: &[f64],
    dt: f64,
    out: &mut [Vec<f64>],
) {
    let counts = game.action_counts();
    let mut v = zeros_like(counts);
    game.payoff_field_into(x, &mut v);
    let s = noise.matrix(x);
    let drivers = noise.driver_dim();
    let sqrt_dt = dt.sqrt();
    let mut row = 0;
    for (i, xi_strat) in x.iter().enumerate() {
        let kernel = regs.kernel(i);
        let n = xi_strat.len();
        let g: Vec<f64> = xi_strat.iter().map(|&z| kernel.inv_d2(z)).collect();
        let total: f64 = g.iter().sum();
        let hhat: Vec<f64> = g.iter().map(|v| v / total).collect();
        let rows = &s[row..row + n];
        let dm: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>() * sqrt_dt)
            .collect();
        let centre: Vec<f64> = (0..drivers)
            .map(|k| (0..n).map(|b| hhat[b] * rows[b][k]).sum())
            .collect();
        let q: Vec<f64> = (0..n)
            .map(|a| {
                let coef = -0.5 * kernel.d3(xi_strat[a]) * g[a] * g[a];
                (0..drivers)
                    .map(|k| coef * (rows[a][k] - centre[k]).powi(2))
                    .sum()
            })
            .collect();
        let avg = |w: &[f64]| hhat.iter().zip(w).map(|(h, w)| h * w).sum::<f64>();
        let (v_bar, dm_bar, q_bar) = (avg(&v[i]), avg(&dm), avg(&q));
        for a in 0..n {
            out[i][a] = g[a] * ((v[i][a] - v_bar) * dt + (dm[a] - dm_bar) + (q[a] - q_bar) * dt);
        }
        row += n;
    }
}

/// One Euler–Maruyama increment of a stochastic replicator variant under
/// per-action volatilities `sigma`.
pub fn srd_increment(
    game: &Game,
    sigma: &[Vec<f64>],
    variant: SrdVariant,
    x: &[Vec<f64>],
    xi: &[f64],
    dt: f64,
    out: &mut [Vec<f64>],
) {
    let mut v = zeros_like(game.action_counts());
    game.payoff_field_into(x, &mut v);
    let sqrt_dt = dt.sqrt();
    let mut r = 0;
    for i in 0..x.len() {
        let (xs, ss, vs) = (&x[i], &sigma[i], &v[i]);
        let n = xs.len();
        let dw: Vec<f64> = (0..n).map(|a| xi[r + a] * sqrt_dt).collect();
        let v_bar: f64 = xs.iter().zip(vs).map(|(p, q)| p * q).sum();
        let shock_bar: f64 = (0..n).map(|b| ss[b] * xs[b] * dw[b]).sum();
        let ew_bar: f64 = (0..n)
            .map(|b| ss[b] * ss[b] * xs[b] * (1.0 - 2.0 * xs[b]))
            .sum();
        let as_bar: f64 = (0..n).map(|b| ss[b] * ss[b] * xs[b] * xs[b]).sum();
        for a in 0..n {
            let s2 = ss[a] * ss[a];
            let mut d = xs[a] * (vs[a] - v_bar) * dt + xs[a] * (ss[a] * dw[a] - shock_bar);
            d += match variant {
                SrdVariant::Ew => 0.5 * xs[a] * (s2 * (1.0 - 2.0 * xs[a]) - ew_bar) * dt,
                SrdVariant::As => -xs[a] * (s2 * xs[a] - as_bar) * dt,
                SrdVariant::Pi => 0.0,
            };
            out[i][a] = d;
        }
        r += n;
    }
}

fn renormalize(x: &mut [Vec<f64>]) {
    for xi in x.iter_mut() {
        xi.iter_mut().for_each(|v| *v = v.max(STRATEGY_FLOOR));
        let s: f64 = xi.iter().sum();
        xi.iter_mut().for_each(|v| *v /= s);
    }
}

fn integrate_strategies(
    counts: &[usize],
    x0: &MixedProfile,
    cfg: &SimConfig,
    drivers: usize,
    stream: &mut NoiseStream,
    observer: &mut Observer,
    mut increment: impl FnMut(&[Vec<f64>], &[f64], &mut [Vec<f64>]),
) -> Result<RunOutcome> {
    cfg.require_sde()?;
    if stream.drivers() != drivers {
        return Err(invalid(
            "stream",
            "driver count does not match the noise model",
        ));
    }
    let clock = Clock::new(cfg);
    let mut x: Vec<Vec<f64>> = x0.to_vec();
    let mut dx = zeros_like(counts);
    let mut xi = vec![0.0; drivers];
    for step in 0..=clock.steps {
        if clock.records(step) {
            let sample = Sample {
                t: clock.time(step),
                x: &x,
                y: None,
            };
            if observer(&sample) {
                return Ok(RunOutcome {
                    reason: TerminalReason::StopPredicate,
                    time: sample.t,
                    failure: None,
                });
            }
        }
        if step == clock.steps {
            break;
        }
        stream.fill(&mut xi);
        increment(&x, &xi, &mut dx);
        for (xs, ds) in x.iter_mut().zip(&dx) {
            for (p, d) in xs.iter_mut().zip(ds) {
                *p += d;
            }
        }
        if !all_finite(&x) {
            return Ok(failure(&clock, step, "non-finite strategy"));
        }
        renormalize(&mut x);
    }
    Ok(RunOutcome {
        reason: TerminalReason::Horizon,
        time: clock.time(clock.steps),
        failure: None,
    })
}

/// Strategy-space S-FTRL by Euler–Maruyama, renormalized after every step.
pub fn integrate_sftrl_strategies(
    game: &Game,
    regs: &RegularizerSet,
    noise: &NoiseModel,
    x0: &MixedProfile,
    cfg: &SimConfig,
    stream: &mut NoiseStream,
    observer: &mut Observer,
) -> Result<RunOutcome> {
    check_regs(game, regs)?;
    check_interior(game, x0)?;
    noise.check_shape(game.action_counts())?;
    integrate_strategies(
        game.action_counts(),
        x0,
        cfg,
        noise.driver_dim(),
        stream,
        observer,
        |x, xi, out| strategy_increment(game, regs, noise, x, xi, cfg.dt, out),
    )
}

/// Stochastic replicator dynamics by Euler–Maruyama; uncorrelated noise only.
pub fn integrate_srd(
    game: &Game,
    noise: &NoiseModel,
    x0: &MixedProfile,
    cfg: &SimConfig,
    variant: SrdVariant,
    stream: &mut NoiseStream,
    observer: &mut Observer,
) -> Result<RunOutcome> {
    check_interior(game, x0)?;
    noise.check_shape(game.action_counts())?;
    let sigma = noise.diagonal().ok_or_else(|| {
        Error::Config("stochastic replicator dynamics need an uncorrelated noise model".into())
    })?;
    integrate_strategies(
        game.action_counts(),
        x0,
        cfg,
        noise.driver_dim(),
        stream,
        observer,
        |x, xi, out| srd_increment(game, sigma, variant, x, xi, cfg.dt, out),
    )
}

/// Collects samples and forwards them to an optional stop predicate.
struct Recorder<'p, 'q> {
    times: Vec<f64>,
    strategies: Vec<MixedProfile>,
    scores: Vec<ScoreProfile>,
    stop: Option<&'p mut Observer<'q>>,
}

impl<'p, 'q> Recorder<'p, 'q> {
    fn new(stop: Option<&'p mut Observer<'q>>) -> Self {
        Self {
            times: Vec::new(),
            strategies: Vec::new(),
            scores: Vec::new(),
            stop,
        }
    }

    fn observe(&mut self, s: &Sample) -> bool {
        self.times.push(s.t);
        self.strategies
            .push(MixedProfile::from_unchecked(s.x.to_vec()));
        if let Some(y) = s.y {
            self.scores.push(ScoreProfile::from_unchecked(y.to_vec()));
        }
        self.stop.as_mut().is_some_and(|f| f(s))
    }

    fn finish(self, cfg: &SimConfig, outcome: RunOutcome) -> Trajectory {
        Trajectory {
            times: self.times,
            scores: (!self.scores.is_empty()).then_some(self.scores),
            strategies: self.strategies,
            config: cfg.clone(),
            terminal_reason: outcome.reason,
            failure: outcome.failure,
        }
    }
}

/// Deterministic FTRL from `x0`, with scores initialized at `∇h(x0)`.
pub fn simulate_deterministic_ftrl(
    game: &Game,
    regs: &RegularizerSet,
    x0: &MixedProfile,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    check_interior(game, x0)?;
    check_regs(game, regs)?;
    let y0 = regs.gradient(x0)?;
    let mut rec = Recorder::new(None);
    let outcome = integrate_ftrl(game, regs, &y0, cfg, &mut |s| rec.observe(s))?;
    Ok(rec.finish(cfg, outcome))
}

/// Score-space S-FTRL from `x0`, with noise drawn from `(cfg.seed, cfg.run_id)`.
pub fn simulate_sftrl_scores(
    game: &Game,
    regs: &RegularizerSet,
    noise: &NoiseModel,
    x0: &MixedProfile,
    cfg: &SimConfig,
    stop: Option<&mut Observer>,
) -> Result<Trajectory> {
    check_interior(game, x0)?;
    check_regs(game, regs)?;
    let y0 = regs.gradient(x0)?;
    let mut stream = NoiseStream::new(cfg.seed, cfg.run_id, noise.driver_dim());
    let mut rec = Recorder::new(stop);
    let outcome = integrate_sftrl_scores(game, regs, noise, &y0, cfg, &mut stream, &mut |s| {
        rec.observe(s)
    })?;
    Ok(rec.finish(cfg, outcome))
}

/// Strategy-space S-FTRL from `x0`. Pass `shared_noise` to reuse the stream
/// of a paired score-space run; otherwise the stream comes from `cfg`.
pub fn simulate_sftrl_strategies(
    game: &Game,
    regs: &RegularizerSet,
    noise: &NoiseModel,
    x0: &MixedProfile,
    cfg: &SimConfig,
    shared_noise: Option<&mut NoiseStream>,
) -> Result<Trajectory> {
    let mut own;
    let stream = match shared_noise {
        Some(s) => s,
        None => {
            own = NoiseStream::new(cfg.seed, cfg.run_id, noise.driver_dim());
            &mut own
        }
    };
    let mut rec = Recorder::new(None);
    let outcome =
        integrate_sftrl_strategies(game, regs, noise, x0, cfg, stream, &mut |s| rec.observe(s))?;
    Ok(rec.finish(cfg, outcome))
}

/// Stochastic replicator dynamics from `x0`.
pub fn simulate_srd(
    game: &Game,
    noise: &NoiseModel,
    x0: &MixedProfile,
    cfg: &SimConfig,
    variant: SrdVariant,
) -> Result<Trajectory> {
    let mut stream = NoiseStream::new(cfg.seed, cfg.run_id, noise.driver_dim());
    let mut rec = Recorder::new(None);
    let outcome = integrate_srd(game, noise, x0, cfg, variant, &mut stream, &mut |s| {
        rec.observe(s)
    })?;
    Ok(rec.finish(cfg, outcome))
}

/// Payoff differences `z_{ia} = y_{ia} − y_{i,b_i}` for `a ≠ b_i`, one entry
/// per recorded sample. Strategy-only trajectories use `θ′(x_{ia}) − θ′(x_{i,b_i})`.
pub fn project_payoff_differences(
    traj: &Trajectory,
    regs: &RegularizerSet,
    benchmarks: &[usize],
) -> Result<Vec<Vec<Vec<f64>>>> {
    let first = traj
        .strategies
        .first()
        .ok_or_else(|| invalid("trajectory", "no samples"))?;
    if benchmarks.len() != first.num_players()
        || benchmarks
            .iter()
            .zip(first.iter())
            .any(|(&b, xi)| b >= xi.len())
    {
        return Err(invalid("benchmarks", "one valid action index per player"));
    }
    let diff = |v: &[Vec<f64>]| -> Vec<Vec<f64>> {
        v.iter()
            .zip(benchmarks)
            .map(|(vi, &b)| {
                vi.iter()
                    .enumerate()
                    .filter(|(a, _)| *a != b)
                    .map(|(_, w)| w - vi[b])
                    .collect()
            })
            .collect()
    };
    match &traj.scores {
        Some(scores) => Ok(scores.iter().map(|y| diff(y)).collect()),
        None => traj
            .strategies
            .iter()
            .map(|x| {
                if !x.is_interior() {
                    return Err(Error::Domain("boundary strategy sample".into()));
                }
                let grad: Vec<Vec<f64>> = x
                    .iter()
                    .enumerate()
                    .map(|(i, xi)| xi.iter().map(|&z| regs.kernel(i).d1(z)).collect())
                    .collect();
                Ok(diff(&grad))
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularization::Kernel;

    fn mp() -> Game {
        Game::bimatrix(
            &[vec![1.0, -1.0], vec![-1.0, 1.0]],
            &[vec![-1.0, 1.0], vec![1.0, -1.0]],
        )
        .unwrap()
    }

    fn pd() -> Game {
        Game::bimatrix(
            &[vec![3.0, 0.0], vec![5.0, 1.0]],
            &[vec![3.0, 5.0], vec![0.0, 1.0]],
        )
        .unwrap()
    }

    fn x0() -> MixedProfile {
        MixedProfile::new(vec![vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap()
    }

    fn sup_gap(a: &Trajectory, b: &Trajectory) -> f64 {
        a.strategies
            .iter()
            .zip(&b.strategies)
            .flat_map(|(p, q)| {
                p.iter()
                    .flatten()
                    .zip(q.iter().flatten())
                    .map(|(u, v)| (u - v).abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }

    fn kl_energy(x: &MixedProfile) -> f64 {
        x.iter()
            .map(|xi| Kernel::Entropic.bregman(&[0.5, 0.5], xi).unwrap())
            .sum()
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::ode(0.0, 1.0).validate().is_err());
        assert!(SimConfig::ode(2.0, 1.0).validate().is_err());
        assert!(SimConfig::ode(0.1, 1.0).with_stride(0).validate().is_err());
        assert!(SimConfig::ode(0.1, 0.0).validate().is_ok());
        assert_eq!(SimConfig::ode(1e-3, 1.0).steps(), 1000);
    }

    #[test]
    fn recorded_times_follow_the_stride() {
        let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
        let t = simulate_deterministic_ftrl(
            &mp(),
            &regs,
            &x0(),
            &SimConfig::ode(0.1, 1.0).with_stride(3),
        )
        .unwrap();
        let expected = [0.0, 0.3, 0.6, 0.9, 1.0];
        assert_eq!(t.times.len(), expected.len());
        for (a, b) in t.times.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(t.terminal_reason, TerminalReason::Horizon);
    }

    #[test]
    fn strategies_are_mirror_images_of_scores() {
        let regs =
            RegularizerSet::new(vec![Kernel::LogBarrier, Kernel::Tsallis { q: 0.5 }]).unwrap();
        let noise = NoiseModel::isotropic(&[2, 2], 0.3).unwrap();
        let t = simulate_sftrl_scores(
            &mp(),
            &regs,
            &noise,
            &x0(),
            &SimConfig::sde(1e-2, 5.0),
            None,
        )
        .unwrap();
        for (x, y) in t.strategies.iter().zip(t.scores.as_ref().unwrap()) {
            let q = regs.mirror(y).unwrap();
            for (a, b) in x.iter().flatten().zip(q.iter().flatten()) {
                assert!((a - b).abs() < 1e-10);
            }
            for xi in x.iter() {
                assert!((xi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn matching_pennies_energy_is_conserved() {
        let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
        let t = simulate_deterministic_ftrl(
            &mp(),
            &regs,
            &x0(),
            &SimConfig::ode(1e-3, 100.0).with_stride(100),
        )
        .unwrap();
        let e0 = kl_energy(&t.strategies[0]);
        for x in &t.strategies {
            assert!((kl_energy(x) - e0).abs() < 1e-6);
        }
    }

    #[test]
    fn prisoners_dilemma_converges_to_defection() {
        let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
        let t = simulate_deterministic_ftrl(
            &pd(),
            &regs,
            &MixedProfile::uniform(&[2, 2]),
            &SimConfig::ode(1e-2, 50.0),
        )
        .unwrap();
        let x = t.final_strategy();
        assert!(x[0][0] < 1e-3 && x[1][0] < 1e-3);
    }

    #[test]
    fn zero_game_is_stationary() {
        let zero = Game::from_fn(vec![2, 3], |_, _| 0.0).unwrap();
        let regs = RegularizerSet::uniform(Kernel::LogBarrier, 2);
        let x = MixedProfile::new(vec![vec![0.2, 0.8], vec![0.1, 0.3, 0.6]]).unwrap();
        let t = simulate_deterministic_ftrl(&zero, &regs, &x, &SimConfig::ode(0.1, 10.0)).unwrap();
        for s in &t.strategies {
            for (a, b) in s.iter().flatten().zip(x.iter().flatten()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rk4_tracks_replicator_field() {
        // One RK4 step of size h in score space differs from an accurate
        // replicator solution by O(h⁵); compare with a fine Euler reference.
        let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
        let game = pd();
        let coarse =
            simulate_deterministic_ftrl(&game, &regs, &x0(), &SimConfig::ode(0.05, 1.0)).unwrap();
        let mut x: Vec<Vec<f64>> = x0().to_vec();
        let h = 1e-6;
        let mut v = zeros_like(&[2, 2]);
        for _ in 0..1_000_000 {
            game.payoff_field_into(&x, &mut v);
            for i in 0..2 {
                let avg: f64 = x[i].iter().zip(&v[i]).map(|(p, q)| p * q).sum();
                for a in 0..2 {
                    x[i][a] += h * x[i][a] * (v[i][a] - avg);
                }
            }
        }
        let end = coarse.final_strategy();
        for (a, b) in end.iter().flatten().zip(x.iter().flatten()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn noiseless_sde_matches_euler_flow() {
        let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
        let zero = NoiseModel::isotropic(&[2, 2], 0.0).unwrap();
        let cfg = SimConfig::sde(1e-3, 5.0);
        let ode = simulate_deterministic_ftrl(
            &mp(),
            &regs,
            &x0(),
            &cfg.clone().with_scheme(Scheme::Euler),
        )
        .unwrap();
        let sde = simulate_sftrl_scores(&mp(), &regs, &zero, &x0(), &cfg, None).unwrap();
        assert!(sup_gap(&ode, &sde) < 1e-8);
        for v in [SrdVariant::Ew, SrdVariant::As, SrdVariant::Pi] {
            let srd = simulate_srd(&mp(), &zero, &x0(), &cfg, v).unwrap();
            assert!(sup_gap(&ode, &srd) < 1e-2, "{v:?}");
        }
    }

    #[test]
    fn noiseless_strategy_flow_converges_at_first_order() {
        let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
        let zero = NoiseModel::isotropic(&[2, 2], 0.0).unwrap();
        let gap = |dt: f64| {
            let reference =
                simulate_deterministic_ftrl(&pd(), &regs, &x0(), &SimConfig::ode(dt, 2.0)).unwrap();
            let strat = simulate_sftrl_strategies(
                &pd(),
                &regs,
                &zero,
                &x0(),
                &SimConfig::sde(dt, 2.0),
                None,
            )
            .unwrap();
            sup_gap(&reference, &strat)
        };
        let (g1, g2) = (gap(2e-2), gap(1e-2));
        let ratio = g1 / g2;
        assert!(ratio > 1.7 && ratio < 2.3, "ratio {ratio}");
    }

    #[test]
    fn seeded_runs_are_identical() {
        let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
        let noise = NoiseModel::isotropic(&[2, 2], 0.2).unwrap();
        let cfg = SimConfig::sde(1e-2, 10.0).with_seed(42);
        let a = simulate_sftrl_scores(&mp(), &regs, &noise, &x0(), &cfg, None).unwrap();
        let b = simulate_sftrl_scores(&mp(), &regs, &noise, &x0(), &cfg, None).unwrap();
        let c = simulate_sftrl_scores(
            &mp(),
            &regs,
            &noise,
            &x0(),
            &cfg.clone().with_seed(43),
            None,
        )
        .unwrap();
        assert_eq!(a.strategies, b.strategies);
        assert_ne!(a.strategies, c.strategies);
    }

    #[test]
    fn ew_increments_match_entropic_strategy_sde() {
        let game =
            Game::from_fn(vec![3, 2], |i, a| (i + 2 * a[0] + a[1]) as f64 * 0.37 - 1.0).unwrap();
        let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
        let sigma = vec![vec![0.3, 0.1, 0.2], vec![0.25, 0.4]];
        let noise = NoiseModel::uncorrelated(sigma.clone()).unwrap();
        let x = vec![vec![0.2, 0.5, 0.3], vec![0.6, 0.4]];
        let xi = [0.3, -1.2, 0.7, 2.0, -0.4];
        let mut a = zeros_like(&[3, 2]);
        let mut b = zeros_like(&[3, 2]);
        strategy_increment(&game, &regs, &noise, &x, &xi, 1e-3, &mut a);
        srd_increment(&game, &sigma, SrdVariant::Ew, &x, &xi, 1e-3, &mut b);
        for (p, q) in a.iter().flatten().zip(b.iter().flatten()) {
            assert!((p - q).abs() < 1e-12);
        }
        // Drift alone (ξ = 0) against a hand-coded exponential-weights drift.
        let zero = [0.0; 5];
        strategy_increment(&game, &regs, &noise, &x, &zero, 1.0, &mut a);
        let mut v = zeros_like(&[3, 2]);
        game.payoff_field_into(&x, &mut v);
        for i in 0..2 {
            let vbar: f64 = (0..x[i].len()).map(|b| x[i][b] * v[i][b]).sum();
            let cbar: f64 = (0..x[i].len())
                .map(|b| sigma[i][b].powi(2) * x[i][b] * (1.0 - 2.0 * x[i][b]))
                .sum();
            for k in 0..x[i].len() {
                let s2 = sigma[i][k].powi(2);
                let drift = x[i][k] * (v[i][k] - vbar)
                    + 0.5 * x[i][k] * (s2 * (1.0 - 2.0 * x[i][k]) - cbar);
                assert!((a[i][k] - drift).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn srd_rejects_correlated_noise() {
        let noise = NoiseModel::full(&[2, 2], vec![vec![0.1]; 4]).unwrap();
        let err = simulate_srd(
            &mp(),
            &noise,
            &x0(),
            &SimConfig::sde(0.01, 1.0),
            SrdVariant::Ew,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn stop_predicate_ends_the_run() {
        let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
        let noise = NoiseModel::isotropic(&[2, 2], 0.0).unwrap();
        let mut stop = |s: &Sample| s.t >= 0.5;
        let t = simulate_sftrl_scores(
            &pd(),
            &regs,
            &noise,
            &x0(),
            &SimConfig::sde(0.1, 10.0),
            Some(&mut stop),
        )
        .unwrap();
        assert_eq!(t.terminal_reason, TerminalReason::StopPredicate);
        assert!((t.times.last().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_finite_payoffs_report_numerical_failure() {
        let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
        let huge = Game::bimatrix(
            &[vec![1e308, 0.0], vec![0.0, 0.0]],
            &[vec![1e308, 0.0], vec![0.0, 0.0]],
        )
        .unwrap();
        let noise = NoiseModel::isotropic(&[2, 2], 0.0).unwrap();
        let t = simulate_sftrl_scores(
            &huge,
            &regs,
            &noise,
            &x0(),
            &SimConfig::sde(10.0, 100.0),
            None,
        )
        .unwrap();
        assert_eq!(t.terminal_reason, TerminalReason::NumericalFailure);
        assert!(t.failure.is_some());
        assert!(t.final_strategy().iter().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn payoff_difference_examples() {
        let regs = RegularizerSet::uniform(Kernel::Entropic, 1);
        let with_scores = Trajectory {
            times: vec![0.0],
            scores: Some(vec![ScoreProfile::new(vec![vec![3.0, 1.0]]).unwrap()]),
            strategies: vec![MixedProfile::new(vec![vec![0.5, 0.5]]).unwrap()],
            config: SimConfig::sde(0.1, 1.0),
            terminal_reason: TerminalReason::Horizon,
            failure: None,
        };
        assert_eq!(
            project_payoff_differences(&with_scores, &regs, &[0]).unwrap()[0],
            vec![vec![-2.0]]
        );
        let strat_only = Trajectory {
            scores: None,
            strategies: vec![MixedProfile::new(vec![vec![0.75, 0.25]]).unwrap()],
            ..with_scores.clone()
        };
        let z = project_payoff_differences(&strat_only, &regs, &[0]).unwrap();
        assert!((z[0][0][0] + 3f64.ln()).abs() < 1e-15);
        let boundary = Trajectory {
            strategies: vec![MixedProfile::new(vec![vec![1.0, 0.0]]).unwrap()],
            ..strat_only
        };
        assert!(project_payoff_differences(&boundary, &regs, &[0]).is_err());
        assert!(project_payoff_differences(&with_scores, &regs, &[2]).is_err());
    }

    #[test]
    fn csv_and_sidecar() {
        let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
        let t =
            simulate_deterministic_ftrl(&mp(), &regs, &x0(), &SimConfig::ode(0.5, 1.0)).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,player,action,x,y"));
        assert_eq!(lines.count(), 3 * 4);
        let side = t.sidecar();
        assert_eq!(side["terminal_reason"], "horizon");
        assert_eq!(side["samples"], 3);
    }
}
