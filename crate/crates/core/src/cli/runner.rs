//! Dispatches a resolved config to the matching experiment and collects the
//! artifacts it produces.

use serde::Serialize;
use serde_json::json;

use super::config::{unit_mass_structure, Dynamics, Experiment, ExperimentConfig, Resolved};
use crate::analysis::report::Report;
use crate::analysis::{
    energy_escape_stats, estimate_hitting_time, fan_out, lambda_bound, stability_experiment,
    stability_level, LyapunovAux, StabilityParams,
};
use crate::dynamics::{
    simulate_deterministic_ftrl, simulate_sftrl_scores, simulate_sftrl_strategies, simulate_srd,
    Scheme, SimConfig, SrdVariant, TerminalReason, Trajectory,
};
use crate::error::{Error, Result};
use crate::game::{NashClass, DEFAULT_FACE_CAP, DEFAULT_TOL};

/// Files produced by one experiment, held in memory until the run succeeds.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    /// Set when a trajectory ended in numerical failure; artifacts are still
    /// written but the run exits with the numerical-failure code.
    pub failure: Option<String>,
}

impl Artifacts {
    fn summary(mut self, report: &Report) -> Result<Self> {
        self.files
            .push(("summary.json".into(), report.to_json()?.into_bytes()));
        Ok(self)
    }
}

fn sim(r: &Resolved) -> &SimConfig {
    r.sim.as_ref().expect("validated when resolving")
}

/// Runs the experiment named in `cfg`.
pub fn execute(cfg: &ExperimentConfig, r: &Resolved, config_hash: &str) -> Result<Artifacts> {
    let echo = serde_json::to_value(cfg).map_err(|e| Error::Io(e.to_string()))?;
    let seed = r.sim.as_ref().map_or(0, |s| s.seed);
    let report = Report::new(
        experiment_name(cfg.experiment),
        echo,
        config_hash.to_string(),
        seed,
    );
    match cfg.experiment {
        Experiment::Simulate => simulate(cfg, r, report),
        Experiment::HittingTime => hitting_time(cfg, r, report),
        Experiment::Stability => stability(cfg, r, report),
        Experiment::Energy => energy(cfg, r, report),
        Experiment::Club => club(cfg, r, report),
        Experiment::HarmonicCheck => harmonic_check(cfg, r, report),
        Experiment::SrdCompare => srd_compare(cfg, r, report),
    }
}

fn experiment_name(e: Experiment) -> String {
    serde_json::to_value(e)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

#[derive(Serialize)]
struct SimulateRun {
    run_id: u64,
    file: String,
    terminal_reason: TerminalReason,
    failure: Option<String>,
    final_time: Option<f64>,
    final_strategy: Vec<Vec<f64>>,
    terminal_vertex: Vec<usize>,
    terminal_vertex_class: NashClass,
}

fn simulate(cfg: &ExperimentConfig, r: &Resolved, report: Report) -> Result<Artifacts> {
    let base = sim(r);
    let dynamics = cfg.params.dynamics.unwrap_or_default();
    let deterministic = base.scheme != Scheme::EulerMaruyama;
    if deterministic && (dynamics != Dynamics::Sftrl || !r.noise.is_zero()) {
        return Err(Error::Config(
            "rk4/euler schemes run the noiseless score-space flow; use euler_maruyama otherwise"
                .into(),
        ));
    }
    let trajectories = fan_out(cfg.runs, |k| {
        let run_cfg = base.clone().with_run_id(base.run_id + k);
        match dynamics {
            Dynamics::Sftrl if deterministic => {
                simulate_deterministic_ftrl(&r.game, &r.regs, &r.x0, &run_cfg)
            }
            Dynamics::Sftrl => {
                simulate_sftrl_scores(&r.game, &r.regs, &r.noise, &r.x0, &run_cfg, None)
            }
            Dynamics::SftrlStrategies => {
                simulate_sftrl_strategies(&r.game, &r.regs, &r.noise, &r.x0, &run_cfg, None)
            }
            Dynamics::Srd => simulate_srd(
                &r.game,
                &r.noise,
                &r.x0,
                &run_cfg,
                cfg.params.variant.unwrap_or(SrdVariant::Ew),
            ),
        }
    })?;
    let mut art = Artifacts::default();
    let mut runs = Vec::with_capacity(trajectories.len());
    for (k, t) in trajectories.iter().enumerate() {
        let file = if cfg.runs == 1 {
            "trajectory.csv".to_string()
        } else {
            format!("trajectory_{k:04}.csv")
        };
        let mut bytes = Vec::new();
        t.write_csv(&mut bytes)?;
        art.files.push((file.clone(), bytes));
        if t.terminal_reason == TerminalReason::NumericalFailure && art.failure.is_none() {
            art.failure = Some(format!(
                "run {}: {}",
                t.config.run_id,
                t.failure.clone().unwrap_or_default()
            ));
        }
        runs.push(simulate_run(r, t, file)?);
    }
    let failed = runs
        .iter()
        .filter(|x| x.terminal_reason == TerminalReason::NumericalFailure)
        .count();
    let aggregate = json!({
        "n_runs": cfg.runs,
        "numerical_failures": failed,
        "dynamics": dynamics,
        "terminal_vertex_classes": class_counts(&runs),
    });
    art.summary(&report.runs(&runs)?.aggregate(&aggregate)?)
}

fn simulate_run(r: &Resolved, t: &Trajectory, file: String) -> Result<SimulateRun> {
    let last = t.final_strategy();
    let vertex = last.argmax_profile();
    let class = r.game.classify_profile(
        &crate::game::MixedProfile::vertex(r.game.action_counts(), &vertex),
        DEFAULT_TOL,
    )?;
    Ok(SimulateRun {
        run_id: t.config.run_id,
        file,
        terminal_reason: t.terminal_reason,
        failure: t.failure.clone(),
        final_time: t.times.last().copied(),
        final_strategy: last.to_vec(),
        terminal_vertex: vertex,
        terminal_vertex_class: class,
    })
}

fn class_counts(runs: &[SimulateRun]) -> serde_json::Value {
    let count = |c: NashClass| runs.iter().filter(|r| r.terminal_vertex_class == c).count();
    json!({
        "nash_strict": count(NashClass::NashStrict),
        "nash_pure": count(NashClass::NashPure),
        "nash_mixed": count(NashClass::NashMixed),
        "not_nash": count(NashClass::NotNash),
    })
}

fn hitting_time(cfg: &ExperimentConfig, r: &Resolved, report: Report) -> Result<Artifacts> {
    let player = cfg.params.player.unwrap_or(0);
    let eps = cfg.params.eps.unwrap_or(0.1);
    let stats = estimate_hitting_time(
        &r.game,
        &r.regs,
        &r.noise,
        &r.x0,
        sim(r),
        player,
        eps,
        cfg.runs,
    )?;
    let mut report = report.runs(&stats.outcomes)?.aggregate(&json!({
        "n_runs": stats.n_runs,
        "n_hit": stats.n_hit,
        "censored": stats.censored,
        "mean_hit_time": stats.mean_hit_time,
        "sample_std": stats.sample_std,
        "ci95": stats.ci95,
        "horizon": stats.horizon,
        "player": player,
        "eps": eps,
    }))?;
    if r.noise.sigma_min_sq() > 0.0 {
        let c = lambda_bound(
            &r.game,
            player,
            r.regs.kernel(player),
            &r.noise,
            eps,
            LyapunovAux::default(),
        )?;
        let within = stats.mean_hit_time.map(|m| c.admits(m));
        report = report.bounds(&json!({ "lyapunov": c, "mean_within_bound": within }))?;
    } else {
        report = report.note("no hitting-time bound: the noise is not uniformly elliptic");
    }
    Artifacts::default().summary(&report)
}

fn stability(cfg: &ExperimentConfig, r: &Resolved, report: Report) -> Result<Artifacts> {
    let face = r.face.as_ref().expect("validated when resolving");
    let tol = cfg.params.tol.unwrap_or(DEFAULT_TOL);
    let is_club = r.game.is_club_face(face, tol)?;
    let prob = cfg.params.prob.unwrap_or(0.05);
    let (lambda, level) = match cfg.params.level {
        Some(m) => (None, m),
        None => {
            let (l, m) = stability_level(&r.game, face, &r.noise, prob)
                .map_err(|e| Error::Config(format!("{e}; set params.level explicitly")))?;
            (Some(l), m)
        }
    };
    let mut params = StabilityParams::new(level, cfg.runs);
    if let Some(w) = cfg.params.window {
        params.window_fraction = w;
    }
    let stats = stability_experiment(&r.game, &r.regs, &r.noise, face, params, sim(r))?;
    let runs: Vec<_> = (0..stats.n_runs)
        .map(|k| {
            json!({
                "stayed": stats.stayed[k],
                "converged": stats.converged[k],
                "final_distance": stats.final_distance[k],
            })
        })
        .collect();
    let report = report
        .runs(&runs)?
        .aggregate(&json!({
            "face": face.to_string(),
            "is_club": is_club,
            "level": level,
            "stay_fraction": stats.stay_fraction,
            "converge_fraction": stats.converge_fraction,
            "converge_tol": params.converge_tol,
            "window_fraction": params.window_fraction,
            "init_draws_per_run": stats.init_draws_per_run,
        }))?
        .bounds(&json!({ "lambda": lambda, "prob": lambda.map(|_| prob) }))?;
    Artifacts::default().summary(&report)
}

fn energy(cfg: &ExperimentConfig, r: &Resolved, report: Report) -> Result<Artifacts> {
    let structure = r.structure.as_ref().ok_or_else(|| {
        Error::Config("the game has no harmonic structure; set game.weights".into())
    })?;
    let c = cfg.params.level.unwrap_or(2.0);
    let s = energy_escape_stats(
        &r.game,
        structure,
        &r.regs,
        &r.noise,
        &r.x0,
        c,
        cfg.runs,
        sim(r),
    )?;
    let h = &s.hitting;
    let report = report
        .runs(&h.outcomes)?
        .aggregate(&json!({
            "level": c,
            "energy0": s.energy0,
            "n_runs": h.n_runs,
            "n_hit": h.n_hit,
            "censored": h.censored,
            "mean_escape_time": h.mean_hit_time,
            "sample_std": h.sample_std,
            "ci95": h.ci95,
            "horizon": h.horizon,
        }))?
        .bounds(&json!({
            "bound": s.bound,
            "eps_c": s.eps_c,
            "within_bound": s.within_bound(),
        }))?;
    Artifacts::default().summary(&report)
}

fn club(cfg: &ExperimentConfig, r: &Resolved, report: Report) -> Result<Artifacts> {
    let tol = cfg.params.tol.unwrap_or(DEFAULT_TOL);
    let faces = r.game.enumerate_club_faces(DEFAULT_FACE_CAP, tol)?;
    let listed: Vec<_> = faces
        .iter()
        .map(|f| {
            json!({
                "face": f.to_string(),
                "supports": f.supports(),
                "proper": f.is_proper(&r.game),
            })
        })
        .collect();
    let report = report.runs(&listed)?.aggregate(&json!({
        "n_faces": faces.len(),
        "n_proper": faces.iter().filter(|f| f.is_proper(&r.game)).count(),
    }))?;
    Artifacts::default().summary(&report)
}

fn harmonic_check(cfg: &ExperimentConfig, r: &Resolved, report: Report) -> Result<Artifacts> {
    let tol = cfg.params.tol.unwrap_or(DEFAULT_TOL);
    let structure = r
        .structure
        .clone()
        .unwrap_or_else(|| unit_mass_structure(r.game.action_counts()));
    let residuals = r.game.harmonic_residuals(&structure.weights)?;
    let max = residuals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let verdict = if max <= tol {
        "harmonic"
    } else {
        "not_harmonic"
    };
    let report = report.runs(&residuals)?.aggregate(&json!({
        "weights": structure.weights,
        "mass": structure.mass,
        "center": structure.center,
        "max_residual": max,
        "tol": tol,
        "verdict": verdict,
    }))?;
    Artifacts::default().summary(&report)
}

fn srd_compare(cfg: &ExperimentConfig, r: &Resolved, report: Report) -> Result<Artifacts> {
    let base = sim(r);
    let variants = cfg
        .params
        .variants
        .clone()
        .unwrap_or_else(|| vec![SrdVariant::Ew, SrdVariant::As, SrdVariant::Pi]);
    let tol = cfg.params.absorb_tol.unwrap_or(0.01);
    let mut per_variant = Vec::new();
    let mut art = Artifacts::default();
    for v in variants {
        let finals = fan_out(cfg.runs, |k| {
            let t = simulate_srd(
                &r.game,
                &r.noise,
                &r.x0,
                &base.clone().with_run_id(base.run_id + k),
                v,
            )?;
            Ok((t.final_strategy().to_vec(), t.terminal_reason, t.failure))
        })?;
        if let Some((_, _, f)) = finals
            .iter()
            .find(|f| f.1 == TerminalReason::NumericalFailure)
        {
            art.failure
                .get_or_insert(format!("{v:?}: {}", f.clone().unwrap_or_default()));
        }
        let n = finals.len() as f64;
        let absorbed = finals
            .iter()
            .filter(|(x, _, _)| x.iter().all(|xi| xi.iter().any(|&p| p >= 1.0 - tol)))
            .count();
        let players = r.game.num_players();
        let first_extinct: Vec<f64> = (0..players)
            .map(|i| finals.iter().filter(|(x, _, _)| x[i][0] < tol).count() as f64 / n)
            .collect();
        let mean_final: Vec<Vec<f64>> = (0..players)
            .map(|i| {
                (0..r.game.action_counts()[i])
                    .map(|a| finals.iter().map(|(x, _, _)| x[i][a]).sum::<f64>() / n)
                    .collect()
            })
            .collect();
        per_variant.push(json!({
            "variant": v,
            "absorbed_fraction": absorbed as f64 / n,
            "first_action_extinct_fraction": first_extinct,
            "mean_final_strategy": mean_final,
            "final_strategies": finals.iter().map(|f| &f.0).collect::<Vec<_>>(),
        }));
    }
    let report = report
        .runs(&per_variant)?
        .aggregate(&json!({ "n_runs": cfg.runs, "absorb_tol": tol }))?;
    art.summary(&report)
}
