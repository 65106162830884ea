//! Distances and energies relative to faces, stochastic stability
//! experiments and convergence-rate fits.

use serde::Serialize;

use super::{fan_out, ols};
use crate::dynamics::{integrate_sftrl_scores, Sample, SimConfig, TerminalReason, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::game::{Face, Game, MixedProfile};
use crate::noise::{auxiliary_rng, sample_dirichlet, NoiseModel, NoiseStream};
use crate::regularization::{log_sum_exp, Kernel, RegularizerSet};

fn check_face(face: &Face, x: &[Vec<f64>]) -> Result<()> {
    if face.supports().len() != x.len()
        || face
            .supports()
            .iter()
            .zip(x)
            .any(|(s, xi)| s.iter().any(|&a| a >= xi.len()))
    {
        return Err(invalid("face", "does not match the profile"));
    }
    Ok(())
}

fn out_pairs<'a>(face: &'a Face, x: &'a [Vec<f64>]) -> impl Iterator<Item = (usize, usize)> + 'a {
    x.iter().enumerate().flat_map(move |(i, xi)| {
        (0..xi.len())
            .filter(move |a| face.supports()[i].binary_search(a).is_err())
            .map(move |a| (i, a))
    })
}

/// `ℓ¹` distance from `x` to the span of `face`, `2 Σ_i Σ_{a∉S_i} x_{ia}`.
pub fn face_distance(x: &[Vec<f64>], face: &Face) -> Result<f64> {
    check_face(face, x)?;
    Ok(2.0 * out_pairs(face, x).map(|(i, a)| x[i][a]).sum::<f64>())
}

/// Energy `E_{ia}(x) = D_i(e_{ia}, x_i)` of one out-of-face action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FaceEnergy {
    pub player: usize,
    pub action: usize,
    pub energy: f64,
}

/// Bregman divergences from `x` to every out-of-face vertex.
pub fn face_energies(
    regs: &RegularizerSet,
    x: &MixedProfile,
    face: &Face,
) -> Result<Vec<FaceEnergy>> {
    check_face(face, x)?;
    if !x.is_interior() {
        return Err(Error::Domain(
            "face energies need an interior profile".into(),
        ));
    }
    out_pairs(face, x)
        .map(|(i, a)| {
            let mut e = vec![0.0; x[i].len()];
            e[a] = 1.0;
            Ok(FaceEnergy {
                player: i,
                action: a,
                energy: regs.kernel(i).bregman(&e, &x[i])?,
            })
        })
        .collect()
}

/// Face energies computed from scores through the Fenchel coupling, which
/// stays accurate after strategies underflow.
pub fn face_energies_from_scores(
    regs: &RegularizerSet,
    y: &[Vec<f64>],
    face: &Face,
) -> Result<Vec<FaceEnergy>> {
    check_face(face, y)?;
    out_pairs(face, y)
        .map(|(i, a)| {
            let k = regs.kernel(i);
            let energy = match k {
                Kernel::Entropic => log_sum_exp(&y[i]) - y[i][a],
                _ => {
                    let mut e = vec![0.0; y[i].len()];
                    e[a] = 1.0;
                    k.fenchel(&e, &y[i])?
                }
            };
            Ok(FaceEnergy {
                player: i,
                action: a,
                energy,
            })
        })
        .collect()
}

/// Constants of the two-sided bound
/// `Σ Φ_i(c₂ − E_{ia}) ≤ d₁(x, S) ≤ 2 Σ Φ_i(c₁ − E_{ia})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichConstants {
    /// `max_i [θ_i(1) + (A_i − 1)θ_i(0) + A_i(θ_i′(1) − θ_i(1))]`.
    pub c1: f64,
    /// `min_i [θ_i(1) − θ_i(0)]`.
    pub c2: f64,
}

/// Sandwich constants for bounded kernels.
pub fn sandwich_constants(
    regs: &RegularizerSet,
    action_counts: &[usize],
) -> Result<SandwichConstants> {
    if !regs.all_bounded() {
        return Err(invalid(
            "regularizers",
            "the distance sandwich needs bounded kernels",
        ));
    }
    if regs.len() != action_counts.len() {
        return Err(invalid("regularizers", "one kernel per player required"));
    }
    let mut c1 = f64::NEG_INFINITY;
    let mut c2 = f64::INFINITY;
    for (k, &n) in regs.kernels().iter().zip(action_counts) {
        let a = n as f64;
        let (t0, t1) = (k.theta(0.0), k.theta(1.0));
        c1 = c1.max(t1 + (a - 1.0) * t0 + a * (k.d1_at_one() - t1));
        c2 = c2.min(t1 - t0);
    }
    Ok(SandwichConstants { c1, c2 })
}

impl SandwichConstants {
    /// Lower bound, distance and upper bound at `x`.
    pub fn evaluate(
        &self,
        regs: &RegularizerSet,
        x: &MixedProfile,
        face: &Face,
    ) -> Result<(f64, f64, f64)> {
        let energies = face_energies(regs, x, face)?;
        let phi = |i: usize, z: f64| RegularizerSet::uniform(regs.kernel(i), 1).rate_function(z);
        let lower = energies
            .iter()
            .map(|e| phi(e.player, self.c2 - e.energy))
            .sum();
        let upper = 2.0
            * energies
                .iter()
                .map(|e| phi(e.player, self.c1 - e.energy))
                .sum::<f64>();
        Ok((lower, face_distance(x, face)?, upper))
    }
}

/// `λ = m / σ_max²` with `m` the smallest payoff loss of an out-of-face
/// deviation, and the level `M` with `e^{−λM} = prob`.
pub fn stability_level(
    game: &Game,
    face: &Face,
    noise: &NoiseModel,
    prob: f64,
) -> Result<(f64, f64)> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(invalid("prob", "must lie in (0, 1)"));
    }
    let mut gap = f64::INFINITY;
    let supports = face.supports();
    for k in 0..game.num_profiles() {
        let a = game.profile_at(k);
        if !face.contains(&a) {
            continue;
        }
        for i in 0..game.num_players() {
            for b in face.out_actions(game, i) {
                gap = gap.min(game.payoff(i, &a) - game.deviation_payoff(i, b, &a));
            }
        }
    }
    if supports
        .iter()
        .zip(game.action_counts())
        .all(|(s, &n)| s.len() == n)
    {
        return Err(invalid("face", "the full face has no outward deviations"));
    }
    if !(gap > 0.0) {
        return Err(invalid(
            "face",
            format!("not closed under better replies (gap {gap})"),
        ));
    }
    let s2 = noise.sigma_max_sq();
    if s2 == 0.0 {
        return Ok((f64::INFINITY, 0.0));
    }
    let lambda = gap / s2;
    Ok((lambda, (1.0 / prob).ln() / lambda))
}

/// Parameters of [`stability_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityParams {
    /// Energy level `M`; runs start with every out-face energy `≥ 2M`.
    pub level: f64,
    pub n_runs: usize,
    /// A run converges when `d₁ < converge_tol` at every sample of the final
    /// window.
    pub converge_tol: f64,
    /// Final window as a fraction of the horizon.
    pub window_fraction: f64,
    /// Rejection-sampling budget per run.
    pub max_init_attempts: usize,
}

impl StabilityParams {
    pub fn new(level: f64, n_runs: usize) -> Self {
        Self {
            level,
            n_runs,
            converge_tol: 0.01,
            window_fraction: 0.5,
            max_init_attempts: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityStats {
    pub n_runs: usize,
    pub level: f64,
    pub stay_fraction: f64,
    pub converge_fraction: f64,
    pub stayed: Vec<bool>,
    pub converged: Vec<bool>,
    pub final_distance: Vec<f64>,
    /// Mean number of Dirichlet draws per accepted initial point.
    pub init_draws_per_run: f64,
}

/// Samples initial points deep inside the energy well of `face`, integrates
/// S-FTRL, and records whether the out-face energies stay above `M` and
/// whether the run settles on the face.
pub fn stability_experiment(
    game: &Game,
    regs: &RegularizerSet,
    noise: &NoiseModel,
    face: &Face,
    params: StabilityParams,
    cfg: &SimConfig,
) -> Result<StabilityStats> {
    if !regs.all_bounded() {
        return Err(invalid(
            "regularizers",
            "stability experiments need bounded kernels",
        ));
    }
    face.check(game)?;
    if params.n_runs == 0 {
        return Err(invalid("n_runs", "must be at least 1"));
    }
    if !(params.window_fraction > 0.0 && params.window_fraction <= 1.0) {
        return Err(invalid("window_fraction", "must lie in (0, 1]"));
    }
    let window_start = cfg.horizon * (1.0 - params.window_fraction);
    let runs = fan_out(params.n_runs, |r| {
        let run_id = cfg.run_id + r;
        let mut rng = auxiliary_rng(cfg.seed, run_id);
        let mut draws = 0usize;
        let x0 = loop {
            if draws == params.max_init_attempts {
                return Err(Error::Config(format!(
                    "no initial point with out-face energies ≥ {} after {draws} draws; lower the level",
                    2.0 * params.level
                )));
            }
            draws += 1;
            let x = sample_dirichlet(&mut rng, game.action_counts());
            if !x.is_interior() {
                continue;
            }
            if face_energies(regs, &x, face)?
                .iter()
                .all(|e| e.energy >= 2.0 * params.level)
            {
                break x;
            }
        };
        let y0 = regs.gradient(&x0)?;
        let run_cfg = cfg.clone().with_run_id(run_id);
        let mut stream = NoiseStream::new(cfg.seed, run_id, noise.driver_dim());
        let mut stayed = true;
        let mut converged = true;
        let mut last_distance = f64::NAN;
        let mut energy_error = None;
        let outcome = integrate_sftrl_scores(
            game,
            regs,
            noise,
            &y0,
            &run_cfg,
            &mut stream,
            &mut |s: &Sample| {
                match face_energies_from_scores(regs, s.y.expect("score-space sample"), face) {
                    Ok(es) => stayed &= es.iter().all(|e| e.energy >= params.level),
                    Err(e) => {
                        energy_error = Some(e);
                        return true;
                    }
                }
                let d = 2.0 * out_pairs(face, s.x).map(|(i, a)| s.x[i][a]).sum::<f64>();
                if s.t >= window_start {
                    converged &= d < params.converge_tol;
                }
                last_distance = d;
                false
            },
        )?;
        if let Some(e) = energy_error {
            return Err(e);
        }
        if outcome.reason == TerminalReason::NumericalFailure {
            return Err(Error::NumericalFailure {
                time: outcome.time,
                reason: outcome.failure.unwrap_or_default(),
            });
        }
        Ok((stayed, converged, last_distance, draws))
    })?;
    let n = params.n_runs as f64;
    let stayed: Vec<bool> = runs.iter().map(|r| r.0).collect();
    let converged: Vec<bool> = runs.iter().map(|r| r.1).collect();
    Ok(StabilityStats {
        n_runs: params.n_runs,
        level: params.level,
        stay_fraction: stayed.iter().filter(|&&b| b).count() as f64 / n,
        converge_fraction: converged.iter().filter(|&&b| b).count() as f64 / n,
        stayed,
        converged,
        final_distance: runs.iter().map(|r| r.2).collect(),
        init_draws_per_run: runs.iter().map(|r| r.3 as f64).sum::<f64>() / n,
    })
}

/// Least-squares fit of `min_i θ_i′(d₁(X(t), S))` against `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
    /// Time of the first sample dropped because `d₁` fell below `1e-300`.
    pub truncated_at: Option<f64>,
}

/// Fits the transformed face distance of a trajectory against time.
pub fn convergence_rate_probe(
    traj: &Trajectory,
    face: &Face,
    regs: &RegularizerSet,
) -> Result<RateFit> {
    let mut ts = Vec::new();
    let mut us = Vec::new();
    let mut truncated_at = None;
    for (t, x) in traj.times.iter().zip(&traj.strategies) {
        let d = face_distance(x, face)?;
        if !(d >= 1e-300) {
            truncated_at = Some(*t);
            break;
        }
        let u = regs
            .kernels()
            .iter()
            .map(|k| k.d1(d))
            .fold(f64::INFINITY, f64::min);
        ts.push(*t);
        us.push(u);
    }
    let (slope, intercept) =
        ols(&ts, &us).ok_or_else(|| invalid("trajectory", "need two distinct sample times"))?;
    Ok(RateFit {
        slope,
        intercept,
        points: ts.len(),
        truncated_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate_sftrl_scores, SimConfig};
    use proptest::prelude::*;

    fn pd() -> Game {
        Game::bimatrix(
            &[vec![3.0, 0.0], vec![5.0, 1.0]],
            &[vec![3.0, 5.0], vec![0.0, 1.0]],
        )
        .unwrap()
    }

    fn mp() -> Game {
        Game::bimatrix(
            &[vec![1.0, -1.0], vec![-1.0, 1.0]],
            &[vec![-1.0, 1.0], vec![1.0, -1.0]],
        )
        .unwrap()
    }

    fn defect() -> Face {
        Face::vertex(&[1, 1])
    }

    #[test]
    fn distance_examples() {
        let x = MixedProfile::new(vec![vec![0.8, 0.2], vec![0.6, 0.4]]).unwrap();
        let f = Face::new(vec![vec![0], vec![0, 1]]).unwrap();
        assert!((face_distance(&x, &f).unwrap() - 0.4).abs() < 1e-15);
        let u = MixedProfile::uniform(&[2, 2]);
        assert_eq!(face_distance(&u, &Face::vertex(&[0, 0])).unwrap(), 2.0);
        let inside = MixedProfile::new(vec![vec![1.0, 0.0], vec![0.3, 0.7]]).unwrap();
        assert_eq!(face_distance(&inside, &f).unwrap(), 0.0);
    }

    #[test]
    fn energy_examples() {
        let regs = RegularizerSet::uniform(Kernel::Entropic, 1);
        let f = Face::new(vec![vec![0]]).unwrap();
        let e = face_energies(&regs, &MixedProfile::uniform(&[2]), &f).unwrap();
        assert_eq!((e[0].player, e[0].action), (0, 1));
        assert!((e[0].energy - 2f64.ln()).abs() < 1e-15);
        let near = MixedProfile::new(vec![vec![1.0 - 1e-6, 1e-6]]).unwrap();
        let e = face_energies(&regs, &near, &f).unwrap()[0].energy;
        assert!((e - 1e6f64.ln()).abs() < 1e-5);
        let mut last = 0.0;
        for k in 1..12 {
            let p = 10f64.powi(-k);
            let x = MixedProfile::new(vec![vec![1.0 - p, p]]).unwrap();
            let e = face_energies(&regs, &x, &f).unwrap()[0].energy;
            assert!(e > last);
            last = e;
        }
        let boundary = MixedProfile::new(vec![vec![1.0, 0.0]]).unwrap();
        assert!(face_energies(&regs, &boundary, &f).is_err());
    }

    #[test]
    fn score_energies_agree_with_strategy_energies() {
        for k in [
            Kernel::Entropic,
            Kernel::LogBarrier,
            Kernel::Tsallis { q: 0.5 },
        ] {
            let regs = RegularizerSet::uniform(k, 2);
            let y = vec![vec![0.3, -1.2, 0.5], vec![2.0, 0.0]];
            let x = regs
                .mirror(&crate::regularization::ScoreProfile::new(y.clone()).unwrap())
                .unwrap();
            let f = Face::new(vec![vec![0], vec![1]]).unwrap();
            let a = face_energies(&regs, &x, &f).unwrap();
            let b = face_energies_from_scores(&regs, &y, &f).unwrap();
            for (p, q) in a.iter().zip(&b) {
                if !k.is_bounded() {
                    assert!(p.energy.is_infinite() && q.energy.is_infinite());
                    continue;
                }
                assert!((p.energy - q.energy).abs() < 1e-9, "{k}");
            }
        }
    }

    #[test]
    fn entropic_sandwich_constants() {
        let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
        let c = sandwich_constants(&regs, &[2, 3]).unwrap();
        assert_eq!(c.c2, 0.0);
        assert!((c.c1 - 3.0).abs() < 1e-15);
        let lb = RegularizerSet::uniform(Kernel::LogBarrier, 2);
        assert!(sandwich_constants(&lb, &[2, 2]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn sandwich_holds(
            w in prop::collection::vec(0.001f64..1.0, 5),
            q in 0.1f64..0.9,
            which in 0usize..2,
            face_mask in 0usize..6,
        ) {
            let kernel = if which == 0 { Kernel::Entropic } else { Kernel::Tsallis { q } };
            let regs = RegularizerSet::uniform(kernel, 2);
            let s0: f64 = w[..2].iter().sum();
            let s1: f64 = w[2..].iter().sum();
            let x = MixedProfile::new(vec![
                w[..2].iter().map(|v| v / s0).collect(),
                w[2..].iter().map(|v| v / s1).collect(),
            ]);
            let x = match x { Ok(x) => x, Err(_) => return Ok(()) };
            let faces = [
                vec![vec![0], vec![0]],
                vec![vec![1], vec![0, 2]],
                vec![vec![0, 1], vec![2]],
                vec![vec![0], vec![0, 1, 2]],
                vec![vec![1], vec![1, 2]],
                vec![vec![0, 1], vec![0, 1]],
            ];
            let face = Face::new(faces[face_mask].clone()).unwrap();
            let c = sandwich_constants(&regs, &[2, 3]).unwrap();
            let (lo, d, hi) = c.evaluate(&regs, &x, &face).unwrap();
            prop_assert!(lo <= d + 1e-12, "lower {lo} > d {d}");
            prop_assert!(d <= hi + 1e-12, "d {d} > upper {hi}");
        }

        #[test]
        fn distance_is_the_l1_minimum(p in 0.0f64..1.0, q in 0.0f64..1.0, r in 0.0f64..1.0) {
            // Brute force over a grid of the edge face {0}×Δ({0,1,2}).
            let s = q + r + 0.1;
            let x = vec![vec![p, 1.0 - p], vec![q / s, r / s, 0.1 / s]];
            let face = Face::new(vec![vec![0], vec![0, 1, 2]]).unwrap();
            let n = 60;
            let mut best = f64::INFINITY;
            for i in 0..=n {
                for j in 0..=(n - i) {
                    let z = [i as f64 / n as f64, j as f64 / n as f64, (n - i - j) as f64 / n as f64];
                    let dist = (x[0][0] - 1.0).abs() + x[0][1]
                        + (0..3).map(|a| (x[1][a] - z[a]).abs()).sum::<f64>();
                    best = best.min(dist);
                }
            }
            let d = face_distance(&x, &face).unwrap();
            prop_assert!((d - best).abs() <= 3.0 / n as f64 + 1e-12);
        }
    }

    #[test]
    fn level_from_deviation_gap() {
        let noise = NoiseModel::isotropic(&[2, 2], 0.1).unwrap();
        let (lambda, m) = stability_level(&pd(), &defect(), &noise, 0.05).unwrap();
        assert!((lambda - 100.0).abs() < 1e-9);
        assert!(((-lambda * m).exp() - 0.05).abs() < 1e-12);
        assert!(stability_level(&pd(), &Face::vertex(&[0, 0]), &noise, 0.05).is_err());
        assert!(stability_level(&pd(), &Face::full(&pd()), &noise, 0.05).is_err());
    }

    #[test]
    fn noiseless_runs_stay_and_converge() {
        let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
        let zero = NoiseModel::isotropic(&[2, 2], 0.0).unwrap();
        let params = StabilityParams::new(0.5, 20);
        let s = stability_experiment(
            &pd(),
            &regs,
            &zero,
            &defect(),
            params,
            &SimConfig::sde(0.02, 60.0),
        )
        .unwrap();
        assert_eq!(s.stay_fraction, 1.0);
        assert_eq!(s.converge_fraction, 1.0);
    }

    #[test]
    fn unreachable_level_is_a_configuration_error() {
        let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
        let noise = NoiseModel::isotropic(&[2, 2], 0.1).unwrap();
        let mut params = StabilityParams::new(40.0, 1);
        params.max_init_attempts = 1000;
        let err = stability_experiment(
            &pd(),
            &regs,
            &noise,
            &defect(),
            params,
            &SimConfig::sde(0.1, 1.0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn matching_pennies_vertex_is_not_stable() {
        let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
        let noise = NoiseModel::isotropic(&[2, 2], 0.1).unwrap();
        let params = StabilityParams::new(1.0, 50);
        let s = stability_experiment(
            &mp(),
            &regs,
            &noise,
            &Face::vertex(&[0, 0]),
            params,
            &SimConfig::sde(0.02, 200.0),
        )
        .unwrap();
        assert!(s.converge_fraction <= 0.05);
    }

    #[test]
    fn rate_fit_on_noiseless_defection() {
        let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
        let zero = NoiseModel::isotropic(&[2, 2], 0.0).unwrap();
        let t = simulate_sftrl_scores(
            &pd(),
            &regs,
            &zero,
            &MixedProfile::uniform(&[2, 2]),
            &SimConfig::sde(0.01, 50.0).with_stride(10),
            None,
        )
        .unwrap();
        let fit = convergence_rate_probe(&t, &defect(), &regs).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.2, "{}", fit.slope);
        assert_eq!(fit.truncated_at, None);
    }

    #[test]
    fn rate_fit_truncates_at_underflow() {
        let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
        let zero = NoiseModel::isotropic(&[2, 2], 0.0).unwrap();
        let t = simulate_sftrl_scores(
            &pd(),
            &regs,
            &zero,
            &MixedProfile::uniform(&[2, 2]),
            &SimConfig::sde(0.05, 900.0).with_stride(20),
            None,
        )
        .unwrap();
        let fit = convergence_rate_probe(&t, &defect(), &regs).unwrap();
        assert!(fit.truncated_at.is_some());
        assert!((fit.slope + 1.0).abs() < 0.2);
    }
}
