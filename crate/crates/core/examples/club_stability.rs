//! Stochastic stability of the mutual-defection vertex in the Prisoner's
//! Dilemma, plus the convergence rate of a single run.

use sgd_lab::analysis::{
    convergence_rate_probe, stability_experiment, stability_level, StabilityParams,
};
use sgd_lab::cli::builtin_game;
use sgd_lab::dynamics::{simulate_sftrl_scores, SimConfig};
use sgd_lab::game::{Face, MixedProfile, DEFAULT_TOL};
use sgd_lab::noise::NoiseModel;
use sgd_lab::regularization::{Kernel, RegularizerSet};

fn main() -> sgd_lab::error::Result<()> {
    let game = builtin_game("prisoners_dilemma").expect("builtin");
    let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
    let noise = NoiseModel::isotropic(&[2, 2], 0.1)?;
    let face = Face::vertex(&[1, 1]);
    println!(
        "{face} is a club face: {}",
        game.is_club_face(&face, DEFAULT_TOL)?
    );

    let (lambda, level) = stability_level(&game, &face, &noise, 0.05)?;
    println!("lambda = {lambda:.2}, energy level M = {level:.4}");
    let cfg = SimConfig::sde(1e-2, 100.0).with_seed(7);
    let stats = stability_experiment(
        &game,
        &regs,
        &noise,
        &face,
        StabilityParams::new(level, 100),
        &cfg,
    )?;
    println!(
        "stayed {:.2}, converged {:.2} (mean {:.1} initial draws per run)",
        stats.stay_fraction, stats.converge_fraction, stats.init_draws_per_run
    );

    let x0 = MixedProfile::uniform(&[2, 2]);
    let traj = simulate_sftrl_scores(
        &game,
        &regs,
        &noise,
        &x0,
        &SimConfig::sde(1e-2, 50.0).with_stride(10),
        None,
    )?;
    let fit = convergence_rate_probe(&traj, &face, &regs)?;
    println!(
        "log-distance slope {:.3} over {} samples",
        fit.slope, fit.points
    );
    Ok(())
}
