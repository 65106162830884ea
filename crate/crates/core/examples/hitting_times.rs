//! Monte Carlo hitting times of the `ε`-neighbourhood of a pure strategy in
//! Matching Pennies, against the Lyapunov upper bound.

use sgd_lab::analysis::{estimate_hitting_time, lambda_bound, LyapunovAux};
use sgd_lab::cli::builtin_game;
use sgd_lab::dynamics::SimConfig;
use sgd_lab::game::MixedProfile;
use sgd_lab::noise::NoiseModel;
use sgd_lab::regularization::{Kernel, RegularizerSet};

fn main() -> sgd_lab::error::Result<()> {
    let game = builtin_game("matching_pennies").expect("builtin");
    let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
    let noise = NoiseModel::uncorrelated(vec![vec![0.2, 0.2], vec![0.2, 0.2]])?;
    let x0 = MixedProfile::new(vec![vec![0.6, 0.4], vec![0.5, 0.5]])?;
    let eps = 0.1;
    let cfg = SimConfig::sde(1e-2, 1e4).with_seed(3);
    let stats = estimate_hitting_time(&game, &regs, &noise, &x0, &cfg, 0, eps, 50)?;
    let bound = lambda_bound(
        &game,
        0,
        Kernel::Entropic,
        &noise,
        eps,
        LyapunovAux::default(),
    )?;

    println!(
        "hit {}/{} runs, censored {}",
        stats.n_hit, stats.n_runs, stats.censored
    );
    if let (Some(mean), Some((lo, hi))) = (stats.mean_hit_time, stats.ci95) {
        println!("mean hitting time {mean:.2} (95% CI {lo:.2}..{hi:.2})");
        println!("within bound: {}", bound.admits(mean));
    }
    println!(
        "c_eps = {:.4e}, lambda = {:.4e}, ln bound = {:.2}",
        bound.c_eps, bound.lambda, bound.log_bound
    );
    Ok(())
}
