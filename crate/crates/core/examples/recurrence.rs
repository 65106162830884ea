//! Escape and return times of the harmonic energy under noisy FTRL in
//! Matching Pennies, with the escape bound from `ε(c)`.

use sgd_lab::analysis::{energy_escape_stats, recurrence_probe, RecurrenceMode};
use sgd_lab::dynamics::SimConfig;
use sgd_lab::game::make_zero_sum;
use sgd_lab::noise::NoiseModel;
use sgd_lab::regularization::{Kernel, RegularizerSet};

fn main() -> sgd_lab::error::Result<()> {
    let zs = make_zero_sum(&[vec![1.0, -1.0], vec![-1.0, 1.0]])?;
    let (game, structure) = (zs.game, zs.structure.expect("interior equilibrium"));
    let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
    let noise = NoiseModel::isotropic(&[2, 2], 0.2)?;
    let cfg = SimConfig::sde(1e-2, 1e4).with_seed(10);

    let esc = energy_escape_stats(
        &game,
        &structure,
        &regs,
        &noise,
        &structure.center,
        2.0,
        50,
        &cfg,
    )?;
    println!(
        "escape from E <= 2: mean {:.1} vs bound {:.1} (eps(c) = {:.4})",
        esc.hitting.mean_hit_time.unwrap_or(f64::NAN),
        esc.bound,
        esc.eps_c.value
    );

    let mode = RecurrenceMode::Return {
        start: 3.0,
        level: 1.0,
    };
    let ret = recurrence_probe(&game, &structure, &regs, &noise, mode, 50, &cfg)?;
    println!(
        "return from E = 3 to E <= 1: {}/{} runs",
        ret.hitting.n_hit, ret.hitting.n_runs
    );
    for (t, frac) in ret.censoring_curve {
        println!("  still out at t = {t:>7.1}: {frac:.2}");
    }
    Ok(())
}
