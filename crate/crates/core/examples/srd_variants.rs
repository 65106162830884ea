//! Stochastic replicator dynamics under pure noise: aggregate shocks drive
//! the noisier action extinct, exponential weights keep payoff differences
//! diffusing freely.

use sgd_lab::dynamics::{project_payoff_differences, simulate_srd, SimConfig, SrdVariant};
use sgd_lab::game::{Game, MixedProfile};
use sgd_lab::noise::NoiseModel;
use sgd_lab::regularization::{Kernel, RegularizerSet};

fn main() -> sgd_lab::error::Result<()> {
    let zero = Game::new(vec![2, 2], vec![vec![0.0; 4]; 2])?;
    let noise = NoiseModel::uncorrelated(vec![vec![0.2, 0.1], vec![0.2, 0.1]])?;
    let x0 = MixedProfile::uniform(&[2, 2]);
    let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
    let runs = 50;

    for variant in [SrdVariant::Ew, SrdVariant::As, SrdVariant::Pi] {
        let (mut extinct, mut z_spread) = (0, 0.0);
        for run in 0..runs {
            let cfg = SimConfig::sde(2e-2, 1000.0)
                .with_stride(500)
                .with_seed(11)
                .with_run_id(run);
            let traj = simulate_srd(&zero, &noise, &x0, &cfg, variant)?;
            if traj.final_strategy()[0][0] < 0.01 {
                extinct += 1;
            }
            let z = project_payoff_differences(&traj, &regs, &[1, 1])?;
            z_spread += z.last().expect("samples")[0][0].powi(2);
        }
        println!(
            "{variant:?}: first action extinct in {extinct}/{runs} runs, mean z^2 at T = {:.1}",
            z_spread / runs as f64
        );
    }
    Ok(())
}
