//! The harmonic energy: conserved by deterministic FTRL, driven upward by
//! noise. Compares the Monte Carlo generator with its analytic bounds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sgd_lab::analysis::{
    energy_profile, generator_estimate, harmonic_energy, random_probes, GeneratorParams,
};
use sgd_lab::dynamics::{simulate_deterministic_ftrl, SimConfig};
use sgd_lab::game::{make_zero_sum, MixedProfile};
use sgd_lab::noise::NoiseModel;
use sgd_lab::regularization::{Kernel, RegularizerSet};

fn main() -> sgd_lab::error::Result<()> {
    let zs = make_zero_sum(&[vec![1.0, -1.0], vec![-1.0, 1.0]])?;
    let (game, structure) = (zs.game, zs.structure.expect("interior equilibrium"));
    let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
    let x0 = MixedProfile::new(vec![vec![0.7, 0.3], vec![0.4, 0.6]])?;

    let ode = simulate_deterministic_ftrl(&game, &regs, &x0, &SimConfig::ode(1e-3, 50.0))?;
    let energies: Vec<f64> = ode
        .strategies
        .iter()
        .map(|x| harmonic_energy(&structure, &regs, x))
        .collect::<Result<_, _>>()?;
    let spread = energies
        .iter()
        .fold(0.0f64, |m, e| m.max((e - energies[0]).abs()));
    println!(
        "deterministic: E = {:.6}, max drift {spread:.2e}",
        energies[0]
    );

    let noise = NoiseModel::isotropic(&[2, 2], 0.2)?;
    let cfg = SimConfig::sde(1e-2, 200.0).with_stride(2000).with_seed(9);
    let profile = energy_profile(
        &game,
        &structure,
        &regs,
        &noise,
        &structure.center,
        &cfg,
        100,
    )?;
    for ((t, m), se) in profile.times.iter().zip(&profile.mean).zip(&profile.se) {
        println!("t = {t:>5.0}: mean E = {m:.4} ± {se:.4}");
    }

    let probes = random_probes(&mut ChaCha8Rng::seed_from_u64(1), &regs, &[2, 2], 3)?;
    for g in generator_estimate(
        &game,
        &structure,
        &regs,
        &noise,
        &probes,
        GeneratorParams::default(),
    )? {
        println!(
            "generator {:.4} ± {:.4}, bounds [{:.4}, {:.4}], within {}",
            g.estimate, g.se, g.lower, g.upper, g.within
        );
    }
    Ok(())
}
