//! Simulates stochastic FTRL on Matching Pennies and writes the trajectory as
//! CSV to stdout (pass a path to write to a file instead).

use std::fs::File;
use std::io::{stdout, BufWriter, Write};

use sgd_lab::cli::builtin_game;
use sgd_lab::dynamics::{simulate_sftrl_scores, SimConfig};
use sgd_lab::game::MixedProfile;
use sgd_lab::noise::NoiseModel;
use sgd_lab::regularization::{Kernel, RegularizerSet};

fn main() -> sgd_lab::error::Result<()> {
    let game = builtin_game("matching_pennies").expect("builtin");
    let regs = RegularizerSet::uniform(Kernel::Entropic, 2);
    let noise = NoiseModel::isotropic(&[2, 2], 0.2)?;
    let x0 = MixedProfile::new(vec![vec![0.7, 0.3], vec![0.4, 0.6]])?;
    let cfg = SimConfig::sde(1e-2, 20.0).with_stride(50).with_seed(1);
    let traj = simulate_sftrl_scores(&game, &regs, &noise, &x0, &cfg, None)?;

    let out: Box<dyn Write> = match std::env::args().nth(1) {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(stdout().lock()),
    };
    traj.write_csv(out)?;
    eprintln!(
        "{} samples, ended by {:?}",
        traj.len(),
        traj.terminal_reason
    );
    Ok(())
}
