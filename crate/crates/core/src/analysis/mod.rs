//! Monte Carlo estimators and exact bound calculators.

mod faces;
mod harmonic;
mod hitting;
mod lyapunov;
pub mod report;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;

pub use faces::{
    convergence_rate_probe, face_distance, face_energies, face_energies_from_scores,
    sandwich_constants, stability_experiment, stability_level, FaceEnergy, RateFit,
    SandwichConstants, StabilityParams, StabilityStats,
};
pub use harmonic::{
    energy_escape_stats, energy_from_scores, energy_profile, epsilon_c, generator_estimate,
    harmonic_energy, point_at_energy, random_probes, recurrence_probe, EnergyProfile, EnergyStats,
    EpsilonEstimate, GeneratorParams, GeneratorProbe, RecurrenceMode, RecurrenceStats,
    EPSILON_SAMPLES,
};
pub use hitting::{estimate_hitting_time, pure_hitting_time, HittingStats};
pub use lyapunov::{compute_c_eps, lambda_bound, LyapunovAux, LyapunovConstants};

/// Sample mean, standard deviation and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub se: f64,
}

impl Summary {
    /// Summary of `values`; the standard deviation uses `n − 1` and is zero
    /// for a single value.
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self {
            n,
            mean,
            std,
            se: std / (n as f64).sqrt(),
        })
    }

    /// Normal-approximation 95% confidence interval for the mean.
    pub fn ci95(&self) -> (f64, f64) {
        (self.mean - 1.96 * self.se, self.mean + 1.96 * self.se)
    }
}

/// Runs `f(run_id)` for `run_id ∈ 0..n` in parallel; results keep run order.
pub(crate) fn fan_out<T: Send>(n: usize, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..n as u64).into_par_iter().map(&f).collect()
}

/// Ordinary least-squares slope and intercept.
pub(crate) fn ols(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_basics() {
        let s = Summary::of(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
        assert!(Summary::of(&[]).is_none());
        assert_eq!(Summary::of(&[4.0]).unwrap().std, 0.0);
        let (lo, hi) = s.ci95();
        assert!(lo < 2.0 && hi > 2.0);
    }

    #[test]
    fn ols_recovers_a_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let (m, b) = ols(&xs, &ys).unwrap();
        assert!((m + 0.5).abs() < 1e-15 && (b - 2.0).abs() < 1e-15);
        assert!(ols(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn fan_out_keeps_order() {
        let v = fan_out(100, |r| Ok(r * 2)).unwrap();
        assert_eq!(v, (0..100).map(|r| r * 2).collect::<Vec<_>>());
    }
}
