//! Diffusion models `Σ(x)` and reproducible Gaussian noise streams.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::game::MixedProfile;

/// State-dependent diffusion matrix, stacked over players' action rows.
pub type DiffusionFn = Arc<dyn Fn(&[Vec<f64>]) -> Vec<Vec<f64>> + Send + Sync>;

const CALLBACK_PROBES: usize = 256;

#[derive(Clone)]
enum Kind {
    Uncorrelated(Vec<Vec<f64>>),
    Full(Vec<Vec<f64>>),
    Callback(DiffusionFn),
}

/// A diffusion model with cached covariance eigen-bounds.
#[derive(Clone)]
pub struct NoiseModel {
    kind: Kind,
    action_counts: Vec<usize>,
    driver_dim: usize,
    sigma_min_sq: f64,
    sigma_max_sq: f64,
}

impl fmt::Debug for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            Kind::Uncorrelated(s) => format!("Uncorrelated({s:?})"),
            Kind::Full(m) => format!("Full({m:?})"),
            Kind::Callback(_) => "Callback".to_string(),
        };
        f.debug_struct("NoiseModel")
            .field("kind", &kind)
            .field("driver_dim", &self.driver_dim)
            .field("sigma_min_sq", &self.sigma_min_sq)
            .field("sigma_max_sq", &self.sigma_max_sq)
            .finish()
    }
}

impl NoiseModel {
    /// Independent Brownian motion per action with volatility `sigma[i][a]`.
    pub fn uncorrelated(sigma: Vec<Vec<f64>>) -> Result<Self> {
        if sigma.iter().flatten().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(invalid(
                "sigma",
                "volatilities must be finite and nonnegative",
            ));
        }
        let sq = sigma.iter().flatten().map(|s| s * s);
        let sigma_min_sq = sq.clone().fold(f64::INFINITY, f64::min);
        let sigma_max_sq = sq.fold(0.0, f64::max);
        let action_counts: Vec<usize> = sigma.iter().map(Vec::len).collect();
        Ok(Self {
            driver_dim: action_counts.iter().sum(),
            action_counts,
            kind: Kind::Uncorrelated(sigma),
            sigma_min_sq,
            sigma_max_sq,
        })
    }

    /// The same volatility on every action.
    pub fn isotropic(action_counts: &[usize], sigma: f64) -> Result<Self> {
        Self::uncorrelated(action_counts.iter().map(|&a| vec![sigma; a]).collect())
    }

    /// A constant `(Σ_i A_i) × k` diffusion matrix.
    pub fn full(action_counts: &[usize], matrix: Vec<Vec<f64>>) -> Result<Self> {
        let rows: usize = action_counts.iter().sum();
        let k = matrix.first().map_or(0, Vec::len);
        if matrix.len() != rows || k == 0 || matrix.iter().any(|r| r.len() != k) {
            return Err(invalid(
                "matrix",
                format!("expected a {rows}×k matrix with k ≥ 1"),
            ));
        }
        if matrix.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("matrix", "entries must be finite"));
        }
        let (sigma_min_sq, sigma_max_sq) = covariance_bounds(&matrix);
        Ok(Self {
            kind: Kind::Full(matrix),
            action_counts: action_counts.to_vec(),
            driver_dim: k,
            sigma_min_sq,
            sigma_max_sq,
        })
    }

    /// A state-dependent diffusion; eigen-bounds are taken over a fixed probe
    /// set of interior profiles.
    pub fn callback(action_counts: &[usize], driver_dim: usize, f: DiffusionFn) -> Result<Self> {
        if driver_dim == 0 {
            return Err(invalid("driver_dim", "must be at least 1"));
        }
        let rows: usize = action_counts.iter().sum();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for k in 0..CALLBACK_PROBES {
            let x = if k == 0 {
                MixedProfile::uniform(action_counts)
            } else {
                sample_dirichlet(&mut rng, action_counts)
            };
            let m = f(&x);
            if m.len() != rows || m.iter().any(|r| r.len() != driver_dim) {
                return Err(invalid("callback", "diffusion matrix has the wrong shape"));
            }
            let (a, b) = covariance_bounds(&m);
            lo = lo.min(a);
            hi = hi.max(b);
        }
        Ok(Self {
            kind: Kind::Callback(f),
            action_counts: action_counts.to_vec(),
            driver_dim,
            sigma_min_sq: lo,
            sigma_max_sq: hi,
        })
    }

    pub fn driver_dim(&self) -> usize {
        self.driver_dim
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    /// Smallest eigenvalue of `ΣΣᵀ` (over the probe set for callbacks).
    pub fn sigma_min_sq(&self) -> f64 {
        self.sigma_min_sq
    }

    /// Largest eigenvalue of `ΣΣᵀ` (over the probe set for callbacks).
    pub fn sigma_max_sq(&self) -> f64 {
        self.sigma_max_sq
    }

    /// Per-action volatilities when the model is uncorrelated.
    pub fn diagonal(&self) -> Option<&[Vec<f64>]> {
        match &self.kind {
            Kind::Uncorrelated(s) => Some(s),
            _ => None,
        }
    }

    /// Whether `Σ` vanishes identically (callbacks are never treated as zero).
    pub fn is_zero(&self) -> bool {
        match &self.kind {
            Kind::Uncorrelated(s) => s.iter().flatten().all(|v| *v == 0.0),
            Kind::Full(m) => m.iter().flatten().all(|v| *v == 0.0),
            Kind::Callback(_) => false,
        }
    }

    /// Errors unless `σ_min² > 0`.
    pub fn require_elliptic(&self) -> Result<()> {
        if !(self.sigma_min_sq > 0.0) {
            return Err(Error::AssumptionViolated(format!(
                "σ_min² = {} must be positive",
                self.sigma_min_sq
            )));
        }
        Ok(())
    }

    pub(crate) fn check_shape(&self, action_counts: &[usize]) -> Result<()> {
        if self.action_counts != action_counts {
            return Err(invalid("noise", "noise dimensions do not match the game"));
        }
        Ok(())
    }

    /// Dense `Σ(x)`.
    pub fn matrix(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        match &self.kind {
            Kind::Uncorrelated(s) => {
                let n = self.driver_dim;
                let mut out = Vec::with_capacity(n);
                let mut r = 0;
                for si in s {
                    for &v in si {
                        let mut row = vec![0.0; n];
                        row[r] = v;
                        out.push(row);
                        r += 1;
                    }
                }
                out
            }
            Kind::Full(m) => m.clone(),
            Kind::Callback(f) => f(x),
        }
    }

    /// Writes `Σ(x)ξ` into per-player buffers.
    pub fn apply(&self, x: &[Vec<f64>], xi: &[f64], out: &mut [Vec<f64>]) {
        match &self.kind {
            Kind::Uncorrelated(s) => {
                let mut r = 0;
                for (oi, si) in out.iter_mut().zip(s) {
                    for (o, v) in oi.iter_mut().zip(si) {
                        *o = v * xi[r];
                        r += 1;
                    }
                }
            }
            Kind::Full(m) => apply_dense(m, xi, out),
            Kind::Callback(f) => apply_dense(&f(x), xi, out),
        }
    }
}

fn apply_dense(m: &[Vec<f64>], xi: &[f64], out: &mut [Vec<f64>]) {
    let mut r = 0;
    for oi in out.iter_mut() {
        for o in oi.iter_mut() {
            *o = m[r].iter().zip(xi).map(|(a, b)| a * b).sum();
            r += 1;
        }
    }
}

fn covariance_bounds(m: &[Vec<f64>]) -> (f64, f64) {
    let rows = m.len();
    let k = m[0].len();
    let s = DMatrix::from_fn(rows, k, |i, j| m[i][j]);
    let theta = &s * s.transpose();
    let eig = theta.symmetric_eigenvalues();
    let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0);
    let hi = eig.iter().cloned().fold(0.0, f64::max);
    (lo, hi)
}

/// Product of independent uniform (Dirichlet(1)) draws on each simplex.
pub fn sample_dirichlet<R: Rng + ?Sized>(rng: &mut R, action_counts: &[usize]) -> MixedProfile {
    MixedProfile::from_unchecked(
        action_counts
            .iter()
            .map(|&a| {
                let w: Vec<f64> = (0..a).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                let s: f64 = w.iter().sum();
                w.into_iter().map(|v| v / s).collect()
            })
            .collect(),
    )
}

/// Seeded Gaussian source with one independent substream per driver
/// coordinate. Streams built from the same `(seed, run_id)` produce identical
/// draws, which is how paired integrators share noise.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rngs: Vec<ChaCha8Rng>,
}

impl NoiseStream {
    pub fn new(seed: u64, run_id: u64, drivers: usize) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&run_id.to_le_bytes());
        let rngs = (0..drivers)
            .map(|d| {
                let mut rng = ChaCha8Rng::from_seed(key);
                rng.set_stream(d as u64);
                rng
            })
            .collect();
        Self { rngs }
    }

    pub fn drivers(&self) -> usize {
        self.rngs.len()
    }

    /// Fills `out` with one standard normal per driver.
    pub fn fill(&mut self, out: &mut [f64]) {
        for (o, rng) in out.iter_mut().zip(self.rngs.iter_mut()) {
            *o = rng.sample(StandardNormal);
        }
    }
}

/// Auxiliary generator for Monte Carlo sampling that is not integrator noise,
/// kept on a stream index disjoint from every driver substream.
pub fn auxiliary_rng(seed: u64, run_id: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&run_id.to_le_bytes());
    key[16] = 1;
    ChaCha8Rng::from_seed(key)
}
