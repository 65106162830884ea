//! Constants of the exponential Lyapunov function behind the hitting-time
//! bound, and the bound itself.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::game::Game;
use crate::noise::NoiseModel;
use crate::regularization::Kernel;

const H_GRID: usize = 10_000;

/// Tuning knobs for [`lambda_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovAux {
    /// Simplex grid resolution for `c_ε`.
    pub grid_resolution: usize,
    /// Replaces the grid estimate of `sup |θ‴|/θ″²` when set.
    pub growth_override: Option<f64>,
}

impl Default for LyapunovAux {
    fn default() -> Self {
        Self {
            grid_resolution: 1000,
            growth_override: None,
        }
    }
}

/// Every constant entering `λ` and the expected hitting-time bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovConstants {
    pub eps: f64,
    /// Number of actions `A` of the player.
    pub actions: usize,
    /// Noise driver dimension `m`.
    pub drivers: usize,
    /// `M = sup |θ‴| / θ″²`.
    pub growth: f64,
    /// `M_v = max |v|`, attained at a vertex.
    pub payoff_bound: f64,
    pub sigma_min_sq: f64,
    pub sigma_max_sq: f64,
    /// `B = 2A(M_v + m M σ_max²)`.
    pub b: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub c_eps: f64,
    /// Smallest admissible `λ`.
    pub lambda: f64,
    /// `ln` of `(2/λ)(e^λ + A)/(H_min e^{λ/A})`.
    pub log_bound: f64,
    /// The bound itself; `+∞` when it overflows.
    pub bound: f64,
}

impl LyapunovConstants {
    /// Whether an observed mean hitting time is within the bound.
    pub fn admits(&self, mean: f64) -> bool {
        mean <= 0.0 || mean.ln() <= self.log_bound
    }
}

/// `c_ε = min g_a(1 − g_a/G)²` over `x` with every `x_b ≤ 1 − ε` and over
/// `a` with `x_a ≥ 1/A`, by grid search on the simplex plus the faces
/// `x_a = 1 − ε`.
pub fn compute_c_eps(
    kernel: Kernel,
    eps: f64,
    actions: usize,
    grid_resolution: usize,
) -> Result<f64> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(invalid("eps", "must lie in (0, 1/2)"));
    }
    if grid_resolution < 100 {
        return Err(invalid("grid_resolution", "must be at least 100"));
    }
    if actions < 2 {
        return Err(invalid("actions", "need at least two actions"));
    }
    let n = grid_resolution;
    let cap = 1.0 - eps + 1e-12;
    let floor = 1.0 / actions as f64 - 1e-12;
    let mut best = f64::INFINITY;
    let mut x = vec![0.0; actions];
    let mut eval = |x: &[f64]| {
        if x.iter().any(|&v| v > cap) {
            return;
        }
        let g: Vec<f64> = x.iter().map(|&z| kernel.inv_d2(z)).collect();
        let total: f64 = g.iter().sum();
        for (xa, ga) in x.iter().zip(&g) {
            if *xa >= floor {
                best = best.min(ga * (1.0 - ga / total).powi(2));
            }
        }
    };
    let mut counts = vec![0usize; actions];
    compositions(n, &mut counts, 0, &mut |c| {
        for (xa, &k) in x.iter_mut().zip(c) {
            *xa = k as f64 / n as f64;
        }
        eval(&x);
    });
    let mut rest = vec![0usize; actions - 1];
    compositions(n, &mut rest, 0, &mut |c| {
        x[0] = 1.0 - eps;
        for (xa, &k) in x[1..].iter_mut().zip(c) {
            *xa = eps * k as f64 / n as f64;
        }
        eval(&x);
    });
    if !(best > 0.0) || !best.is_finite() {
        return Err(Error::NumericalFailure {
            time: 0.0,
            reason: format!("c_ε grid search returned {best}"),
        });
    }
    Ok(best)
}

fn compositions(total: usize, slots: &mut [usize], pos: usize, f: &mut dyn FnMut(&[usize])) {
    if pos + 1 == slots.len() {
        slots[pos] = total;
        f(slots);
        return;
    }
    for k in 0..=total {
        slots[pos] = k;
        compositions(total - k, slots, pos + 1, f);
    }
}

/// Assembles `B`, `H_max`, `H_min`, `c_ε` and the smallest `λ` for which the
/// exponential Lyapunov function certifies a finite expected hitting time of
/// the `ε`-neighborhood of a pure strategy of `player`.
pub fn lambda_bound(
    game: &Game,
    player: usize,
    kernel: Kernel,
    noise: &NoiseModel,
    eps: f64,
    aux: LyapunovAux,
) -> Result<LyapunovConstants> {
    if player >= game.num_players() {
        return Err(Error::PlayerOutOfRange {
            player,
            players: game.num_players(),
        });
    }
    noise.require_elliptic()?;
    let actions = game.action_counts()[player];
    let a = actions as f64;
    let drivers = noise.driver_dim();
    let growth = aux
        .growth_override
        .unwrap_or_else(|| kernel.growth_constant());
    let payoff_bound = game
        .payoffs(player)
        .iter()
        .fold(0.0f64, |m, u| m.max(u.abs()));
    let (sigma_min_sq, sigma_max_sq) = (noise.sigma_min_sq(), noise.sigma_max_sq());
    let b = 2.0 * a * (payoff_bound + drivers as f64 * growth * sigma_max_sq);
    let low: Vec<f64> = (1..=H_GRID).map(|k| k as f64 / H_GRID as f64 / a).collect();
    let high: Vec<f64> = (0..=H_GRID)
        .map(|k| 1.0 / a + (1.0 - 1.0 / a) * k as f64 / H_GRID as f64)
        .collect();
    let h_max = low.iter().map(|&z| kernel.inv_d2(z)).fold(0.0, f64::max);
    let h_min = high
        .iter()
        .map(|&z| kernel.inv_d2(z))
        .fold(f64::INFINITY, f64::min);
    let c_eps = compute_c_eps(kernel, eps, actions, aux.grid_resolution)?;
    let lambda = (b + h_max / h_min * (a - 1.0) * b + 1.0) / (sigma_min_sq * c_eps);
    let log_bound =
        (2.0 / lambda).ln() + lambda + (a * (-lambda).exp()).ln_1p() - h_min.ln() - lambda / a;
    Ok(LyapunovConstants {
        eps,
        actions,
        drivers,
        growth,
        payoff_bound,
        sigma_min_sq,
        sigma_max_sq,
        b,
        h_max,
        h_min,
        c_eps,
        lambda,
        log_bound,
        bound: log_bound.exp(),
    })
}
