//! Decomposable regularizers `h(x) = Σ_a θ(x_a)` on the simplex, their mirror
//! maps, Bregman divergences, Fenchel couplings and mirror Jacobians.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::game::MixedProfile;

/// Default Tsallis exponent.
pub const DEFAULT_TSALLIS_Q: f64 = 0.5;

const BISECTION_MAX_ITER: usize = 400;
const BISECTION_TOL: f64 = 1e-13;
const NEWTON_POLISH_STEPS: usize = 5;
const PROBE_GRID: usize = 10_000;

/// A steep, strongly convex kernel `θ` on `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `θ(z) = z ln z`.
    Entropic,
    /// `θ(z) = −ln z`.
    LogBarrier,
    /// `θ(z) = (z^q − z) / (q(q − 1))` for `q ∈ (0, 1)`.
    Tsallis { q: f64 },
}

impl Kernel {
    pub fn tsallis(q: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(invalid(
                "q",
                format!("Tsallis exponent must lie in (0,1), got {q}"),
            ));
        }
        Ok(Kernel::Tsallis { q })
    }

    pub fn theta(&self, z: f64) -> f64 {
        match *self {
            Kernel::Entropic => {
                if z == 0.0 {
                    0.0
                } else {
                    z * z.ln()
                }
            }
            Kernel::LogBarrier => -z.ln(),
            Kernel::Tsallis { q } => (z.powf(q) - z) / (q * (q - 1.0)),
        }
    }

    pub fn d1(&self, z: f64) -> f64 {
        match *self {
            Kernel::Entropic => 1.0 + z.ln(),
            Kernel::LogBarrier => -1.0 / z,
            Kernel::Tsallis { q } => (q * z.powf(q - 1.0) - 1.0) / (q * (q - 1.0)),
        }
    }

    pub fn d2(&self, z: f64) -> f64 {
        match *self {
            Kernel::Entropic => 1.0 / z,
            Kernel::LogBarrier => 1.0 / (z * z),
            Kernel::Tsallis { q } => z.powf(q - 2.0),
        }
    }

    pub fn d3(&self, z: f64) -> f64 {
        match *self {
            Kernel::Entropic => -1.0 / (z * z),
            Kernel::LogBarrier => -2.0 / (z * z * z),
            Kernel::Tsallis { q } => (q - 2.0) * z.powf(q - 3.0),
        }
    }

    /// `1/θ″(z)`, the coefficient `g` of the strategy-space dynamics.
    pub fn inv_d2(&self, z: f64) -> f64 {
        match *self {
            Kernel::Entropic => z,
            Kernel::LogBarrier => z * z,
            Kernel::Tsallis { q } => z.powf(2.0 - q),
        }
    }

    /// `(θ′)⁻¹(w)`; returns `+∞` where `w` is above the range of `θ′`.
    pub fn inv_d1(&self, w: f64) -> f64 {
        match *self {
            Kernel::Entropic => (w - 1.0).exp(),
            Kernel::LogBarrier => {
                if w < 0.0 {
                    -1.0 / w
                } else {
                    f64::INFINITY
                }
            }
            Kernel::Tsallis { q } => {
                let base = (1.0 + q * (q - 1.0) * w) / q;
                if base > 0.0 {
                    base.powf(1.0 / (q - 1.0))
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `θ′(1)`.
    pub fn d1_at_one(&self) -> f64 {
        self.d1(1.0)
    }

    /// Whether `θ(0)` is finite.
    pub fn is_bounded(&self) -> bool {
        !matches!(self, Kernel::LogBarrier)
    }

    /// `inf θ″` over a grid of `(0, 1]`.
    pub fn strong_convexity(&self) -> f64 {
        (1..=PROBE_GRID)
            .map(|k| self.d2(k as f64 / PROBE_GRID as f64))
            .fold(f64::INFINITY, f64::min)
    }

    /// `sup |θ‴| / θ″²` over a grid of `(0, 1]`.
    pub fn growth_constant(&self) -> f64 {
        (1..=PROBE_GRID)
            .map(|k| {
                let z = k as f64 / PROBE_GRID as f64;
                self.d3(z).abs() / self.d2(z).powi(2)
            })
            .fold(0.0, f64::max)
    }

    /// Mirror map into a caller-provided buffer.
    pub fn mirror_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        if let Kernel::Entropic = self {
            logit_into(y, out);
            return Ok(());
        }
        self.solve_mirror(y, out).map(|_| ())
    }

    /// `Q(y) = argmax_{x∈Δ} ⟨y,x⟩ − h(x)`.
    pub fn mirror(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_finite(y)?;
        let mut out = vec![0.0; y.len()];
        self.mirror_into(y, &mut out)?;
        Ok(out)
    }

    /// Mirror map through the bracketed root solve regardless of kernel,
    /// returning the multiplier `μ` with `y_a = θ′(x_a) + μ`.
    pub fn mirror_root_finding(&self, y: &[f64]) -> Result<MirrorSolution> {
        check_finite(y)?;
        let mut x = vec![0.0; y.len()];
        let (mu, iterations) = self.solve_mirror(y, &mut x)?;
        Ok(MirrorSolution { x, mu, iterations })
    }

    fn solve_mirror(&self, y: &[f64], out: &mut [f64]) -> Result<(f64, usize)> {
        let n = y.len();
        if n == 0 {
            return Err(invalid("y", "empty score vector"));
        }
        if n == 1 {
            out[0] = 1.0;
            return Ok((y[0] - self.d1_at_one(), 0));
        }
        let ymax = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let excess = |mu: f64| y.iter().map(|&ya| self.inv_d1(ya - mu)).sum::<f64>() - 1.0;
        let mut lo = ymax - self.d1_at_one();
        let mut hi = ymax - self.d1(1.0 / n as f64);
        let mut mu = 0.5 * (lo + hi);
        let mut f = excess(mu);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < BISECTION_MAX_ITER {
            iterations += 1;
            mu = 0.5 * (lo + hi);
            if mu <= lo || mu >= hi {
                converged = true;
                break;
            }
            f = excess(mu);
            if f.abs() <= BISECTION_TOL {
                converged = true;
                break;
            }
            if f > 0.0 {
                lo = mu;
            } else {
                hi = mu;
            }
        }
        if !converged {
            return Err(Error::MirrorNoConvergence {
                iterations,
                lo,
                hi,
                residual: f,
            });
        }
        for _ in 0..NEWTON_POLISH_STEPS {
            let g: f64 = y.iter().map(|&ya| self.inv_d2(self.inv_d1(ya - mu))).sum();
            let f = excess(mu);
            if f == 0.0 || !(g > 0.0) {
                break;
            }
            let next = mu + f / g;
            if !(next > lo && next < hi) || next == mu {
                break;
            }
            mu = next;
        }
        let mut sum = 0.0;
        for (o, &ya) in out.iter_mut().zip(y) {
            *o = self.inv_d1(ya - mu);
            sum += *o;
        }
        if !sum.is_finite() || !(sum > 0.0) {
            return Err(Error::MirrorNoConvergence {
                iterations,
                lo,
                hi,
                residual: sum - 1.0,
            });
        }
        out.iter_mut().for_each(|o| *o /= sum);
        Ok((mu, iterations))
    }

    /// `‖Q(y′) − Q(y)‖₂ / ‖y′ − y‖₂`.
    pub fn mirror_is_lipschitz_probe(&self, y: &[f64], y_prime: &[f64]) -> Result<f64> {
        if y.len() != y_prime.len() {
            return Err(invalid("y", "length mismatch"));
        }
        let dy = l2_dist(y, y_prime);
        if dy == 0.0 {
            return Err(invalid("y", "identical inputs give an undefined ratio"));
        }
        Ok(l2_dist(&self.mirror(y)?, &self.mirror(y_prime)?) / dy)
    }

    /// `h(p) = Σ θ(p_a)`.
    pub fn regularizer(&self, p: &[f64]) -> f64 {
        p.iter().map(|&z| self.theta(z)).sum()
    }

    /// Bregman divergence `D(p, x)`. `x` must be interior; a boundary `p`
    /// gives `+∞` for unbounded kernels.
    pub fn bregman(&self, p: &[f64], x: &[f64]) -> Result<f64> {
        if p.len() != x.len() {
            return Err(invalid("p", "length mismatch"));
        }
        if x.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Domain("Bregman base point must be interior".into()));
        }
        Ok(p.iter()
            .zip(x)
            .map(|(&pa, &xa)| self.bregman_term(pa, xa))
            .sum())
    }

    fn bregman_term(&self, p: f64, x: f64) -> f64 {
        match *self {
            Kernel::Entropic => {
                if p == 0.0 {
                    x
                } else {
                    p * (p / x).ln() - p + x
                }
            }
            Kernel::LogBarrier => {
                if p == 0.0 {
                    f64::INFINITY
                } else {
                    let r = p / x;
                    r - 1.0 - r.ln()
                }
            }
            Kernel::Tsallis { .. } => self.theta(p) - self.theta(x) - self.d1(x) * (p - x),
        }
    }

    /// Convex conjugate `h*(y) = ⟨y, Q(y)⟩ − h(Q(y))` restricted to the simplex.
    pub fn conjugate(&self, y: &[f64]) -> Result<f64> {
        check_finite(y)?;
        if let Kernel::Entropic = self {
            return Ok(log_sum_exp(y));
        }
        let x = self.mirror(y)?;
        Ok(dot(y, &x) - self.regularizer(&x))
    }

    /// Fenchel coupling `F(p, y) = h(p) + h*(y) − ⟨y, p⟩`.
    pub fn fenchel(&self, p: &[f64], y: &[f64]) -> Result<f64> {
        if p.len() != y.len() {
            return Err(invalid("p", "length mismatch"));
        }
        Ok(self.regularizer(p) + self.conjugate(y)? - dot(y, p))
    }

    /// `∂Q_a/∂y_b = g_a(δ_ab − g_b/G)` at `x = Q(y)`.
    pub fn jacobian_mirror(&self, y: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self.jacobian_at(&self.mirror(y)?))
    }

    /// Mirror Jacobian evaluated from the strategy `x = Q(y)`.
    pub fn jacobian_at(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let g: Vec<f64> = x.iter().map(|&z| self.inv_d2(z)).collect();
        let total: f64 = g.iter().sum();
        (0..x.len())
            .map(|a| {
                (0..x.len())
                    .map(|b| g[a] * (if a == b { 1.0 } else { 0.0 } - g[b] / total))
                    .collect()
            })
            .collect()
    }

    /// `tr Jac Q(y) = Σ_a g_a(1 − g_a/G)`.
    pub fn trace_jacobian_mirror(&self, y: &[f64]) -> Result<f64> {
        Ok(self.trace_jacobian_at(&self.mirror(y)?))
    }

    /// Mirror Jacobian trace evaluated from the strategy `x = Q(y)`.
    pub fn trace_jacobian_at(&self, x: &[f64]) -> f64 {
        let total: f64 = x.iter().map(|&z| self.inv_d2(z)).sum();
        x.iter()
            .map(|&z| {
                let g = self.inv_d2(z);
                g * (1.0 - g / total)
            })
            .sum()
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Entropic => write!(f, "entropic"),
            Kernel::LogBarrier => write!(f, "log_barrier"),
            Kernel::Tsallis { q } => write!(f, "tsallis:q={q}"),
        }
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "entropic" => Ok(Kernel::Entropic),
            "log_barrier" => Ok(Kernel::LogBarrier),
            "tsallis" => Kernel::tsallis(DEFAULT_TSALLIS_Q),
            other => {
                let q = other
                    .strip_prefix("tsallis:q=")
                    .ok_or_else(|| Error::Config(format!("unknown kernel `{other}`")))?;
                let q: f64 = q
                    .parse()
                    .map_err(|_| Error::Config(format!("bad Tsallis exponent `{q}`")))?;
                Kernel::tsallis(q)
            }
        }
    }
}

impl serde::Serialize for Kernel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Kernel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Output of [`Kernel::mirror_root_finding`].
#[derive(Debug, Clone, PartialEq)]
pub struct MirrorSolution {
    pub x: Vec<f64>,
    pub mu: f64,
    pub iterations: usize,
}

/// One kernel per player.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RegularizerSet(Vec<Kernel>);

impl RegularizerSet {
    pub fn new(kernels: Vec<Kernel>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(invalid("kernels", "need one kernel per player"));
        }
        Ok(Self(kernels))
    }

    pub fn uniform(kernel: Kernel, players: usize) -> Self {
        Self(vec![kernel; players])
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.0
    }

    pub fn kernel(&self, player: usize) -> Kernel {
        self.0[player]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn all_bounded(&self) -> bool {
        self.0.iter().all(Kernel::is_bounded)
    }

    /// Player-wise mirror map.
    pub fn mirror(&self, y: &ScoreProfile) -> Result<MixedProfile> {
        self.check_len(y.len())?;
        Ok(MixedProfile::from_unchecked(
            self.0
                .iter()
                .zip(y.iter())
                .map(|(k, yi)| k.mirror(yi))
                .collect::<Result<_>>()?,
        ))
    }

    /// Scores `y_{ia} = θ_i′(x_{ia})`, the gauge used to initialize dynamics.
    pub fn gradient(&self, x: &MixedProfile) -> Result<ScoreProfile> {
        self.check_len(x.num_players())?;
        if !x.is_interior() {
            return Err(Error::Domain("gradient needs an interior profile".into()));
        }
        ScoreProfile::new(
            self.0
                .iter()
                .zip(x.iter())
                .map(|(k, xi)| xi.iter().map(|&z| k.d1(z)).collect())
                .collect(),
        )
    }

    /// `Φ(z) = max_i (θ_i′)⁻¹(z)`, clamped to `(0, 1]`.
    pub fn rate_function(&self, z: f64) -> f64 {
        self.0
            .iter()
            .map(|k| {
                if z >= k.d1_at_one() {
                    1.0
                } else {
                    k.inv_d1(z).min(1.0)
                }
            })
            .fold(0.0, f64::max)
    }

    fn check_len(&self, players: usize) -> Result<()> {
        if players != self.0.len() {
            return Err(invalid(
                "regularizers",
                format!("{} kernels for {players} players", self.0.len()),
            ));
        }
        Ok(())
    }
}

/// Unconstrained per-player score vectors.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(transparent)]
pub struct ScoreProfile(Vec<Vec<f64>>);

impl ScoreProfile {
    pub fn new(scores: Vec<Vec<f64>>) -> Result<Self> {
        if scores.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("scores", "all entries must be finite"));
        }
        Ok(Self(scores))
    }

    pub(crate) fn from_unchecked(scores: Vec<Vec<f64>>) -> Self {
        Self(scores)
    }

    pub fn into_inner(self) -> Vec<Vec<f64>> {
        self.0
    }
}

impl std::ops::Deref for ScoreProfile {
    type Target = [Vec<f64>];
    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

/// Max-shifted logit map.
pub(crate) fn logit_into(y: &[f64], out: &mut [f64]) {
    let ymax = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &ya) in out.iter_mut().zip(y) {
        *o = (ya - ymax).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
}

pub fn log_sum_exp(y: &[f64]) -> f64 {
    let ymax = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    ymax + y.iter().map(|&v| (v - ymax).exp()).sum::<f64>().ln()
}

fn check_finite(y: &[f64]) -> Result<()> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(invalid("y", "scores must be finite"));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn l2_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).powi(2))
        .sum::<f64>()
        .sqrt()
}
