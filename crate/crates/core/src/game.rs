//! Finite normal-form games and the exact, deterministic analysis performed
//! on them: mixed payoffs, the payoff field, Nash classification, better
//! replies, faces closed under better replies, and harmonic structure.
//!
//! Payoff tensors are stored densely, one flat array per player, indexed by
//! pure profiles in row-major order (the last player's action varies
//! fastest).

use std::fmt;

use crate::error::{invalid, Error, Result};

/// Default comparison tolerance for payoff inequalities.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Mixed strategies must sum to one within this tolerance.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Default cap on the number of candidate faces `enumerate_club_faces` may visit.
pub const DEFAULT_FACE_CAP: u128 = 1_000_000;

/// A pure action profile, one action index per player.
pub type PureProfile = Vec<usize>;

/// A finite game in normal form.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    action_counts: Vec<usize>,
    strides: Vec<usize>,
    payoffs: Vec<Vec<f64>>,
}

impl Game {
    /// Builds a game from per-player flat payoff arrays in row-major profile
    /// order.
    pub fn new(action_counts: Vec<usize>, payoffs: Vec<Vec<f64>>) -> Result<Self> {
        if action_counts.len() < 2 {
            return Err(Error::InvalidGame(format!(
                "need at least two players, got {}",
                action_counts.len()
            )));
        }
        if let Some(i) = action_counts.iter().position(|&a| a < 2) {
            return Err(Error::InvalidGame(format!(
                "player {i} has {} actions; every player needs at least two",
                action_counts[i]
            )));
        }
        if payoffs.len() != action_counts.len() {
            return Err(Error::InvalidGame(format!(
                "{} payoff arrays for {} players",
                payoffs.len(),
                action_counts.len()
            )));
        }
        let num_profiles = action_counts
            .iter()
            .try_fold(1usize, |acc, &a| acc.checked_mul(a))
            .ok_or_else(|| Error::InvalidGame("profile count overflows".into()))?;
        for (i, u) in payoffs.iter().enumerate() {
            if u.len() != num_profiles {
                return Err(Error::InvalidGame(format!(
                    "player {i} payoff array has {} entries, expected {num_profiles}",
                    u.len()
                )));
            }
            if let Some(k) = u.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidGame(format!(
                    "player {i} payoff at profile {k} is not finite"
                )));
            }
        }
        let mut strides = vec![1; action_counts.len()];
        for i in (0..action_counts.len() - 1).rev() {
            strides[i] = strides[i + 1] * action_counts[i + 1];
        }
        Ok(Self {
            action_counts,
            strides,
            payoffs,
        })
    }

    /// Builds a game by evaluating `f(player, profile)` on every pure profile.
    pub fn from_fn(
        action_counts: Vec<usize>,
        mut f: impl FnMut(usize, &[usize]) -> f64,
    ) -> Result<Self> {
        let n: usize = action_counts.iter().product();
        let players = action_counts.len();
        let mut payoffs = vec![Vec::with_capacity(n); players];
        let mut profile = vec![0; players];
        for _ in 0..n {
            for (i, u) in payoffs.iter_mut().enumerate() {
                u.push(f(i, &profile));
            }
            advance(&mut profile, &action_counts);
        }
        Self::new(action_counts, payoffs)
    }

    /// Two-player game from row-player and column-player payoff matrices.
    pub fn bimatrix(row: &[Vec<f64>], col: &[Vec<f64>]) -> Result<Self> {
        let rows = row.len();
        let cols = row.first().map_or(0, Vec::len);
        if col.len() != rows || row.iter().chain(col).any(|r| r.len() != cols) {
            return Err(Error::InvalidGame(
                "ragged or mismatched payoff matrices".into(),
            ));
        }
        Self::from_fn(vec![rows, cols], |i, a| {
            if i == 0 {
                row[a[0]][a[1]]
            } else {
                col[a[0]][a[1]]
            }
        })
    }

    pub fn num_players(&self) -> usize {
        self.action_counts.len()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn num_profiles(&self) -> usize {
        self.payoffs[0].len()
    }

    /// Total number of action coordinates, `Σ_i A_i`.
    pub fn total_actions(&self) -> usize {
        self.action_counts.iter().sum()
    }

    /// Flat payoff array of `player`.
    pub fn payoffs(&self, player: usize) -> &[f64] {
        &self.payoffs[player]
    }

    pub fn index_of(&self, profile: &[usize]) -> usize {
        profile.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    pub fn profile_at(&self, mut index: usize) -> PureProfile {
        self.strides
            .iter()
            .map(|s| {
                let a = index / s;
                index %= s;
                a
            })
            .collect()
    }

    /// Iterates all pure profiles in storage order.
    pub fn profiles(&self) -> impl Iterator<Item = PureProfile> + '_ {
        (0..self.num_profiles()).map(|k| self.profile_at(k))
    }

    pub fn payoff(&self, player: usize, profile: &[usize]) -> f64 {
        self.payoffs[player][self.index_of(profile)]
    }

    /// Payoff of `player` after unilaterally switching to `action` at `profile`.
    pub fn deviation_payoff(&self, player: usize, action: usize, profile: &[usize]) -> f64 {
        let base = self.index_of(profile);
        let idx = base - profile[player] * self.strides[player] + action * self.strides[player];
        self.payoffs[player][idx]
    }

    /// Payoff difference `u_i(a) − u_i(b_i; a_{−i})` for the unique player
    /// deviating between `a` and `b`; `None` unless `a` and `b` differ in
    /// exactly one coordinate.
    pub fn paydev(&self, a: &[usize], b: &[usize]) -> Option<f64> {
        let player = deviating_player(a, b)?;
        Some(self.payoff(player, a) - self.payoff(player, b))
    }

    fn check_player(&self, player: usize) -> Result<()> {
        if player >= self.num_players() {
            return Err(Error::PlayerOutOfRange {
                player,
                players: self.num_players(),
            });
        }
        Ok(())
    }

    fn check_profile(&self, x: &MixedProfile) -> Result<()> {
        if x.num_players() != self.num_players()
            || x.iter()
                .zip(&self.action_counts)
                .any(|(xi, &a)| xi.len() != a)
        {
            return Err(Error::InvalidProfile(
                "profile shape does not match the game".into(),
            ));
        }
        Ok(())
    }

    fn check_pure(&self, a: &[usize]) -> Result<()> {
        if a.len() != self.num_players()
            || a.iter().zip(&self.action_counts).any(|(&ai, &n)| ai >= n)
        {
            return Err(Error::InvalidProfile(format!(
                "pure profile {a:?} out of range"
            )));
        }
        Ok(())
    }

    /// Expected payoff of `player` under the mixed profile `x`.
    pub fn mixed_payoff(&self, player: usize, x: &MixedProfile) -> Result<f64> {
        self.check_player(player)?;
        self.check_profile(x)?;
        let u = &self.payoffs[player];
        let mut profile = vec![0; self.num_players()];
        let mut total = 0.0;
        for &value in u {
            let p: f64 = profile.iter().enumerate().map(|(j, &a)| x[j][a]).product();
            total += value * p;
            advance(&mut profile, &self.action_counts);
        }
        Ok(total)
    }

    /// The payoff field `v_{i a_i}(x) = u_i(a_i; x_{−i})`.
    pub fn payoff_field(&self, x: &MixedProfile) -> Result<Vec<Vec<f64>>> {
        self.check_profile(x)?;
        let mut out: Vec<Vec<f64>> = self.action_counts.iter().map(|&a| vec![0.0; a]).collect();
        self.payoff_field_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked payoff field evaluation into a preallocated buffer; used in
    /// integrator inner loops.
    pub fn payoff_field_into(&self, x: &[Vec<f64>], out: &mut [Vec<f64>]) {
        let n = self.num_players();
        for v in out.iter_mut() {
            v.iter_mut().for_each(|e| *e = 0.0);
        }
        let mut profile = [0usize; 16];
        let mut heap;
        let profile: &mut [usize] = if n <= 16 {
            &mut profile[..n]
        } else {
            heap = vec![0; n];
            &mut heap
        };
        let mut prefix = [1.0f64; 17];
        let mut heap_prefix;
        let prefix: &mut [f64] = if n <= 16 {
            &mut prefix[..=n]
        } else {
            heap_prefix = vec![1.0; n + 1];
            &mut heap_prefix
        };
        for k in 0..self.num_profiles() {
            for j in 0..n {
                prefix[j + 1] = prefix[j] * x[j][profile[j]];
            }
            let mut suffix = 1.0;
            for i in (0..n).rev() {
                let w = prefix[i] * suffix;
                out[i][profile[i]] += self.payoffs[i][k] * w;
                suffix *= x[i][profile[i]];
            }
            advance(profile, &self.action_counts);
        }
    }

    /// Classifies `x` in the Nash taxonomy.
    ///
    /// An action is in the support when its probability exceeds `tol`. `x` is
    /// Nash when every supported action earns at least the best payoff minus
    /// `tol`; a pure Nash profile is strict when every deviation loses more
    /// than `tol`.
    pub fn classify_profile(&self, x: &MixedProfile, tol: f64) -> Result<NashClass> {
        if !(tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        let v = self.payoff_field(x)?;
        let mut pure = true;
        for (xi, vi) in x.iter().zip(&v) {
            let best = vi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut support = 0;
            for (p, val) in xi.iter().zip(vi) {
                if *p > tol {
                    support += 1;
                    if *val < best - tol {
                        return Ok(NashClass::NotNash);
                    }
                }
            }
            pure &= support == 1;
        }
        if !pure {
            return Ok(NashClass::NashMixed);
        }
        let strict = x.iter().zip(&v).all(|(xi, vi)| {
            let a = argmax(xi);
            vi.iter()
                .enumerate()
                .all(|(b, val)| b == a || vi[a] - val > tol)
        });
        Ok(if strict {
            NashClass::NashStrict
        } else {
            NashClass::NashPure
        })
    }

    /// Pure better replies `∏_i {b_i : u_i(b_i; a_{−i}) ≥ u_i(a) − tol}`.
    pub fn better_replies(&self, a: &[usize], tol: f64) -> Result<Vec<PureProfile>> {
        self.check_pure(a)?;
        let per_player: Vec<Vec<usize>> = (0..self.num_players())
            .map(|i| {
                let base = self.payoff(i, a);
                (0..self.action_counts[i])
                    .filter(|&b| self.deviation_payoff(i, b, a) >= base - tol)
                    .collect()
            })
            .collect();
        Ok(cartesian(&per_player))
    }

    /// Whether the span of `face` is closed under better replies: every
    /// unilateral deviation leaving the face must lose more than `tol`.
    pub fn is_club_face(&self, face: &Face, tol: f64) -> Result<bool> {
        face.check(self)?;
        for a in cartesian(face.supports()) {
            for i in 0..self.num_players() {
                let base = self.payoff(i, &a);
                for b in face.out_actions(self, i) {
                    if base - self.deviation_payoff(i, b, &a) <= tol {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// All product faces closed under better replies, sorted by total support
    /// size. The full face is always included.
    pub fn enumerate_club_faces(&self, cap: u128, tol: f64) -> Result<Vec<Face>> {
        let mut required: u128 = 1;
        for &a in &self.action_counts {
            let subsets = if a >= 127 {
                u128::MAX
            } else {
                (1u128 << a) - 1
            };
            required = required.saturating_mul(subsets);
        }
        if required > cap {
            return Err(Error::EnumerationCap { required, cap });
        }
        let n = self.num_players();
        let limits: Vec<u64> = self
            .action_counts
            .iter()
            .map(|&a| (1u64 << a) - 1)
            .collect();
        let mut masks = vec![1u64; n];
        let mut found = Vec::new();
        'outer: loop {
            let supports: Vec<Vec<usize>> = masks
                .iter()
                .zip(&self.action_counts)
                .map(|(&m, &a)| (0..a).filter(|b| m >> b & 1 == 1).collect())
                .collect();
            let face = Face::new(supports)?;
            if self.is_club_face(&face, tol)? {
                found.push(face);
            }
            for i in (0..n).rev() {
                if masks[i] < limits[i] {
                    masks[i] += 1;
                    continue 'outer;
                }
                masks[i] = 1;
            }
            break;
        }
        found.sort_by_key(Face::total_support);
        Ok(found)
    }

    /// Weighted sums of unilateral deviations toward each profile,
    /// `Σ_i Σ_{b_i} m_{i b_i} [u_i(a) − u_i(b_i; a_{−i})]`. The game is
    /// harmonic for `weights` iff all residuals vanish.
    pub fn harmonic_residuals(&self, weights: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_weights(self, weights)?;
        Ok(self
            .profiles()
            .map(|a| {
                (0..self.num_players())
                    .map(|i| {
                        let base = self.payoff(i, &a);
                        weights[i]
                            .iter()
                            .enumerate()
                            .map(|(b, m)| m * (base - self.deviation_payoff(i, b, &a)))
                            .sum::<f64>()
                    })
                    .sum()
            })
            .collect())
    }

    /// Largest absolute harmonic residual.
    pub fn max_harmonic_residual(&self, weights: &[Vec<f64>]) -> Result<f64> {
        Ok(self
            .harmonic_residuals(weights)?
            .into_iter()
            .fold(0.0, |m, r| m.max(r.abs())))
    }

    /// `Σ_{a∈S} [∏_j m_{j a_j}] Σ_{b∈S, b↔a} m_{i b_i} paydev(a, b)` for a set
    /// `S` of profile indices. Vanishes for every game and every `S`.
    pub fn weighted_contraction(&self, weights: &[Vec<f64>], subset: &[usize]) -> Result<f64> {
        check_weights(self, weights)?;
        let members: std::collections::HashSet<usize> = subset.iter().copied().collect();
        let mut total = 0.0;
        for &k in subset {
            let a = self.profile_at(k);
            let prod: f64 = a
                .iter()
                .enumerate()
                .map(|(j, &aj)| weights[j][aj])
                .product();
            let mut inner = 0.0;
            for i in 0..self.num_players() {
                for (b, w) in weights[i].iter().enumerate() {
                    if b == a[i] {
                        continue;
                    }
                    let mut dev = a.clone();
                    dev[i] = b;
                    if members.contains(&self.index_of(&dev)) {
                        inner += w * (self.payoff(i, &a) - self.payoff(i, &dev));
                    }
                }
            }
            total += prod * inner;
        }
        Ok(total)
    }

    /// Every payoff multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            action_counts: self.action_counts.clone(),
            strides: self.strides.clone(),
            payoffs: self
                .payoffs
                .iter()
                .map(|u| u.iter().map(|v| v * factor).collect())
                .collect(),
        }
    }

    /// Payoff-wise sum of two games with the same shape.
    pub fn add(&self, other: &Game) -> Result<Game> {
        if self.action_counts != other.action_counts {
            return Err(Error::InvalidGame("shape mismatch".into()));
        }
        Game::new(
            self.action_counts.clone(),
            self.payoffs
                .iter()
                .zip(&other.payoffs)
                .map(|(u, w)| u.iter().zip(w).map(|(p, q)| p + q).collect())
                .collect(),
        )
    }
}

fn check_weights(game: &Game, weights: &[Vec<f64>]) -> Result<()> {
    if weights.len() != game.num_players()
        || weights
            .iter()
            .zip(game.action_counts())
            .any(|(w, &a)| w.len() != a)
    {
        return Err(invalid("weights", "shape does not match the game"));
    }
    if weights
        .iter()
        .flatten()
        .any(|w| !(*w > 0.0) || !w.is_finite())
    {
        return Err(invalid(
            "weights",
            "all weights must be positive and finite",
        ));
    }
    Ok(())
}

fn deviating_player(a: &[usize], b: &[usize]) -> Option<usize> {
    let mut diff = a.iter().zip(b).enumerate().filter(|(_, (x, y))| x != y);
    let (i, _) = diff.next()?;
    diff.next().is_none().then_some(i)
}

/// Odometer increment with the last coordinate fastest.
pub(crate) fn advance(profile: &mut [usize], counts: &[usize]) {
    for i in (0..profile.len()).rev() {
        profile[i] += 1;
        if profile[i] < counts[i] {
            return;
        }
        profile[i] = 0;
    }
}

fn cartesian(sets: &[Vec<usize>]) -> Vec<PureProfile> {
    let mut out = vec![Vec::with_capacity(sets.len())];
    for set in sets {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                set.iter().map(move |&s| {
                    let mut p = prefix.clone();
                    p.push(s);
                    p
                })
            })
            .collect();
    }
    out
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| {
            if x > bv {
                (i, x)
            } else {
                (bi, bv)
            }
        })
        .0
}

/// Nash taxonomy of a mixed profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NashClass {
    NotNash,
    NashMixed,
    NashPure,
    NashStrict,
}

/// One probability vector per player.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct MixedProfile(Vec<Vec<f64>>);

impl MixedProfile {
    /// Validates nonnegativity and unit sums (within [`SIMPLEX_TOL`]).
    pub fn new(strategies: Vec<Vec<f64>>) -> Result<Self> {
        for (i, xi) in strategies.iter().enumerate() {
            if xi.is_empty() {
                return Err(Error::InvalidProfile(format!("player {i} has no actions")));
            }
            if xi.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return Err(Error::InvalidProfile(format!(
                    "player {i} has a negative or non-finite probability"
                )));
            }
            let s: f64 = xi.iter().sum();
            if (s - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidProfile(format!(
                    "player {i} probabilities sum to {s}"
                )));
            }
        }
        Ok(Self(strategies))
    }

    /// Wraps without validation; used where the simplex constraint holds by
    /// construction.
    pub fn from_unchecked(strategies: Vec<Vec<f64>>) -> Self {
        Self(strategies)
    }

    /// Uniform play for every player.
    pub fn uniform(action_counts: &[usize]) -> Self {
        Self(
            action_counts
                .iter()
                .map(|&a| vec![1.0 / a as f64; a])
                .collect(),
        )
    }

    /// The vertex of the strategy space corresponding to a pure profile.
    pub fn vertex(action_counts: &[usize], profile: &[usize]) -> Self {
        Self(
            action_counts
                .iter()
                .zip(profile)
                .map(|(&n, &a)| (0..n).map(|b| if b == a { 1.0 } else { 0.0 }).collect())
                .collect(),
        )
    }

    pub fn num_players(&self) -> usize {
        self.0.len()
    }

    /// Whether every coordinate is strictly positive.
    pub fn is_interior(&self) -> bool {
        self.0.iter().flatten().all(|&p| p > 0.0)
    }

    /// The pure profile of per-player most likely actions.
    pub fn argmax_profile(&self) -> PureProfile {
        self.0.iter().map(|xi| argmax(xi)).collect()
    }

    pub fn into_inner(self) -> Vec<Vec<f64>> {
        self.0
    }
}

impl std::ops::Deref for MixedProfile {
    type Target = [Vec<f64>];
    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

/// A product face `∏_i Δ(S_i)` given by nonempty per-player supports.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Face(Vec<Vec<usize>>);

impl Face {
    /// Sorts and deduplicates the supports; rejects empty ones.
    pub fn new(mut supports: Vec<Vec<usize>>) -> Result<Self> {
        for (i, s) in supports.iter_mut().enumerate() {
            s.sort_unstable();
            s.dedup();
            if s.is_empty() {
                return Err(invalid("face", format!("player {i} has an empty support")));
            }
        }
        Ok(Self(supports))
    }

    pub fn full(game: &Game) -> Self {
        Self(
            game.action_counts()
                .iter()
                .map(|&a| (0..a).collect())
                .collect(),
        )
    }

    /// The face spanned by a single pure profile.
    pub fn vertex(profile: &[usize]) -> Self {
        Self(profile.iter().map(|&a| vec![a]).collect())
    }

    pub fn supports(&self) -> &[Vec<usize>] {
        &self.0
    }

    pub fn total_support(&self) -> usize {
        self.0.iter().map(Vec::len).sum()
    }

    pub fn is_proper(&self, game: &Game) -> bool {
        self.0
            .iter()
            .zip(game.action_counts())
            .any(|(s, &a)| s.len() < a)
    }

    pub fn contains(&self, profile: &[usize]) -> bool {
        self.0
            .iter()
            .zip(profile)
            .all(|(s, a)| s.binary_search(a).is_ok())
    }

    /// Actions of `player` outside the face.
    pub fn out_actions(&self, game: &Game, player: usize) -> Vec<usize> {
        (0..game.action_counts()[player])
            .filter(|b| self.0[player].binary_search(b).is_err())
            .collect()
    }

    pub(crate) fn check(&self, game: &Game) -> Result<()> {
        if self.0.len() != game.num_players()
            || self
                .0
                .iter()
                .zip(game.action_counts())
                .any(|(s, &a)| s.iter().any(|&b| b >= a))
        {
            return Err(invalid("face", "support indices do not match the game"));
        }
        Ok(())
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|s| {
                let items: Vec<String> = s.iter().map(ToString::to_string).collect();
                format!("{{{}}}", items.join(","))
            })
            .collect();
        write!(f, "{}", parts.join("×"))
    }
}

/// Harmonic weights together with the induced masses and strategic center.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct HarmonicStructure {
    pub weights: Vec<Vec<f64>>,
    pub mass: Vec<f64>,
    pub center: MixedProfile,
}

impl HarmonicStructure {
    /// `m_i = Σ_a m_{ia}` and `p̂_{ia} = m_{ia} / m_i`.
    pub fn from_weights(weights: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(Vec::is_empty) {
            return Err(invalid("weights", "need at least one action per player"));
        }
        if weights
            .iter()
            .flatten()
            .any(|w| !(*w > 0.0) || !w.is_finite())
        {
            return Err(invalid(
                "weights",
                "all weights must be positive and finite",
            ));
        }
        let mass: Vec<f64> = weights.iter().map(|w| w.iter().sum()).collect();
        let center = MixedProfile(
            weights
                .iter()
                .zip(&mass)
                .map(|(w, m)| w.iter().map(|v| v / m).collect())
                .collect(),
        );
        Ok(Self {
            weights,
            mass,
            center,
        })
    }

    /// Unit weights for every action.
    pub fn uniform(action_counts: &[usize]) -> Self {
        Self::from_weights(action_counts.iter().map(|&a| vec![1.0; a]).collect())
            .expect("unit weights are positive")
    }
}

/// A `2×2×2` uniform harmonic game with free deviations `a, b, c, d, δ`.
///
/// Player actions: player 0 chooses top (0) or bottom (1), player 1 left (0)
/// or right (1), player 2 anterior (0) or posterior (1). The free parameters
/// label the deviations
///
/// ```text
/// (1,0,0)→(1,1,0): d   (1,1,0)→(1,1,1): a   (1,1,1)→(1,0,1): b   (1,0,1)→(1,0,0): c
/// (0,0,0)→(0,1,0): δ
/// ```
///
/// and the remaining seven deviations are fixed by the unit-weight harmonic
/// condition. A label `L` on `p → q` means the deviating player gains
/// `u(q) − u(p) = L`. Only differences are determined; each player's payoff
/// is anchored at zero wherever that player plays action 0 (in particular at
/// the all-first-action profile).
pub fn make_harmonic_2x2x2(a: f64, b: f64, c: f64, d: f64, delta: f64) -> Game {
    // Payoff of the deviating player at the action-1 endpoint of each edge,
    // indexed by the other two players' actions.
    let p0 = |j: usize, k: usize| match (j, k) {
        (0, 0) => d - c,
        (1, 0) => a - d,
        (1, 1) => b - a,
        _ => c - b,
    };
    let p1 = |i: usize, k: usize| match (i, k) {
        (0, 0) => delta,
        (1, 0) => d,
        (0, 1) => b - d - delta,
        _ => -b,
    };
    let p2 = |i: usize, j: usize| match (i, j) {
        (1, 1) => a,
        (1, 0) => -c,
        (0, 1) => -a + d + delta,
        _ => c - d - delta,
    };
    Game::from_fn(vec![2, 2, 2], |player, s| match player {
        0 if s[0] == 1 => p0(s[1], s[2]),
        1 if s[1] == 1 => p1(s[0], s[2]),
        2 if s[2] == 1 => p2(s[0], s[1]),
        _ => 0.0,
    })
    .expect("2x2x2 construction is well formed")
}

/// A two-player zero-sum game `(M, −M)` and, when it has a fully mixed
/// equilibrium, the harmonic structure with weights equal to that equilibrium.
#[derive(Debug, Clone)]
pub struct ZeroSum {
    pub game: Game,
    pub equilibrium: Option<MixedProfile>,
    pub structure: Option<HarmonicStructure>,
}

/// Builds `(M, −M)` and searches for a fully mixed equilibrium: closed form
/// for `2×2`, full-support indifference solve for square matrices, none for
/// non-square matrices.
pub fn make_zero_sum(matrix: &[Vec<f64>]) -> Result<ZeroSum> {
    let neg: Vec<Vec<f64>> = matrix
        .iter()
        .map(|r| r.iter().map(|v| -v).collect())
        .collect();
    let game = Game::bimatrix(matrix, &neg)?;
    let equilibrium = interior_equilibrium(matrix);
    let structure = equilibrium
        .as_ref()
        .map(|eq| HarmonicStructure::from_weights(eq.to_vec()))
        .transpose()?;
    Ok(ZeroSum {
        game,
        equilibrium,
        structure,
    })
}

fn interior_equilibrium(m: &[Vec<f64>]) -> Option<MixedProfile> {
    let rows = m.len();
    let cols = m[0].len();
    if rows != cols {
        return None;
    }
    let (row, col) = if rows == 2 {
        let den = m[0][0] - m[0][1] - m[1][0] + m[1][1];
        if den.abs() < 1e-14 {
            return None;
        }
        let p = (m[1][1] - m[1][0]) / den;
        let q = (m[1][1] - m[0][1]) / den;
        (vec![p, 1.0 - p], vec![q, 1.0 - q])
    } else {
        let mt: Vec<Vec<f64>> = (0..cols)
            .map(|j| (0..rows).map(|i| m[i][j]).collect())
            .collect();
        (indifference_solve(&mt)?, indifference_solve(m)?)
    };
    if row.iter().chain(&col).all(|&p| p > 0.0) {
        Some(MixedProfile(vec![row, col]))
    } else {
        None
    }
}

/// Solves `A z = v·1`, `Σ z = 1` for a square `A`.
fn indifference_solve(a: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = a.len();
    let sys = nalgebra::DMatrix::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
        (true, true) => a[i][j],
        (true, false) => -1.0,
        (false, true) => 1.0,
        (false, false) => 0.0,
    });
    let mut rhs = nalgebra::DVector::zeros(n + 1);
    rhs[n] = 1.0;
    let sol = sys.lu().solve(&rhs)?;
    Some(sol.iter().take(n).copied().collect())
}
