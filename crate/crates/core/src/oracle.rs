//! Brute-force checks of the closed forms.
//!
//! Nothing here calls [`crate::balance::f_involution`]: the minimax value is
//! recomputed by backward induction over an odds grid, the `T = 2` strategy by
//! solving the equalisation system, and the optimal strategy's losses by
//! enumerating every decisive sequence against it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::adversaries::SequenceGambler;
use crate::blackwell::{project_to_s, region_memberships, AvgLoss, DeltaParam};
use crate::error::{domain, Error, Result};
use crate::game::{game_loss, play_game, round_loss, BetPoint, GameConfig, LossVector, Outcome};
use crate::strategies::{DecisiveState, ExpectedSkeleton};

/// Outcome of one oracle check, as emitted by `bibalance verify`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub check: String,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub max_abs_err: f64,
    pub pass: bool,
    /// Headline quantity of the check (grid value, worst loss, …).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl VerificationReport {
    fn new(check: &str, horizon: usize, max_abs_err: f64, pass: bool) -> Self {
        Self {
            check: check.to_string(),
            horizon,
            max_abs_err,
            pass,
            value: None,
            detail: None,
        }
    }

    fn with_value(mut self, v: f64) -> Self {
        self.value = Some(v);
        self
    }

    fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn optimum(horizon: usize) -> f64 {
    let t = horizon as f64;
    t + t.sqrt()
}

/// Odds grid `{k·resolution} ∩ (0, 1)` for horizons up to 3.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    resolution: f64,
    horizon: usize,
}

impl GridSpec {
    pub fn new(horizon: usize, resolution: f64) -> Result<Self> {
        if !(1..=3).contains(&horizon) {
            return Err(domain(format!("grid minimax supports 1 <= T <= 3, got {horizon}")));
        }
        if !(resolution > 0.0 && resolution <= 0.01) {
            return Err(domain(format!(
                "grid resolution must lie in (0, 0.01], got {resolution}"
            )));
        }
        Ok(Self { resolution, horizon })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn points(&self) -> Vec<f64> {
        (1..)
            .map(|k| k as f64 * self.resolution)
            .take_while(|&r| r < 1.0 - 1e-12)
            .collect()
    }
}

// The value from accumulated loss (L0, L1) with `rounds` to go is
// L1 + g(L0 - L1), since adding c to both coordinates adds c to the max.
// g_0(u) = max(u, 0) and g(u) = min_r max(g'(u + 1/(1-r)), 1/r + g'(u - 1/r)).
fn g_decisive(grid: &[f64], rounds: usize, u: f64) -> f64 {
    if rounds == 0 {
        return u.max(0.0);
    }
    let mut best = f64::INFINITY;
    for &r in grid {
        let zero = g_decisive(grid, rounds - 1, u + 1.0 / (1.0 - r));
        if zero >= best {
            continue;
        }
        let one = 1.0 / r + g_decisive(grid, rounds - 1, u - 1.0 / r);
        best = best.min(zero.max(one));
    }
    best
}

// Same with the gambler maximising over a grid of bets q in [0, 1].
fn g_continuous(grid: &[f64], qs: &[f64], rounds: usize, u: f64) -> f64 {
    if rounds == 0 {
        return u.max(0.0);
    }
    let mut best = f64::INFINITY;
    for &r in grid {
        let mut worst = f64::NEG_INFINITY;
        for &q in qs {
            let l1 = q / r;
            let l0 = (1.0 - q) / (1.0 - r);
            worst = worst.max(l1 + g_continuous(grid, qs, rounds - 1, u + l0 - l1));
            if worst >= best {
                break;
            }
        }
        best = best.min(worst);
    }
    best
}

/// Minimax loss over grid odds against decisive gamblers, by backward
/// induction. Each grid halving can only lower the value.
pub fn grid_minimax(spec: &GridSpec) -> f64 {
    let grid = spec.points();
    let rounds = spec.horizon - 1;
    grid.par_iter()
        .map(|&r| {
            let zero = g_decisive(&grid, rounds, 1.0 / (1.0 - r));
            let one = 1.0 / r + g_decisive(&grid, rounds, -1.0 / r);
            zero.max(one)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// As [`grid_minimax`], but the gambler picks any `q` on a grid of step
/// `q_step` in `[0, 1]`. Only for `T <= 2`; confirms that decisive bets are
/// the gambler's best responses.
pub fn grid_minimax_continuous(spec: &GridSpec, q_step: f64) -> Result<f64> {
    if spec.horizon > 2 {
        return Err(domain("the continuous-bet grid is limited to T <= 2"));
    }
    if !(q_step > 0.0 && q_step <= 0.5) {
        return Err(domain(format!("bet grid step must lie in (0, 0.5], got {q_step}")));
    }
    let n = (1.0 / q_step).round() as usize;
    let qs: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
    let grid = spec.points();
    Ok(g_continuous(&grid, &qs, spec.horizon, 0.0))
}

/// Runs [`grid_minimax`] and compares with `T + √T`, allowing `5·res` at
/// `T = 1` and `10·res` beyond.
pub fn verify_grid_minimax(spec: &GridSpec) -> VerificationReport {
    let v = grid_minimax(spec);
    let target = optimum(spec.horizon);
    let tol = spec.resolution * if spec.horizon == 1 { 5.0 } else { 10.0 };
    let err = (v - target).abs();
    VerificationReport::new("grid-minimax", spec.horizon, err, err <= tol)
        .with_value(v)
        .with_detail(format!("resolution {}, tolerance {tol:.1e}", spec.resolution))
}

/// Interior solution of the `T = 2` equalisation system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EqualizerSolution {
    pub r1: f64,
    pub r2_after_0: f64,
    pub r2_after_1: f64,
    pub loss: f64,
    /// Largest deviation of the four sequence losses from `loss`.
    pub residual: f64,
}

// Chain substitution for a common loss γ: 01 gives r2(0) = 1/γ, 10 gives
// r2(1) = 1 - 1/γ, then 00 fixes 1/(1-r1) and 11 fixes 1/r1, both to
// γ - γ/(γ-1).
fn chain(gamma: f64) -> (f64, f64, f64) {
    let r20 = 1.0 / gamma;
    let r21 = 1.0 - 1.0 / gamma;
    let rest = gamma - gamma / (gamma - 1.0);
    (rest, r20, r21)
}

fn sequence_losses(r1: f64, r20: f64, r21: f64) -> [f64; 4] {
    [
        1.0 / (1.0 - r1) + 1.0 / (1.0 - r20),
        1.0 / r20,
        1.0 / (1.0 - r21),
        1.0 / r1 + 1.0 / r21,
    ]
}

/// Solves for odds `(r1, r2(0), r2(1))` giving all four `T = 2` sequences
/// the same loss, by bisection on the common loss over `(2, 6)`.
pub fn equalizer_solve_t2() -> EqualizerSolution {
    // r1 + (1 - r1) = 1 with both taken from the chain
    let phi = |g: f64| {
        let (rest, _, _) = chain(g);
        2.0 / rest - 1.0
    };
    let (mut lo, mut hi) = (2.0 + 1e-9, 6.0);
    debug_assert!(phi(lo) > 0.0 && phi(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let gamma = 0.5 * (lo + hi);
    let (rest, r20, r21) = chain(gamma);
    let r1 = 1.0 - 1.0 / rest;
    let residual = sequence_losses(r1, r20, r21)
        .iter()
        .map(|l| (l - gamma).abs())
        .fold(0.0, f64::max);
    EqualizerSolution {
        r1,
        r2_after_0: r20,
        r2_after_1: r21,
        loss: gamma,
        residual,
    }
}

/// Residual of the system when the common loss is forced to `gamma`: three
/// equations pin the odds, and the return value is how far the fourth
/// sequence's loss misses `gamma` (infinite if no interior odds exist).
pub fn equalizer_residual_t2(gamma: f64) -> f64 {
    if !(gamma > 2.0) {
        return f64::INFINITY;
    }
    let (rest, r20, r21) = chain(gamma);
    if !(rest > 1.0) {
        return f64::INFINITY;
    }
    let r1 = 1.0 - 1.0 / rest;
    (sequence_losses(r1, r20, r21)[3] - gamma).abs()
}

/// Solves the `T = 2` system and compares with
/// `(1/2, 1 - 1/√2, 1/√2, 2 + √2)` within `1e-10`.
pub fn verify_equalizer_t2() -> VerificationReport {
    let s = equalizer_solve_t2();
    let r2 = 2f64.sqrt();
    let err = [
        s.r1 - 0.5,
        s.r2_after_0 - (1.0 - 1.0 / r2),
        s.r2_after_1 - 1.0 / r2,
        s.loss - (2.0 + r2),
        s.residual,
    ]
    .iter()
    .fold(0.0f64, |m, e| m.max(e.abs()));
    VerificationReport::new("equalizer", 2, err, err <= 1e-10)
        .with_value(s.loss)
        .with_detail(format!(
            "r1 = {}, r2(0) = {}, r2(1) = {}, residual {:.1e}",
            s.r1, s.r2_after_0, s.r2_after_1, s.residual
        ))
}

pub const MAX_ENUMERATION_HORIZON: usize = 22;

struct LeafStats {
    max_rel_err: f64,
    max_abs_err: f64,
    claim1_failures: u64,
    leaves: u64,
}

impl LeafStats {
    fn empty() -> Self {
        Self {
            max_rel_err: 0.0,
            max_abs_err: 0.0,
            claim1_failures: 0,
            leaves: 0,
        }
    }

    fn merge(self, o: Self) -> Self {
        Self {
            max_rel_err: self.max_rel_err.max(o.max_rel_err),
            max_abs_err: self.max_abs_err.max(o.max_abs_err),
            claim1_failures: self.claim1_failures + o.claim1_failures,
            leaves: self.leaves + o.leaves,
        }
    }
}

fn enumerate_optimal(
    state: DecisiveState,
    odds: crate::game::OddsPoint,
    acc: LossVector,
    target: f64,
) -> Result<LeafStats> {
    let mut stats = LeafStats::empty();
    for bet in [Outcome::Zero, Outcome::One] {
        let acc = acc.add(&round_loss(odds, bet.as_bet()));
        if state.t == state.horizon {
            let loss = acc.max();
            let err = (loss - target).abs();
            stats.max_abs_err = stats.max_abs_err.max(err);
            stats.max_rel_err = stats.max_rel_err.max(err / target);
            // the max sits on the last bet's coordinate and the other is below it
            let own = acc.get(bet);
            let other = acc.get(bet.flip());
            if own != loss || !(other < own) {
                stats.claim1_failures += 1;
            }
            stats.leaves += 1;
        } else {
            let (next, next_odds) = state.step(bet)?;
            stats = stats.merge(enumerate_optimal(next, next_odds, acc, target)?);
        }
    }
    Ok(stats)
}

/// Plays the optimal decisive strategy against all `2^T` decisive sequences
/// and checks every loss equals `T + √T` within `1e-9` relative, with the
/// maximum on the coordinate of the final bet and the other strictly smaller.
pub fn verify_optimal_loss(horizon: usize) -> Result<VerificationReport> {
    if horizon == 0 || horizon > MAX_ENUMERATION_HORIZON {
        return Err(Error::Capacity(format!(
            "enumeration is limited to 1 <= T <= {MAX_ENUMERATION_HORIZON}, got {horizon}"
        )));
    }
    let target = optimum(horizon);
    let root = DecisiveState::init(horizon)?;
    // fan out over the first few bets
    let split = (horizon - 1).min(4);
    let prefixes: Vec<u32> = (0..1u32 << split).collect();
    let stats = prefixes
        .par_iter()
        .map(|&code| -> Result<LeafStats> {
            let (mut state, mut odds) = (root, root.first_odds());
            let mut acc = LossVector::ZERO;
            for i in (0..split).rev() {
                let bet = Outcome::from_bit(code >> i & 1 == 1);
                acc = acc.add(&round_loss(odds, bet.as_bet()));
                (state, odds) = state.step(bet)?;
            }
            enumerate_optimal(state, odds, acc, target)
        })
        .try_reduce(LeafStats::empty, |a, b| Ok(a.merge(b)))?;
    let pass = stats.max_rel_err <= 1e-9 && stats.claim1_failures == 0;
    Ok(
        VerificationReport::new("optimal-loss", horizon, stats.max_abs_err, pass)
            .with_value(target)
            .with_detail(format!(
                "{} sequences, max relative error {:.3e}, {} final-bet violations",
                stats.leaves, stats.max_rel_err, stats.claim1_failures
            )),
    )
}

pub const MAX_SUBTREE_HORIZON: usize = 12;

// Involution written out independently of the balance module.
fn involution(d: usize, x: f64) -> f64 {
    if d == 0 {
        return 0.0;
    }
    let d = d as f64;
    d * (x - d + 1.0) / (x - d)
}

struct Spread {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Spread {
    fn new() -> Self {
        Self {
            lo: [f64::INFINITY; 2],
            hi: [f64::NEG_INFINITY; 2],
        }
    }

    fn add(&mut self, last: Outcome, value: f64) {
        let i = last.index();
        self.lo[i] = self.lo[i].min(value);
        self.hi[i] = self.hi[i].max(value);
    }
}

// Leaves of the sub-tree below `state`, with losses counted from the sub-tree root.
fn subtree_leaves(
    state: DecisiveState,
    odds: crate::game::OddsPoint,
    acc: LossVector,
    spread: &mut Spread,
) -> Result<()> {
    for bet in [Outcome::Zero, Outcome::One] {
        let acc = acc.add(&round_loss(odds, bet.as_bet()));
        if state.t == state.horizon {
            spread.add(bet, acc.get(bet));
        } else {
            let (next, next_odds) = state.step(bet)?;
            subtree_leaves(next, next_odds, acc, spread)?;
        }
    }
    Ok(())
}

/// Sub-tree value `(V⁰, V¹)` below the node reached after `prefix`, with the
/// spread of each within the sub-tree.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SubtreeValue {
    pub depth: usize,
    pub v0: f64,
    pub v1: f64,
    pub spread0: f64,
    pub spread1: f64,
}

pub fn subtree_value(prefix: &[Outcome], horizon: usize) -> Result<SubtreeValue> {
    if prefix.len() >= horizon {
        return Err(domain("prefix must leave at least one round"));
    }
    let mut state = DecisiveState::init(horizon)?;
    let mut odds = state.first_odds();
    for &b in prefix {
        (state, odds) = state.step(b)?;
    }
    let mut spread = Spread::new();
    subtree_leaves(state, odds, LossVector::ZERO, &mut spread)?;
    Ok(SubtreeValue {
        depth: horizon - prefix.len(),
        v0: spread.hi[0],
        v1: spread.hi[1],
        spread0: spread.hi[0] - spread.lo[0],
        spread1: spread.hi[1] - spread.lo[1],
    })
}

/// Checks that every sub-tree of the optimal `T`-round tree is bi-balanced
/// and that its value lies on the curve `V¹ = f_d(V⁰)`.
pub fn verify_subtree_balance(horizon: usize) -> Result<VerificationReport> {
    if horizon == 0 || horizon > MAX_SUBTREE_HORIZON {
        return Err(Error::Capacity(format!(
            "sub-tree scan is limited to 1 <= T <= {MAX_SUBTREE_HORIZON}, got {horizon}"
        )));
    }
    let mut worst: f64 = 0.0;
    let mut nodes = 0usize;
    let mut prefix = Vec::with_capacity(horizon);
    for len in 0..horizon {
        for code in 0..1usize << len {
            prefix.clear();
            prefix.extend((0..len).rev().map(|i| Outcome::from_bit(code >> i & 1 == 1)));
            let v = subtree_value(&prefix, horizon)?;
            let scale = v.v0.max(v.v1);
            let curve = (involution(v.depth, v.v0) - v.v1).abs();
            worst = worst.max(v.spread0 / scale).max(v.spread1 / scale).max(curve / scale);
            nodes += 1;
        }
    }
    Ok(
        VerificationReport::new("subtree-balance", horizon, worst, worst <= 1e-9)
            .with_detail(format!("{nodes} sub-trees, max relative deviation {worst:.3e}")),
    )
}

/// Plays the expected-skeleton house against `n_samples` bet sequences drawn
/// uniformly from `[0,1]^T` and checks no loss exceeds `T + √T`.
pub fn verify_jensen_domination(horizon: usize, n_samples: usize, seed: u64) -> Result<VerificationReport> {
    if horizon == 0 || horizon > MAX_SUBTREE_HORIZON {
        return Err(Error::Capacity(format!(
            "sampling check is limited to 1 <= T <= {MAX_SUBTREE_HORIZON}, got {horizon}"
        )));
    }
    let target = optimum(horizon);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = GameConfig::fair(horizon)?;
    let mut max_loss: f64 = 0.0;
    for _ in 0..n_samples {
        let bets = (0..horizon)
            .map(|_| BetPoint::new(rng.gen::<f64>()))
            .collect::<Result<Vec<_>>>()?;
        let mut house = ExpectedSkeleton::new(horizon)?;
        let tr = play_game(&mut house, &mut SequenceGambler::new(bets), config)?;
        max_loss = max_loss.max(game_loss(&tr)?);
    }
    let excess = (max_loss - target).max(0.0);
    Ok(
        VerificationReport::new("jensen-domination", horizon, excess, max_loss <= target + 1e-9)
            .with_value(max_loss)
            .with_detail(format!("{n_samples} samples, max loss {max_loss} vs bound {target}")),
    )
}

/// Point of `S` nearest `x`, by search over rows `x2 = j·h` of `[0, Δ]`.
///
/// `S` is recovered from the same half-plane tests the region classifier
/// uses, intersected with the non-negative quadrant. Each row of `S` is an
/// interval `[0, m]` with `m` found by bisection on membership, so the row
/// optimum is exact; the distance is convex in `x2`, so a second pass of `n`
/// rows between the neighbours of the best row pins it down further.
pub fn grid_projection(x: AvgLoss, dp: DeltaParam, n: usize) -> [f64; 2] {
    let d = dp.value();
    let inside = |p1: f64, p2: f64| region_memberships(AvgLoss::new(p1, p2), dp)[0];
    let row_best = |p2: f64| -> Option<([f64; 2], f64)> {
        if !inside(0.0, p2) {
            return None;
        }
        let (mut lo, mut hi) = (0.0, d);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if inside(mid, p2) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p = [x.x1.clamp(0.0, lo), p2];
        Some((p, (p[0] - x.x1).powi(2) + (p[1] - x.x2).powi(2)))
    };
    let scan = |from: f64, to: f64| {
        let h = (to - from) / (n - 1) as f64;
        (0..n)
            .filter_map(|j| row_best(from + j as f64 * h))
            .fold(([f64::NAN; 2], f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
    };
    let h = d / (n - 1) as f64;
    let (coarse, _) = scan(0.0, d);
    let (fine, _) = scan((coarse[1] - h).max(0.0), (coarse[1] + h).min(d));
    fine
}

/// Region predicates on `n_points` random points: each lies in exactly one
/// of `S, A1, A2, A3`.
pub fn verify_blackwell_partition(n_points: usize, seed: u64) -> VerificationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0usize;
    for _ in 0..n_points {
        let dp = DeltaParam::new(rng.gen_range(1.0001..1.9999)).expect("in range");
        let x = AvgLoss::new(rng.gen_range(-3.0..5.0), rng.gen_range(-3.0..5.0));
        if region_memberships(x, dp).iter().filter(|&&m| m).count() != 1 {
            bad += 1;
        }
    }
    VerificationReport::new("blackwell-partition", 0, bad as f64, bad == 0)
        .with_detail(format!("{n_points} points, {bad} in zero or several regions"))
}

/// Closed-form projection against [`grid_projection`] with 2000 rows per
/// pass, on random points of `[0, 3]²`.
pub fn verify_blackwell_projection(n_points: usize, seed: u64, tolerance: f64) -> VerificationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_points {
        let dp = DeltaParam::new(rng.gen_range(1.05..1.95)).expect("in range");
        let x = AvgLoss::new(rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0));
        let p = project_to_s(x, dp);
        let g = grid_projection(x, dp, 2000);
        worst = worst.max((p[0] - g[0]).hypot(p[1] - g[1]));
    }
    VerificationReport::new("blackwell-projection", 0, worst, worst <= tolerance)
        .with_detail(format!("{n_points} points, max distance to grid argmin {worst:.3e}"))
}
