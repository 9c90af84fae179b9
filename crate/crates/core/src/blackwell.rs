//! Approachability baseline.
//!
//! The house steers the time-averaged loss vector `φ̄_t` towards the target
//! set `S`, the quadrilateral with corners `(0,0)`, `(0,Δ)`, `(1,1)`, `(Δ,0)`.
//! Odds are drawn from the segment between `λ1` and `λ2`, so no payout
//! exceeds `Δ/(Δ-1)` and the average loss stays below
//! `Δ + √(2/t)·Δ²/(Δ-1)` at every `t`. Probability vectors are `(outcome 0, outcome 1)`.

use std::fmt;

use crate::error::{domain, Error, Result};
use crate::game::{round_loss, BetPoint, HouseStrategy, LossVector, OddsPoint};

/// Cap `Δ ∈ (1, 2)` on the normalised loss targeted by the strategy.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct DeltaParam(f64);

impl DeltaParam {
    pub fn new(delta: f64) -> Result<Self> {
        if delta > 1.0 && delta < 2.0 {
            Ok(Self(delta))
        } else {
            Err(domain(format!("Δ must lie in (1, 2), got {delta}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Smallest probability the strategy ever assigns to an outcome.
    pub fn min_odds(self) -> f64 {
        (self.0 - 1.0) / self.0
    }
}

/// Time-averaged loss vector `φ̄_t`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AvgLoss {
    pub x1: f64,
    pub x2: f64,
}

impl AvgLoss {
    pub fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn sup_norm(&self) -> f64 {
        self.x1.abs().max(self.x2.abs())
    }

    fn centred(&self) -> [f64; 2] {
        [self.x1 - 1.0, self.x2 - 1.0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    S,
    A1Minus,
    A1Plus,
    A2Minus,
    A2Plus,
    A3,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::S => "S",
            Region::A1Minus => "A1-",
            Region::A1Plus => "A1+",
            Region::A2Minus => "A2-",
            Region::A2Plus => "A2+",
            Region::A3 => "A3",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lambdas {
    pub l1: [f64; 2],
    pub l1_perp: [f64; 2],
    pub l2: [f64; 2],
    pub l2_perp: [f64; 2],
}

pub fn lambda_vectors(dp: DeltaParam) -> Lambdas {
    let d = dp.value();
    Lambdas {
        l1: [1.0 - 1.0 / d, 1.0 / d],
        l1_perp: [1.0, 1.0 - d],
        l2: [1.0 / d, 1.0 - 1.0 / d],
        l2_perp: [1.0 - d, 1.0],
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Inner products of `x - (1,1)` with `λ1, λ2, λ1⊥, λ2⊥`.
fn products(x: AvgLoss, lam: &Lambdas) -> [f64; 4] {
    let y = x.centred();
    [dot(y, lam.l1), dot(y, lam.l2), dot(y, lam.l1_perp), dot(y, lam.l2_perp)]
}

/// Membership of `x` in `S, A1, A2, A3`, each evaluated on its own.
pub fn region_memberships(x: AvgLoss, dp: DeltaParam) -> [bool; 4] {
    let [p1, p2, s1, s2] = products(x, &lambda_vectors(dp));
    [
        p1 <= 0.0 && p2 <= 0.0,
        p1 > 0.0 && s1 <= 0.0,
        p2 > 0.0 && s2 <= 0.0,
        s1 > 0.0 && s2 > 0.0,
    ]
}

/// Region of `x`. `A1`/`A2` are split at the endpoint of the boundary
/// segment of `S`: the minus side projects onto the corner `(0,Δ)` (resp. `(Δ,0)`).
pub fn classify_region(x: AvgLoss, dp: DeltaParam) -> Region {
    let lam = lambda_vectors(dp);
    let [p1, p2, s1, s2] = products(x, &lam);
    if p1 <= 0.0 && p2 <= 0.0 {
        Region::S
    } else if p1 > 0.0 && s1 <= 0.0 {
        if s1 < -dot(lam.l1_perp, lam.l1_perp) {
            Region::A1Minus
        } else {
            Region::A1Plus
        }
    } else if p2 > 0.0 && s2 <= 0.0 {
        if s2 < -dot(lam.l2_perp, lam.l2_perp) {
            Region::A2Minus
        } else {
            Region::A2Plus
        }
    } else {
        // s1 > 0 && s2 > 0 in exact arithmetic; rounding can only leave a
        // point here within a few ulps of (1, 1)
        Region::A3
    }
}

/// Euclidean projection of `x` onto `S`.
pub fn project_to_s(x: AvgLoss, dp: DeltaParam) -> [f64; 2] {
    let lam = lambda_vectors(dp);
    let d = dp.value();
    let along = |perp: [f64; 2]| {
        let s = dot(x.centred(), perp) / dot(perp, perp);
        [1.0 + s * perp[0], 1.0 + s * perp[1]]
    };
    match classify_region(x, dp) {
        Region::S => [x.x1, x.x2],
        Region::A1Minus => [0.0, d],
        Region::A1Plus => along(lam.l1_perp),
        Region::A2Plus => along(lam.l2_perp),
        Region::A2Minus => [d, 0.0],
        Region::A3 => [1.0, 1.0],
    }
}

/// Next odds as a probability vector over `(outcome 0, outcome 1)`.
pub fn blackwell_next_odds(x: AvgLoss, dp: DeltaParam) -> [f64; 2] {
    let lam = lambda_vectors(dp);
    match classify_region(x, dp) {
        Region::A1Minus | Region::A1Plus => lam.l1,
        Region::A2Minus | Region::A2Plus => lam.l2,
        Region::A3 => {
            let y = x.centred();
            let norm = y[0].abs() + y[1].abs();
            if norm == 0.0 || y[0] < 0.0 || y[1] < 0.0 {
                // only reachable through rounding at (1, 1)
                return [0.5, 0.5];
            }
            [y[0] / norm, y[1] / norm]
        }
        Region::S => [0.5, 0.5],
    }
}

/// `Δ = 1 + δ_T` with `δ_T = (2/T)^{1/4} / (1 - (2/T)^{1/4})`; needs `T > 32`.
pub fn delta_for_horizon(horizon: usize) -> Result<DeltaParam> {
    if horizon <= 32 {
        return Err(domain(format!(
            "the Δ schedule needs T > 32 (got {horizon}); pass Δ explicitly"
        )));
    }
    let u = (2.0 / horizon as f64).powf(0.25);
    DeltaParam::new(1.0 + u / (1.0 - u))
}

/// `Δ + √(2/t)·Δ²/(Δ-1)`.
pub fn anytime_bound(t: usize, dp: DeltaParam) -> Result<f64> {
    if t == 0 {
        return Err(domain("t must be at least 1"));
    }
    let d = dp.value();
    Ok(d + (2.0 / t as f64).sqrt() * d * d / (d - 1.0))
}

/// `1 + 2δ_T`, the normalised loss guaranteed at the horizon by the schedule.
pub fn final_bound(horizon: usize) -> Result<f64> {
    Ok(2.0 * delta_for_horizon(horizon)?.value() - 1.0)
}

/// House following the approachability rule.
#[derive(Clone, Debug)]
pub struct BlackwellHouse {
    horizon: usize,
    delta: DeltaParam,
    sum: LossVector,
    t: usize,
    last: Option<OddsPoint>,
}

impl BlackwellHouse {
    /// `delta = None` uses [`delta_for_horizon`].
    pub fn new(horizon: usize, delta: Option<DeltaParam>) -> Result<Self> {
        if horizon == 0 {
            return Err(domain("horizon must be at least 1"));
        }
        let delta = match delta {
            Some(d) => d,
            None => delta_for_horizon(horizon)?,
        };
        Ok(Self {
            horizon,
            delta,
            sum: LossVector::ZERO,
            t: 0,
            last: None,
        })
    }

    pub fn delta(&self) -> DeltaParam {
        self.delta
    }

    /// `φ̄_t` over the rounds settled so far; `(0, 0)` before the first.
    pub fn avg_loss(&self) -> AvgLoss {
        average(self.sum, self.t)
    }
}

fn average(sum: LossVector, t: usize) -> AvgLoss {
    if t == 0 {
        AvgLoss::default()
    } else {
        AvgLoss::new(sum.l0 / t as f64, sum.l1 / t as f64)
    }
}

fn scalar_odds(r: [f64; 2]) -> Result<OddsPoint> {
    OddsPoint::new(r[1]).map_err(|_| Error::Invariant(format!("approachability odds {r:?} left the simplex interior")))
}

impl HouseStrategy for BlackwellHouse {
    fn name(&self) -> &'static str {
        "blackwell"
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn next_odds(&mut self, prev_bet: Option<BetPoint>) -> Result<OddsPoint> {
        match (self.last, prev_bet) {
            (None, None) => {}
            (Some(r), Some(q)) => {
                self.sum = self.sum.add(&round_loss(r, q));
                self.t += 1;
            }
            _ => return Err(domain("previous bet must be absent exactly on the first round")),
        }
        let r = scalar_odds(blackwell_next_odds(self.avg_loss(), self.delta))?;
        self.last = Some(r);
        Ok(r)
    }

    fn boxed_clone(&self) -> Box<dyn HouseStrategy> {
        Box::new(self.clone())
    }
}

/// One row of a per-round trace: `φ̄_t`, its region, the odd quoted for
/// round `t+1` and the anytime bound at `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub phi: AvgLoss,
    pub region: Region,
    pub r: f64,
    pub bound: f64,
}

pub const TRACE_CSV_HEADER: &str = "t,phi1,phi2,region,r,bound";

/// Replays a game's rounds and reports the approachability quantities after
/// each of them.
pub fn trace(rounds: &[crate::game::Round], dp: DeltaParam) -> Result<Vec<TraceRow>> {
    let mut sum = LossVector::ZERO;
    rounds
        .iter()
        .enumerate()
        .map(|(i, round)| {
            let t = i + 1;
            sum = sum.add(&round_loss(round.odds, round.bet));
            let phi = average(sum, t);
            Ok(TraceRow {
                t,
                phi,
                region: classify_region(phi, dp),
                r: blackwell_next_odds(phi, dp)[1],
                bound: anytime_bound(t, dp)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dp(d: f64) -> DeltaParam {
        DeltaParam::new(d).unwrap()
    }

    #[test]
    fn lambda_examples() {
        let lam = lambda_vectors(dp(4.0 / 3.0));
        assert!((lam.l1[0] - 0.25).abs() < 1e-15 && (lam.l1[1] - 0.75).abs() < 1e-15);
        assert!((lam.l1_perp[1] + 1.0 / 3.0).abs() < 1e-15);
        for d in [1.01, 1.3, 1.99] {
            let lam = lambda_vectors(dp(d));
            assert!(dot(lam.l1, lam.l1_perp).abs() < 1e-15);
            assert!(dot(lam.l2, lam.l2_perp).abs() < 1e-15);
        }
        let lam = lambda_vectors(dp(1.0 + 1e-12));
        assert!(lam.l1[0] < 1e-11 && lam.l2[1] < 1e-11);
    }

    #[test]
    fn delta_param_range() {
        assert!(DeltaParam::new(1.0).is_err());
        assert!(DeltaParam::new(2.0).is_err());
        assert!(DeltaParam::new(f64::NAN).is_err());
    }

    #[test]
    fn classify_examples() {
        let d = dp(1.5);
        assert_eq!(classify_region(AvgLoss::new(0.0, 0.0), d), Region::S);
        assert_eq!(classify_region(AvgLoss::new(1.0, 1.0), d), Region::S);
        for dd in [1.1, 1.5, 1.95] {
            assert_eq!(classify_region(AvgLoss::new(2.0, 2.0), dp(dd)), Region::A3);
        }
        assert_eq!(classify_region(AvgLoss::new(0.0, 5.0), d), Region::A1Minus);
        assert_eq!(classify_region(AvgLoss::new(5.0, 0.0), d), Region::A2Minus);
    }

    #[test]
    fn projection_examples() {
        let d = dp(1.5);
        assert_eq!(project_to_s(AvgLoss::new(0.3, 0.2), d), [0.3, 0.2]);
        assert_eq!(project_to_s(AvgLoss::new(2.0, 2.0), d), [1.0, 1.0]);
        assert_eq!(project_to_s(AvgLoss::new(0.0, 5.0), d), [0.0, 1.5]);
        // A1+ lands on the segment from (0,Δ) to (1,1), orthogonally
        let x = AvgLoss::new(0.8, 1.4);
        assert_eq!(classify_region(x, d), Region::A1Plus);
        let p = project_to_s(x, d);
        let lam = lambda_vectors(d);
        assert!(dot([p[0] - 1.0, p[1] - 1.0], lam.l1).abs() < 1e-12);
        assert!(dot([x.x1 - p[0], x.x2 - p[1]], lam.l1_perp).abs() < 1e-12);
    }

    #[test]
    fn next_odds_examples() {
        assert_eq!(blackwell_next_odds(AvgLoss::default(), dp(1.5)), [0.5, 0.5]);
        let d = dp(4.0 / 3.0);
        let x = AvgLoss::new(3.0, 1.0);
        assert_eq!(classify_region(x, d), Region::A2Plus);
        let r = blackwell_next_odds(x, d);
        assert_eq!(r, lambda_vectors(d).l2);
        assert!(r[0].min(r[1]) >= d.min_odds() - 1e-12);
        assert!((r[1] - 0.25).abs() < 1e-15);
        assert_eq!(blackwell_next_odds(AvgLoss::new(2.0, 2.0), d), [0.5, 0.5]);
    }

    #[test]
    fn schedule_examples() {
        assert!((delta_for_horizon(512).unwrap().value() - 4.0 / 3.0).abs() < 1e-12);
        assert!(delta_for_horizon(32).is_err());
        assert!(delta_for_horizon(1).is_err());
        let d = delta_for_horizon(2_000_000).unwrap().value() - 1.0;
        // 10^-1.5 / (1 - 10^-1.5)
        assert!((d - 0.032655).abs() < 1e-6, "{d}");
    }

    #[test]
    fn anytime_bound_examples() {
        let d = dp(4.0 / 3.0);
        assert!((anytime_bound(512, d).unwrap() - 5.0 / 3.0).abs() < 1e-12);
        assert!((anytime_bound(usize::MAX, d).unwrap() - 4.0 / 3.0).abs() < 1e-8);
        assert!(anytime_bound(0, d).is_err());
        for t in [64usize, 512, 4096, 100_000] {
            let dt = delta_for_horizon(t).unwrap();
            let at = anytime_bound(t, dt).unwrap();
            assert!((at - final_bound(t).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn house_tracks_average_loss() {
        let mut h = BlackwellHouse::new(3, Some(dp(1.5))).unwrap();
        assert_eq!(h.next_odds(None).unwrap().value(), 0.5);
        h.next_odds(Some(BetPoint::new(1.0).unwrap())).unwrap();
        assert_eq!(h.avg_loss(), AvgLoss::new(0.0, 2.0));
        assert!(BlackwellHouse::new(10, None).is_err());
    }
}
