//! House strategies sharing the [`HouseStrategy`] interface.
//!
//! * [`OptimalDecisive`]: the two-number state machine that keeps the tree of
//!   future losses bi-balanced. Worst-case loss exactly `T + √T`.
//! * [`ExpectedSkeleton`]: the optimal skeleton averaged over independent
//!   Bernoulli realisations of continuous bets, computed exactly.
//! * [`UniformHouse`] and [`KtHouse`]: comparison baselines.
//!
//! [`HouseKind`] maps the string ids used on the command line to builders.

use serde_json::Value;

use crate::balance::f_involution;
use crate::blackwell::{BlackwellHouse, DeltaParam};
use crate::error::{domain, Error, Result};
use crate::game::{BetPoint, HouseStrategy, OddsPoint, Outcome};
use crate::monte_carlo::{MCConfig, MonteCarloHouse};

/// Largest number of live branches the exact expected-skeleton sum may carry.
pub const MAX_EXACT_BRANCHES: usize = 1 << 24;

/// Weights below this are dropped from the exact expected-skeleton sum.
pub const WEIGHT_PRUNE: f64 = 1e-30;

/// Running state `(a, b)` of the optimal decisive strategy before round `t`.
///
/// `a` (resp. `b`) is the worst-case future loss if team 0 (resp. 1) wins.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecisiveState {
    pub a: f64,
    pub b: f64,
    /// 1-based index of the round whose odds were last emitted.
    pub t: usize,
    pub horizon: usize,
}

impl DecisiveState {
    pub fn init(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(domain("horizon must be at least 1"));
        }
        let h = horizon as f64;
        let root = h + h.sqrt();
        Ok(Self {
            a: root,
            b: root,
            t: 1,
            horizon,
        })
    }

    /// Odds of the first round.
    pub fn first_odds(&self) -> OddsPoint {
        OddsPoint::EVEN
    }

    /// Rounds still to play after round `t`.
    pub fn remaining(&self) -> usize {
        self.horizon - self.t
    }

    /// Consumes the bet of round `t` and returns the state and odds of round `t+1`.
    pub fn step(&self, bet: Outcome) -> Result<(Self, OddsPoint)> {
        if self.t >= self.horizon {
            return Err(domain(format!("all {} rounds already played", self.horizon)));
        }
        let d = self.horizon - self.t;
        let (mut a, mut b) = (self.a, self.b);
        match bet {
            Outcome::Zero => a = f_involution(d, b)?,
            Outcome::One => b = f_involution(d, a)?,
        }
        let b_plus = f_involution(d - 1, a)?;
        let r = 1.0 / (b - b_plus);
        let odds = OddsPoint::new(r).map_err(|_| {
            Error::Invariant(format!(
                "optimal odds {r} left (0, 1) at round {} (a={a}, b={b})",
                self.t + 1
            ))
        })?;
        let next = Self {
            a,
            b,
            t: self.t + 1,
            horizon: self.horizon,
        };
        Ok((next, odds))
    }
}

/// Optimal house against decisive gamblers.
#[derive(Clone, Debug)]
pub struct OptimalDecisive {
    state: DecisiveState,
    started: bool,
}

impl OptimalDecisive {
    pub fn new(horizon: usize) -> Result<Self> {
        Ok(Self {
            state: DecisiveState::init(horizon)?,
            started: false,
        })
    }

    pub fn state(&self) -> &DecisiveState {
        &self.state
    }
}

impl HouseStrategy for OptimalDecisive {
    fn name(&self) -> &'static str {
        "optimal"
    }

    fn horizon(&self) -> usize {
        self.state.horizon
    }

    fn next_odds(&mut self, prev_bet: Option<BetPoint>) -> Result<OddsPoint> {
        match (self.started, prev_bet) {
            (false, None) => {
                self.started = true;
                Ok(self.state.first_odds())
            }
            (true, Some(q)) => {
                let (next, r) = self.state.step(q.require_decisive()?)?;
                self.state = next;
                Ok(r)
            }
            _ => Err(domain("previous bet must be absent exactly on the first round")),
        }
    }

    fn boxed_clone(&self) -> Box<dyn HouseStrategy> {
        Box::new(self.clone())
    }
}

/// Optimal odds along a decisive history (`r_1 .. r_{len+1}`).
pub fn optimal_odds_path(history: &[Outcome], horizon: usize) -> Result<Vec<OddsPoint>> {
    let mut state = DecisiveState::init(horizon)?;
    let mut out = Vec::with_capacity(history.len() + 1);
    out.push(state.first_odds());
    for &bet in history {
        let (next, r) = state.step(bet)?;
        state = next;
        out.push(r);
    }
    Ok(out)
}

/// Weighted set of decisive states reachable under independent Bernoulli bets.
#[derive(Clone, Debug)]
struct Frontier {
    // (state, weight) in lexicographic order of the underlying bit prefix
    branches: Vec<(DecisiveState, f64)>,
}

impl Frontier {
    fn new(horizon: usize) -> Result<Self> {
        Ok(Self {
            branches: vec![(DecisiveState::init(horizon)?, 1.0)],
        })
    }

    /// Advances every branch by one Bernoulli(q) bet and returns the
    /// weighted mean of the next odds.
    fn advance(&mut self, q: BetPoint) -> Result<OddsPoint> {
        let q = q.value();
        let mut next = Vec::with_capacity(self.branches.len() * if q == 0.0 || q == 1.0 { 1 } else { 2 });
        let mut r = 0.0;
        for &(state, w) in &self.branches {
            for (bet, wb) in [(Outcome::Zero, w * (1.0 - q)), (Outcome::One, w * q)] {
                if wb < WEIGHT_PRUNE {
                    continue;
                }
                if next.len() == MAX_EXACT_BRANCHES {
                    return Err(Error::Capacity(format!(
                        "exact expected-skeleton sum exceeds {MAX_EXACT_BRANCHES} branches; use the Monte Carlo strategy"
                    )));
                }
                let (child, odds) = state.step(bet)?;
                r += wb * odds.value();
                next.push((child, wb));
            }
        }
        self.branches = next;
        OddsPoint::new(r).map_err(|_| Error::Invariant(format!("expected odds {r} left (0, 1)")))
    }
}

/// Expected-skeleton odds `E[r^ALG_t(X^{t-1})]` with `X_i ~ Ber(q_i)` independent,
/// summed exactly over the `2^{t-1}` decisive realisations (zero-weight
/// branches are skipped, so decisive histories cost `O(t)`).
pub fn expected_skeleton_odds(history: &[BetPoint], horizon: usize) -> Result<OddsPoint> {
    if history.len() >= horizon {
        return Err(domain(format!(
            "history of length {} leaves no round to price at horizon {horizon}",
            history.len()
        )));
    }
    let mut frontier = Frontier::new(horizon)?;
    let mut r = OddsPoint::EVEN;
    for &q in history {
        r = frontier.advance(q)?;
    }
    Ok(r)
}

/// House playing the expected skeleton of the optimal strategy, for
/// continuous bets.
#[derive(Clone, Debug)]
pub struct ExpectedSkeleton {
    horizon: usize,
    frontier: Frontier,
    started: bool,
}

impl ExpectedSkeleton {
    pub fn new(horizon: usize) -> Result<Self> {
        Ok(Self {
            horizon,
            frontier: Frontier::new(horizon)?,
            started: false,
        })
    }

    /// Number of live decisive branches in the exact sum.
    pub fn branches(&self) -> usize {
        self.frontier.branches.len()
    }
}

impl HouseStrategy for ExpectedSkeleton {
    fn name(&self) -> &'static str {
        "expected"
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn next_odds(&mut self, prev_bet: Option<BetPoint>) -> Result<OddsPoint> {
        match (self.started, prev_bet) {
            (false, None) => {
                self.started = true;
                Ok(OddsPoint::EVEN)
            }
            (true, Some(q)) => self.frontier.advance(q),
            _ => Err(domain("previous bet must be absent exactly on the first round")),
        }
    }

    fn boxed_clone(&self) -> Box<dyn HouseStrategy> {
        Box::new(self.clone())
    }
}

/// Krichevsky–Trofimov assignment: `(1/2 + #ones) / (len + 1)`.
pub fn kt_baseline_odds(history: &[Outcome]) -> OddsPoint {
    let ones = history.iter().filter(|b| b.is_one()).count();
    let r = (0.5 + ones as f64) / (history.len() + 1) as f64;
    OddsPoint::new(r).expect("KT odds are interior")
}

#[derive(Clone, Debug)]
pub struct KtHouse {
    horizon: usize,
    zeros: usize,
    ones: usize,
}

impl KtHouse {
    pub fn new(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(domain("horizon must be at least 1"));
        }
        Ok(Self {
            horizon,
            zeros: 0,
            ones: 0,
        })
    }
}

impl HouseStrategy for KtHouse {
    fn name(&self) -> &'static str {
        "kt"
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn next_odds(&mut self, prev_bet: Option<BetPoint>) -> Result<OddsPoint> {
        if let Some(q) = prev_bet {
            match q.require_decisive()? {
                Outcome::Zero => self.zeros += 1,
                Outcome::One => self.ones += 1,
            }
        }
        let t = self.zeros + self.ones + 1;
        OddsPoint::new((0.5 + self.ones as f64) / t as f64)
    }

    fn boxed_clone(&self) -> Box<dyn HouseStrategy> {
        Box::new(self.clone())
    }
}

pub fn uniform_baseline_odds() -> OddsPoint {
    OddsPoint::EVEN
}

/// Always quotes even odds.
#[derive(Clone, Debug)]
pub struct UniformHouse {
    horizon: usize,
}

impl UniformHouse {
    pub fn new(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(domain("horizon must be at least 1"));
        }
        Ok(Self { horizon })
    }
}

impl HouseStrategy for UniformHouse {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn next_odds(&mut self, _prev_bet: Option<BetPoint>) -> Result<OddsPoint> {
        Ok(uniform_baseline_odds())
    }

    fn boxed_clone(&self) -> Box<dyn HouseStrategy> {
        Box::new(self.clone())
    }
}

/// House strategy selected by id: `optimal`, `expected`, `mc`, `blackwell`,
/// `kt` or `uniform`.
#[derive(Clone, Debug, PartialEq)]
pub enum HouseKind {
    Optimal,
    Expected,
    MonteCarlo(MCConfig),
    /// `None` picks `Δ` from the horizon schedule.
    Blackwell(Option<DeltaParam>),
    Kt,
    Uniform,
}

impl HouseKind {
    pub const IDS: [&'static str; 6] = ["optimal", "expected", "mc", "blackwell", "kt", "uniform"];

    /// Parses an id with its JSON parameter object, e.g. `("mc", {"N": 500, "seed": 3})`
    /// or `("blackwell", {"delta": 1.4})`. `mc` also accepts `eps`/`delta` in
    /// place of `N`, which then needs the horizon and is resolved by [`HouseKind::build`].
    pub fn parse(id: &str, params: &Value) -> Result<Self> {
        let obj = match params {
            Value::Null => None,
            Value::Object(m) => Some(m),
            other => {
                return Err(domain(format!(
                    "strategy parameters must be a JSON object, got {other}"
                )))
            }
        };
        let get = |k: &str| obj.and_then(|m| m.get(k));
        let num = |k: &str| -> Result<Option<f64>> {
            match get(k) {
                None | Some(Value::Null) => Ok(None),
                Some(v) => v
                    .as_f64()
                    .map(Some)
                    .ok_or_else(|| domain(format!("parameter {k} must be a number"))),
            }
        };
        let int = |k: &str| -> Result<Option<u64>> {
            match get(k) {
                None | Some(Value::Null) => Ok(None),
                Some(v) => v
                    .as_u64()
                    .map(Some)
                    .ok_or_else(|| domain(format!("parameter {k} must be a nonnegative integer"))),
            }
        };
        Ok(match id {
            "optimal" => HouseKind::Optimal,
            "expected" => HouseKind::Expected,
            "kt" => HouseKind::Kt,
            "uniform" => HouseKind::Uniform,
            "blackwell" => HouseKind::Blackwell(num("delta")?.map(DeltaParam::new).transpose()?),
            "mc" => HouseKind::MonteCarlo(MCConfig {
                n: int("N")?.map(|n| n as usize),
                seed: int("seed")?.unwrap_or(0),
                epsilon: num("eps")?,
                delta: num("delta")?,
                antithetic: get("antithetic").and_then(Value::as_bool).unwrap_or(false),
            }),
            other => {
                return Err(domain(format!(
                    "unknown house strategy {other:?}; expected one of {}",
                    Self::IDS.join(", ")
                )))
            }
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            HouseKind::Optimal => "optimal",
            HouseKind::Expected => "expected",
            HouseKind::MonteCarlo(_) => "mc",
            HouseKind::Blackwell(_) => "blackwell",
            HouseKind::Kt => "kt",
            HouseKind::Uniform => "uniform",
        }
    }

    pub fn build(&self, horizon: usize) -> Result<Box<dyn HouseStrategy>> {
        Ok(match self {
            HouseKind::Optimal => Box::new(OptimalDecisive::new(horizon)?),
            HouseKind::Expected => Box::new(ExpectedSkeleton::new(horizon)?),
            HouseKind::MonteCarlo(cfg) => Box::new(MonteCarloHouse::new(horizon, cfg)?),
            HouseKind::Blackwell(delta) => Box::new(BlackwellHouse::new(horizon, *delta)?),
            HouseKind::Kt => Box::new(KtHouse::new(horizon)?),
            HouseKind::Uniform => Box::new(UniformHouse::new(horizon)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{game_loss, play_game, GamblerStrategy, GameConfig, RoundView};

    const S2: f64 = std::f64::consts::SQRT_2;

    fn bits(s: &str) -> Vec<Outcome> {
        s.chars().map(|c| Outcome::from_bit(c == '1')).collect()
    }

    fn bets(qs: &[f64]) -> Vec<BetPoint> {
        qs.iter().map(|&q| BetPoint::new(q).unwrap()).collect()
    }

    #[test]
    fn init_examples() {
        let s = DecisiveState::init(2).unwrap();
        assert_eq!((s.a, s.b), (2.0 + S2, 2.0 + S2));
        let s = DecisiveState::init(9).unwrap();
        assert_eq!((s.a, s.b), (12.0, 12.0));
        let s = DecisiveState::init(1).unwrap();
        assert_eq!((s.a, s.b), (2.0, 2.0));
        assert_eq!(s.first_odds().value(), 0.5);
        assert!(DecisiveState::init(0).is_err());
    }

    #[test]
    fn step_examples() {
        let p = optimal_odds_path(&bits("0"), 2).unwrap();
        assert!((p[1].value() - (1.0 - 1.0 / S2)).abs() < 1e-12);
        assert!((p[1].value() - 0.2928932).abs() < 1e-7);

        let s3 = 3f64.sqrt();
        let p = optimal_odds_path(&bits("00"), 3).unwrap();
        assert!((p[1].value() - (3.0 - s3) / 4.0).abs() < 1e-12);
        assert!((p[2].value() - (3.0 - s3) / 6.0).abs() < 1e-12);
        let p = optimal_odds_path(&bits("01"), 3).unwrap();
        assert!((p[2].value() - (3.0 - s3) / 2.0).abs() < 1e-12);
        let p = optimal_odds_path(&bits("1"), 3).unwrap();
        assert!((p[1].value() - (1.0 + s3) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn step_past_horizon_fails() {
        let s = DecisiveState::init(1).unwrap();
        assert!(s.step(Outcome::One).is_err());
    }

    #[test]
    fn optimal_rejects_continuous_bets() {
        let mut h = OptimalDecisive::new(3).unwrap();
        h.next_odds(None).unwrap();
        assert!(matches!(
            h.next_odds(Some(BetPoint::new(0.3).unwrap())),
            Err(Error::NotDecisive(_))
        ));
    }

    #[test]
    fn expected_examples() {
        assert_eq!(expected_skeleton_odds(&[], 4).unwrap().value(), 0.5);
        let r = expected_skeleton_odds(&bets(&[0.5]), 2).unwrap().value();
        assert!((r - 0.5).abs() < 1e-15);
        let h = bets(&[1.0, 0.0, 0.0, 1.0]);
        let exact = optimal_odds_path(&bits("1001"), 6).unwrap()[4];
        assert_eq!(expected_skeleton_odds(&h, 6).unwrap(), exact);
        assert!(expected_skeleton_odds(&bets(&[0.5, 0.5]), 2).is_err());
    }

    #[test]
    fn expected_is_affine_in_each_bet() {
        let base = [0.3, 0.8, 0.1, 0.55];
        for i in 0..base.len() {
            let at = |x: f64| {
                let mut h = base;
                h[i] = x;
                expected_skeleton_odds(&bets(&h), 6).unwrap().value()
            };
            let (r0, r1, rm) = (at(0.0), at(1.0), at(0.37));
            assert!((rm - (0.63 * r0 + 0.37 * r1)).abs() < 1e-13, "coordinate {i}");
        }
    }

    #[test]
    fn expected_house_collapses_on_decisive_bets() {
        let mut h = ExpectedSkeleton::new(20).unwrap();
        h.next_odds(None).unwrap();
        for i in 0..19 {
            h.next_odds(Some(Outcome::from_bit(i % 3 == 0).as_bet())).unwrap();
        }
        assert_eq!(h.branches(), 1);
    }

    #[test]
    fn kt_examples() {
        assert_eq!(kt_baseline_odds(&[]).value(), 0.5);
        assert!((kt_baseline_odds(&bits("00")).value() - 1.0 / 6.0).abs() < 1e-15);
        let mut h = KtHouse::new(3).unwrap();
        h.next_odds(None).unwrap();
        assert!(matches!(
            h.next_odds(Some(BetPoint::new(0.5).unwrap())),
            Err(Error::NotDecisive(_))
        ));
    }

    struct Script(Vec<f64>);
    impl GamblerStrategy for Script {
        fn next_bet(&mut self, v: &RoundView) -> Result<BetPoint> {
            BetPoint::new(self.0[v.round - 1])
        }
    }

    #[test]
    fn kt_pays_2t_on_zeros_then_one() {
        for t in [4usize, 8, 16] {
            let mut seq = vec![0.0; t - 1];
            seq.push(1.0);
            let mut house = KtHouse::new(t).unwrap();
            let tr = play_game(&mut house, &mut Script(seq), GameConfig::fair(t).unwrap()).unwrap();
            assert!((tr.accumulated().l1 - 2.0 * t as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_examples() {
        assert_eq!(uniform_baseline_odds().value(), 0.5);
        let t = 6;
        let mut house = UniformHouse::new(t).unwrap();
        let tr = play_game(&mut house, &mut Script(vec![1.0; t]), GameConfig::fair(t).unwrap()).unwrap();
        assert_eq!(game_loss(&tr).unwrap(), 12.0);
        let mut house = UniformHouse::new(t).unwrap();
        let tr = play_game(&mut house, &mut Script(vec![0.5; t]), GameConfig::fair(t).unwrap()).unwrap();
        assert_eq!(game_loss(&tr).unwrap(), 6.0);
    }

    #[test]
    fn registry_parses_ids() {
        assert_eq!(HouseKind::parse("optimal", &Value::Null).unwrap(), HouseKind::Optimal);
        let mc = HouseKind::parse("mc", &serde_json::json!({"N": 100, "seed": 7})).unwrap();
        assert_eq!(
            mc,
            HouseKind::MonteCarlo(MCConfig {
                n: Some(100),
                seed: 7,
                epsilon: None,
                delta: None,
                antithetic: false
            })
        );
        let bw = HouseKind::parse("blackwell", &serde_json::json!({"delta": 1.5})).unwrap();
        assert!(matches!(bw, HouseKind::Blackwell(Some(_))));
        assert!(HouseKind::parse("blackwell", &serde_json::json!({"delta": 2.5})).is_err());
        assert!(HouseKind::parse("nope", &Value::Null).is_err());
        assert!(HouseKind::parse("mc", &serde_json::json!([1])).is_err());
        for id in HouseKind::IDS {
            let params = if id == "mc" {
                serde_json::json!({"N": 10})
            } else {
                Value::Null
            };
            let kind = HouseKind::parse(id, &params).unwrap();
            assert_eq!(kind.id(), id);
            let horizon = if id == "blackwell" { 64 } else { 5 };
            assert_eq!(kind.build(horizon).unwrap().horizon(), horizon);
        }
    }
}
