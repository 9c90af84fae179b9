//! The binary online bookmaking game: odds, bets, per-round losses and the
//! sequential protocol that couples a house strategy with a gambler.
//!
//! A round pays `(1-q)/(1-r)` if team 0 wins and `q/r` if team 1 wins, per
//! unit staked. The house wants the worst coordinate of the accumulated
//! vector to stay small.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Horizon and overround of a game.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GameConfig {
    horizon: usize,
    overround: f64,
}

impl GameConfig {
    pub fn new(horizon: usize, overround: f64) -> Result<Self> {
        if horizon == 0 {
            return Err(domain("horizon must be at least 1"));
        }
        if !(overround >= 1.0) || !overround.is_finite() {
            return Err(domain(format!("overround must be >= 1, got {overround}")));
        }
        Ok(Self { horizon, overround })
    }

    /// Fair odds (overround 1).
    pub fn fair(horizon: usize) -> Result<Self> {
        Self::new(horizon, 1.0)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn overround(&self) -> f64 {
        self.overround
    }
}

/// One of the two outcomes, or equivalently a decisive bet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Zero,
    One,
}

impl Outcome {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Outcome::One
        } else {
            Outcome::Zero
        }
    }

    pub fn is_one(self) -> bool {
        self == Outcome::One
    }

    pub fn flip(self) -> Self {
        match self {
            Outcome::Zero => Outcome::One,
            Outcome::One => Outcome::Zero,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_bet(self) -> BetPoint {
        BetPoint(if self.is_one() { 1.0 } else { 0.0 })
    }
}

/// Probability the house assigns to outcome 1. Always strictly inside (0, 1).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct OddsPoint(f64);

impl OddsPoint {
    pub const EVEN: OddsPoint = OddsPoint(0.5);

    pub fn new(r: f64) -> Result<Self> {
        if r > 0.0 && r < 1.0 {
            Ok(Self(r))
        } else {
            Err(domain(format!("odds must lie in (0, 1), got {r}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Payout per unit staked on `outcome` at overround `gamma`.
    pub fn payout(self, outcome: Outcome, gamma: f64) -> f64 {
        match outcome {
            Outcome::Zero => 1.0 / (gamma * (1.0 - self.0)),
            Outcome::One => 1.0 / (gamma * self.0),
        }
    }

    pub fn mirrored(self) -> Self {
        Self(1.0 - self.0)
    }
}

impl fmt::Display for OddsPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Fraction of the round's stake placed on outcome 1.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct BetPoint(f64);

impl BetPoint {
    pub fn new(q: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&q) {
            Ok(Self(q))
        } else {
            Err(domain(format!("bet must lie in [0, 1], got {q}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `Some` for bets in {0, 1}.
    pub fn decisive(self) -> Option<Outcome> {
        if self.0 == 0.0 {
            Some(Outcome::Zero)
        } else if self.0 == 1.0 {
            Some(Outcome::One)
        } else {
            None
        }
    }

    pub fn require_decisive(self) -> Result<Outcome> {
        self.decisive().ok_or(Error::NotDecisive(self.0))
    }
}

impl From<Outcome> for BetPoint {
    fn from(o: Outcome) -> Self {
        o.as_bet()
    }
}

/// Payout exposure per winning team.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossVector {
    pub l0: f64,
    pub l1: f64,
}

impl LossVector {
    pub const ZERO: LossVector = LossVector { l0: 0.0, l1: 0.0 };

    pub fn new(l0: f64, l1: f64) -> Self {
        Self { l0, l1 }
    }

    pub fn get(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::Zero => self.l0,
            Outcome::One => self.l1,
        }
    }

    pub fn max(&self) -> f64 {
        self.l0.max(self.l1)
    }

    pub fn add(&self, other: &LossVector) -> LossVector {
        LossVector {
            l0: self.l0 + other.l0,
            l1: self.l1 + other.l1,
        }
    }
}

/// Exposure of one round: `((1-q)/(1-r), q/r)`.
pub fn round_loss(r: OddsPoint, q: BetPoint) -> LossVector {
    let (r, q) = (r.value(), q.value());
    LossVector {
        l0: (1.0 - q) / (1.0 - r),
        l1: q / r,
    }
}

/// The largest payout the house can owe at the end of a complete game.
pub fn game_loss(t: &Transcript) -> Result<f64> {
    if !t.is_complete() {
        return Err(Error::IncompleteTranscript {
            played: t.rounds.len(),
            horizon: t.config.horizon,
        });
    }
    Ok(t.accumulated.max())
}

/// Guaranteed house gain `T(1 - loss/(TΓ))` for a worst-case loss.
pub fn house_gain(loss: f64, config: &GameConfig) -> Result<f64> {
    if !(loss >= 0.0) {
        return Err(domain(format!("loss must be nonnegative, got {loss}")));
    }
    let t = config.horizon as f64;
    Ok(t * (1.0 - loss / (t * config.overround)))
}

/// A house strategy: emits `r_t` after seeing `q_1 .. q_{t-1}`.
pub trait HouseStrategy: Send {
    fn name(&self) -> &'static str;

    fn horizon(&self) -> usize;

    /// Odds for the next round. `prev_bet` carries the gambler's bet from the
    /// previous round and is `None` on the first call.
    fn next_odds(&mut self, prev_bet: Option<BetPoint>) -> Result<OddsPoint>;

    /// Independent copy at the current state, used to branch searches.
    fn boxed_clone(&self) -> Box<dyn HouseStrategy>;
}

impl Clone for Box<dyn HouseStrategy> {
    fn clone(&self) -> Self {
        self.boxed_clone()
    }
}

/// What the gambler sees before placing its bet in a round.
#[derive(Clone, Copy, Debug)]
pub struct RoundView {
    /// 1-based round index.
    pub round: usize,
    pub horizon: usize,
    pub odds: OddsPoint,
    pub accumulated: LossVector,
    pub overround: f64,
}

impl RoundView {
    pub fn is_last(&self) -> bool {
        self.round == self.horizon
    }
}

pub trait GamblerStrategy {
    fn next_bet(&mut self, view: &RoundView) -> Result<BetPoint>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Round {
    pub odds: OddsPoint,
    pub bet: BetPoint,
}

/// Full record of a game.
#[derive(Clone, Debug, PartialEq)]
pub struct Transcript {
    config: GameConfig,
    rounds: Vec<Round>,
    accumulated: LossVector,
}

impl Transcript {
    pub fn new(config: GameConfig) -> Self {
        Self {
            config,
            rounds: Vec::with_capacity(config.horizon),
            accumulated: LossVector::ZERO,
        }
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    pub fn accumulated(&self) -> LossVector {
        self.accumulated
    }

    pub fn is_complete(&self) -> bool {
        self.rounds.len() == self.config.horizon
    }

    pub fn push(&mut self, odds: OddsPoint, bet: BetPoint) -> Result<()> {
        if self.is_complete() {
            return Err(domain("transcript already holds every round"));
        }
        self.accumulated = self.accumulated.add(&round_loss(odds, bet));
        self.rounds.push(Round { odds, bet });
        Ok(())
    }

    /// Left-to-right sum of the per-round losses.
    pub fn recompute_accumulated(&self) -> LossVector {
        self.rounds
            .iter()
            .fold(LossVector::ZERO, |acc, r| acc.add(&round_loss(r.odds, r.bet)))
    }

    pub fn bets(&self) -> Vec<BetPoint> {
        self.rounds.iter().map(|r| r.bet).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let rec = TranscriptRecord {
            horizon: self.config.horizon,
            gamma: self.config.overround,
            rounds: self.rounds.iter().map(|r| [r.odds.value(), r.bet.value()]).collect(),
            loss: [self.accumulated.l0, self.accumulated.l1],
        };
        Ok(serde_json::to_string(&rec)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: TranscriptRecord = serde_json::from_str(s)?;
        let config = GameConfig::new(rec.horizon, rec.gamma)?;
        if rec.rounds.len() > config.horizon {
            return Err(domain(format!(
                "{} rounds recorded for horizon {}",
                rec.rounds.len(),
                config.horizon
            )));
        }
        let mut t = Transcript::new(config);
        for [r, q] in rec.rounds {
            t.push(OddsPoint::new(r)?, BetPoint::new(q)?)?;
        }
        let [l0, l1] = rec.loss;
        let scale = 1.0f64.max(l0.abs()).max(l1.abs());
        if (t.accumulated.l0 - l0).abs() > 1e-9 * scale || (t.accumulated.l1 - l1).abs() > 1e-9 * scale {
            return Err(domain(format!(
                "stored loss ({l0}, {l1}) does not match the recorded rounds ({}, {})",
                t.accumulated.l0, t.accumulated.l1
            )));
        }
        Ok(t)
    }

    pub const CSV_HEADER: &'static str = "t,r,q,l0_cum,l1_cum";

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        let mut acc = LossVector::ZERO;
        for (i, r) in self.rounds.iter().enumerate() {
            acc = acc.add(&round_loss(r.odds, r.bet));
            writeln!(out, "{},{},{},{},{}", i + 1, r.odds, r.bet.value(), acc.l0, acc.l1)?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TranscriptRecord {
    #[serde(rename = "T")]
    horizon: usize,
    gamma: f64,
    rounds: Vec<[f64; 2]>,
    loss: [f64; 2],
}

fn protocol(round: usize, err: Error) -> Error {
    match err {
        Error::Aborted(_) | Error::Io(_) | Error::Protocol { .. } => err,
        other => Error::Protocol {
            round,
            reason: other.to_string(),
        },
    }
}

/// Plays `config.horizon()` rounds. The house sees only past bets; the gambler
/// sees the current odds and the running exposure.
pub fn play_game(
    house: &mut dyn HouseStrategy,
    gambler: &mut dyn GamblerStrategy,
    config: GameConfig,
) -> Result<Transcript> {
    if house.horizon() != config.horizon {
        return Err(domain(format!(
            "house strategy built for horizon {}, game has {}",
            house.horizon(),
            config.horizon
        )));
    }
    let mut transcript = Transcript::new(config);
    let mut prev = None;
    for round in 1..=config.horizon {
        let odds = house.next_odds(prev).map_err(|e| protocol(round, e))?;
        let view = RoundView {
            round,
            horizon: config.horizon,
            odds,
            accumulated: transcript.accumulated,
            overround: config.overround,
        };
        let bet = gambler.next_bet(&view).map_err(|e| protocol(round, e))?;
        transcript.push(odds, bet)?;
        prev = Some(bet);
    }
    Ok(transcript)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn odds(r: f64) -> OddsPoint {
        OddsPoint::new(r).unwrap()
    }

    fn bet(q: f64) -> BetPoint {
        BetPoint::new(q).unwrap()
    }

    #[test]
    fn round_loss_examples() {
        assert_eq!(round_loss(odds(0.5), bet(1.0)), LossVector::new(0.0, 2.0));
        assert_eq!(round_loss(odds(0.5), bet(0.5)), LossVector::new(1.0, 1.0));
        let l = round_loss(odds(0.25), bet(0.0));
        assert!((l.l0 - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(l.l1, 0.0);
    }

    #[test]
    fn endpoint_odds_rejected() {
        assert!(OddsPoint::new(0.0).is_err());
        assert!(OddsPoint::new(1.0).is_err());
        assert!(OddsPoint::new(f64::NAN).is_err());
        assert!(BetPoint::new(1.5).is_err());
        assert!(BetPoint::new(-0.0).is_ok());
    }

    #[test]
    fn game_loss_is_max_of_components() {
        let cfg = GameConfig::fair(1).unwrap();
        let mut t = Transcript::new(cfg);
        assert!(matches!(game_loss(&t), Err(Error::IncompleteTranscript { .. })));
        t.push(odds(0.5), bet(1.0)).unwrap();
        assert_eq!(game_loss(&t).unwrap(), 2.0);
        assert!(t.push(odds(0.5), bet(1.0)).is_err());
    }

    #[test]
    fn house_gain_examples() {
        let t = 9usize;
        let tf = t as f64;
        let cfg = GameConfig::new(t, 1.0 + 1.0 / tf.sqrt()).unwrap();
        assert!(house_gain(tf + tf.sqrt(), &cfg).unwrap().abs() < 1e-12);
        let cfg = GameConfig::new(4, 2.0).unwrap();
        assert_eq!(house_gain(6.0, &cfg).unwrap(), 1.0);
        let cfg = GameConfig::new(100, 1.0).unwrap();
        assert!((house_gain(110.0, &cfg).unwrap() + 10.0).abs() < 1e-12);
        assert!(house_gain(-1.0, &cfg).is_err());
        for gamma in [1.0, 1.3, 7.0] {
            let cfg = GameConfig::new(17, gamma).unwrap();
            assert!(house_gain(17.0 * gamma, &cfg).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        assert!(GameConfig::new(0, 1.0).is_err());
        assert!(GameConfig::new(3, 0.99).is_err());
        assert!(GameConfig::new(3, f64::NAN).is_err());
    }

    struct Constant(f64);
    impl GamblerStrategy for Constant {
        fn next_bet(&mut self, _: &RoundView) -> Result<BetPoint> {
            BetPoint::new(self.0)
        }
    }

    #[derive(Clone)]
    struct Even(usize);
    impl HouseStrategy for Even {
        fn name(&self) -> &'static str {
            "even"
        }
        fn horizon(&self) -> usize {
            self.0
        }
        fn next_odds(&mut self, _: Option<BetPoint>) -> Result<OddsPoint> {
            Ok(OddsPoint::EVEN)
        }
        fn boxed_clone(&self) -> Box<dyn HouseStrategy> {
            Box::new(self.clone())
        }
    }

    #[test]
    fn uniform_vs_all_ones() {
        let cfg = GameConfig::fair(3).unwrap();
        let t = play_game(&mut Even(3), &mut Constant(1.0), cfg).unwrap();
        assert_eq!(t.accumulated(), LossVector::new(0.0, 6.0));
        assert_eq!(game_loss(&t).unwrap(), 6.0);
    }

    #[test]
    fn gambler_domain_error_names_round() {
        let cfg = GameConfig::fair(3).unwrap();
        let err = play_game(&mut Even(3), &mut Constant(2.0), cfg).unwrap_err();
        assert!(matches!(err, Error::Protocol { round: 1, .. }), "{err}");
    }

    #[test]
    fn json_and_csv_formats() {
        let cfg = GameConfig::new(2, 1.5).unwrap();
        let mut t = Transcript::new(cfg);
        t.push(odds(0.5), bet(1.0)).unwrap();
        t.push(odds(0.25), bet(0.0)).unwrap();
        let json = t.to_json().unwrap();
        assert!(json.starts_with(r#"{"T":2,"gamma":1.5,"rounds":[[0.5,1.0],[0.25,0.0]],"loss":["#));
        assert_eq!(Transcript::from_json(&json).unwrap(), t);

        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let csv = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,r,q,l0_cum,l1_cum");
        assert_eq!(lines[1], "1,0.5,1,0,2");
        assert!(lines[2].starts_with("2,0.25,0,1.333"));
    }

    #[test]
    fn json_rejects_inconsistent_loss() {
        let bad = r#"{"T":1,"gamma":1.0,"rounds":[[0.5,1.0]],"loss":[0.0,3.0]}"#;
        assert!(Transcript::from_json(bad).is_err());
        let too_long = r#"{"T":1,"gamma":1.0,"rounds":[[0.5,1.0],[0.5,1.0]],"loss":[0.0,4.0]}"#;
        assert!(Transcript::from_json(too_long).is_err());
    }
}
