//! Gambler strategies used to attack house strategies.

use std::io::{BufRead, Write};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Error, Result};
use crate::game::{
    round_loss, BetPoint, GamblerStrategy, HouseStrategy, LossVector, OddsPoint, Outcome, RoundView, Transcript,
};
use crate::strategies::HouseKind;

/// Horizon limit for exhaustive decisive search.
pub const MAX_EXHAUSTIVE_HORIZON: usize = 22;

// Relative margin a candidate must beat the incumbent by in exhaustive search,
// so that float noise between tied sequences keeps the lexicographic winner.
const TIE_MARGIN: f64 = 1e-12;

/// Bit whose counterfactual payout, added to its running exposure, is larger.
/// Ties go to 1.
pub fn greedy_decisive_step(r: OddsPoint, accumulated: LossVector) -> Outcome {
    let c0 = accumulated.l0 + 1.0 / (1.0 - r.value());
    let c1 = accumulated.l1 + 1.0 / r.value();
    if c0 > c1 {
        Outcome::Zero
    } else {
        Outcome::One
    }
}

/// In the last round a decisive gambler bets on the team whose final
/// exposure would be larger, whatever it planned.
pub fn final_round_rule(_candidate: Outcome, r: OddsPoint, accumulated: LossVector) -> Outcome {
    greedy_decisive_step(r, accumulated)
}

pub fn proportional_step(r: OddsPoint) -> BetPoint {
    BetPoint::new(r.value()).expect("odds are interior")
}

/// Searches all of `{0,1}^T` for the sequence maximising the house's loss.
///
/// `factory` must return a fresh house strategy; it is called once and the
/// strategy is then cloned at every branch of the bet tree, so shared prefixes
/// are evaluated once. Returns the lexicographically smallest maximiser.
pub fn exhaustive_worst_case(
    factory: &dyn Fn() -> Result<Box<dyn HouseStrategy>>,
    horizon: usize,
) -> Result<(Vec<Outcome>, f64)> {
    if horizon == 0 {
        return Err(domain("horizon must be at least 1"));
    }
    if horizon > MAX_EXHAUSTIVE_HORIZON {
        return Err(Error::Capacity(format!(
            "exhaustive search is limited to T <= {MAX_EXHAUSTIVE_HORIZON}, got {horizon}"
        )));
    }
    let mut house = factory()?;
    if house.horizon() != horizon {
        return Err(domain("house factory built a strategy for a different horizon"));
    }
    let first = house.next_odds(None)?;
    let mut search = Search {
        horizon,
        prefix: Vec::with_capacity(horizon),
        best: None,
    };
    search.walk(house, first, LossVector::ZERO)?;
    let (seq, loss) = search.best.expect("at least one sequence");
    Ok((seq, loss))
}

struct Search {
    horizon: usize,
    prefix: Vec<Outcome>,
    best: Option<(Vec<Outcome>, f64)>,
}

impl Search {
    fn walk(&mut self, house: Box<dyn HouseStrategy>, odds: OddsPoint, acc: LossVector) -> Result<()> {
        let mut house = Some(house);
        for bet in [Outcome::Zero, Outcome::One] {
            let acc = acc.add(&round_loss(odds, bet.as_bet()));
            self.prefix.push(bet);
            if self.prefix.len() == self.horizon {
                let loss = acc.max();
                let better = match &self.best {
                    None => true,
                    Some((_, b)) => loss > b + TIE_MARGIN * b.abs().max(1.0),
                };
                if better {
                    self.best = Some((self.prefix.clone(), loss));
                }
            } else {
                // the 1-branch is last, so it can take the original
                let mut h = match bet {
                    Outcome::Zero => house.as_ref().expect("house present").boxed_clone(),
                    Outcome::One => house.take().expect("house present"),
                };
                let next = h.next_odds(Some(bet.as_bet()))?;
                self.walk(h, next, acc)?;
            }
            self.prefix.pop();
        }
        Ok(())
    }
}

/// Replays fixed bets in order.
#[derive(Clone, Debug)]
pub struct SequenceGambler {
    bets: Vec<BetPoint>,
}

impl SequenceGambler {
    pub fn new(bets: Vec<BetPoint>) -> Self {
        Self { bets }
    }

    pub fn decisive(bits: &[Outcome]) -> Self {
        Self::new(bits.iter().map(|b| b.as_bet()).collect())
    }

    pub fn from_transcript(t: &Transcript) -> Self {
        Self::new(t.bets())
    }
}

impl GamblerStrategy for SequenceGambler {
    fn next_bet(&mut self, view: &RoundView) -> Result<BetPoint> {
        self.bets
            .get(view.round - 1)
            .copied()
            .ok_or_else(|| domain(format!("no bet recorded for round {}", view.round)))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct GreedyGambler;

impl GamblerStrategy for GreedyGambler {
    fn next_bet(&mut self, view: &RoundView) -> Result<BetPoint> {
        let bit = greedy_decisive_step(view.odds, view.accumulated);
        let bit = if view.is_last() {
            final_round_rule(bit, view.odds, view.accumulated)
        } else {
            bit
        };
        Ok(bit.as_bet())
    }
}

/// Bets the offered odds, `q_t = r_t`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ProportionalGambler;

impl GamblerStrategy for ProportionalGambler {
    fn next_bet(&mut self, view: &RoundView) -> Result<BetPoint> {
        Ok(proportional_step(view.odds))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantGambler(pub BetPoint);

impl GamblerStrategy for ConstantGambler {
    fn next_bet(&mut self, _view: &RoundView) -> Result<BetPoint> {
        Ok(self.0)
    }
}

/// Decisive bets `0, 1, 0, 1, …`.
#[derive(Clone, Copy, Debug, Default)]
pub struct AlternatingGambler;

impl GamblerStrategy for AlternatingGambler {
    fn next_bet(&mut self, view: &RoundView) -> Result<BetPoint> {
        Ok(Outcome::from_bit(view.round.is_multiple_of(2)).as_bet())
    }
}

/// Fair random decisive bits, with the final-round rule applied.
#[derive(Clone, Debug)]
pub struct RandomGambler {
    rng: ChaCha8Rng,
}

impl RandomGambler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl GamblerStrategy for RandomGambler {
    fn next_bet(&mut self, view: &RoundView) -> Result<BetPoint> {
        let bit = Outcome::from_bit(self.rng.gen::<bool>());
        let bit = if view.is_last() {
            final_round_rule(bit, view.odds, view.accumulated)
        } else {
            bit
        };
        Ok(bit.as_bet())
    }
}

/// Reads bets from a text stream, reporting the odds and payouts each round.
pub struct InteractiveGambler<R, W> {
    input: R,
    output: W,
}

impl<R: BufRead, W: Write> InteractiveGambler<R, W> {
    pub fn new(input: R, output: W) -> Self {
        Self { input, output }
    }

    pub fn into_inner(self) -> (R, W) {
        (self.input, self.output)
    }
}

/// Parses a bet typed by a user.
pub fn parse_bet(line: &str) -> Result<BetPoint> {
    let q: f64 = line
        .trim()
        .parse()
        .map_err(|_| domain(format!("not a number: {:?}", line.trim())))?;
    BetPoint::new(q)
}

impl<R: BufRead, W: Write> GamblerStrategy for InteractiveGambler<R, W> {
    fn next_bet(&mut self, view: &RoundView) -> Result<BetPoint> {
        writeln!(
            self.output,
            "round {}/{}: r = {:.6}  payout if 0 wins = {:.6}  payout if 1 wins = {:.6}  exposure = ({:.6}, {:.6})",
            view.round,
            view.horizon,
            view.odds.value(),
            view.odds.payout(Outcome::Zero, view.overround),
            view.odds.payout(Outcome::One, view.overround),
            view.accumulated.l0,
            view.accumulated.l1,
        )?;
        loop {
            write!(self.output, "fraction on team 1 (0..1)> ")?;
            self.output.flush()?;
            let mut line = String::new();
            if self.input.read_line(&mut line)? == 0 {
                return Err(Error::Aborted("end of input".into()));
            }
            match parse_bet(&line) {
                Ok(q) => return Ok(q),
                Err(e) => writeln!(self.output, "{e}; try again")?,
            }
        }
    }
}

/// Gambler selected by id: `exhaustive`, `greedy`, `proportional`,
/// `constant:<q>`, `random:<seed>`, `replay:<file>`, `alternating` or
/// `interactive`.
#[derive(Clone, Debug, PartialEq)]
pub enum GamblerKind {
    Exhaustive,
    Greedy,
    Proportional,
    Constant(BetPoint),
    Random(u64),
    Replay(PathBuf),
    Alternating,
    Interactive,
}

impl std::str::FromStr for GamblerKind {
    type Err = Error;

    fn from_str(id: &str) -> Result<Self> {
        let (head, arg) = match id.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (id, None),
        };
        let need = |what: &str| arg.ok_or_else(|| domain(format!("gambler {head:?} needs :<{what}>")));
        Ok(match head {
            "exhaustive" => GamblerKind::Exhaustive,
            "greedy" => GamblerKind::Greedy,
            "proportional" => GamblerKind::Proportional,
            "alternating" => GamblerKind::Alternating,
            "interactive" => GamblerKind::Interactive,
            "constant" => GamblerKind::Constant(parse_bet(need("q")?)?),
            "random" => GamblerKind::Random(
                need("seed")?
                    .parse()
                    .map_err(|_| domain(format!("bad seed in {id:?}")))?,
            ),
            "replay" => GamblerKind::Replay(PathBuf::from(need("file")?)),
            _ => return Err(domain(format!("unknown gambler {id:?}"))),
        })
    }
}

impl GamblerKind {
    /// Decisive gamblers, whose results are labelled as decisive-only searches.
    pub fn is_decisive(&self) -> bool {
        matches!(
            self,
            GamblerKind::Exhaustive | GamblerKind::Greedy | GamblerKind::Random(_) | GamblerKind::Alternating
        ) || matches!(self, GamblerKind::Constant(q) if q.decisive().is_some())
    }

    /// Builds the gambler for a game against `house`. The interactive gambler
    /// reads standard input.
    pub fn build(&self, house: &HouseKind, horizon: usize) -> Result<Box<dyn GamblerStrategy>> {
        Ok(match self {
            GamblerKind::Exhaustive => {
                let (seq, _) = exhaustive_worst_case(&|| house.build(horizon), horizon)?;
                Box::new(SequenceGambler::decisive(&seq))
            }
            GamblerKind::Greedy => Box::new(GreedyGambler),
            GamblerKind::Proportional => Box::new(ProportionalGambler),
            GamblerKind::Constant(q) => Box::new(ConstantGambler(*q)),
            GamblerKind::Random(seed) => Box::new(RandomGambler::new(*seed)),
            GamblerKind::Alternating => Box::new(AlternatingGambler),
            GamblerKind::Replay(path) => {
                let t = Transcript::from_json(&std::fs::read_to_string(path)?)?;
                Box::new(SequenceGambler::from_transcript(&t))
            }
            GamblerKind::Interactive => Box::new(InteractiveGambler::new(std::io::stdin().lock(), std::io::stdout())),
        })
    }
}
