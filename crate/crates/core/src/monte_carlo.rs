//! Monte Carlo approximation of the expected-skeleton strategy.
//!
//! `N` copies of the decisive state machine each follow their own Bernoulli
//! realisation of the gambler's continuous bets; the quoted odd is the mean of
//! the copies' odds. Cost is `O(N)` per round instead of `O(2^t)`.
//!
//! Copy `j` draws from ChaCha8 stream `j` of the configured seed, one uniform
//! per round, so results do not depend on evaluation order or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::game::{BetPoint, HouseStrategy, OddsPoint, Outcome};
use crate::strategies::DecisiveState;

// Copies per parallel work item; partial sums are combined in chunk order.
const CHUNK: usize = 1024;

/// `⌈ln(2T/δ) / (2ε²)⌉`: copies needed so that every round's odd is within
/// `ε` of the exact expectation with probability at least `1 - δ`.
pub fn required_samples(epsilon: f64, delta: f64, horizon: usize) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(domain(format!("epsilon must lie in (0, 1/2], got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    if horizon == 0 {
        return Err(domain("horizon must be at least 1"));
    }
    let n = ((2.0 * horizon as f64 / delta).ln() / (2.0 * epsilon * epsilon)).ceil();
    Ok((n as usize).max(1))
}

/// Union bound `min(1, 2T·exp(-2Nε²))` on some round deviating by `ε` or more.
pub fn deviation_probability_bound(n: usize, epsilon: f64, horizon: usize) -> Result<f64> {
    if n == 0 {
        return Err(domain("at least one copy is required"));
    }
    if !(epsilon > 0.0) {
        return Err(domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let p = 2.0 * horizon as f64 * (-2.0 * n as f64 * epsilon * epsilon).exp();
    Ok(p.min(1.0))
}

/// Worst-case loss `(1 + 2ε(T+√T))·(T+√T)` of the Monte Carlo house when every
/// round is within `ε` of the exact odds. Needs `ε ≤ 1/(2(T+√T))`.
pub fn loss_inflation_bound(epsilon: f64, horizon: usize) -> Result<f64> {
    if horizon == 0 {
        return Err(domain("horizon must be at least 1"));
    }
    let t = horizon as f64;
    let opt = t + t.sqrt();
    if !(epsilon >= 0.0 && epsilon <= 1.0 / (2.0 * opt)) {
        return Err(domain(format!(
            "epsilon must lie in [0, 1/(2(T+√T))] = [0, {}], got {epsilon}",
            1.0 / (2.0 * opt)
        )));
    }
    Ok((1.0 + 2.0 * epsilon * opt) * opt)
}

/// Copy count and seed. Either `n` or both `epsilon` and `delta` must be set.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MCConfig {
    pub n: Option<usize>,
    pub seed: u64,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    /// Pair copies `2k` and `2k+1` on one uniform `u` and its mirror `1-u`.
    /// Not the reference estimator; off by default.
    pub antithetic: bool,
}

impl MCConfig {
    pub fn with_copies(n: usize, seed: u64) -> Self {
        Self {
            n: Some(n),
            seed,
            ..Self::default()
        }
    }

    /// Number of copies for a game of the given horizon.
    pub fn resolve_copies(&self, horizon: usize) -> Result<usize> {
        let required = match (self.epsilon, self.delta) {
            (Some(e), Some(d)) => Some(required_samples(e, d, horizon)?),
            (None, None) => None,
            _ => return Err(domain("epsilon and delta must be given together")),
        };
        match (self.n, required) {
            (Some(0), _) => Err(domain("at least one copy is required")),
            (Some(n), Some(req)) if n < req => Err(domain(format!(
                "N = {n} is below the {req} copies required for the given epsilon and delta"
            ))),
            (Some(n), _) => Ok(n),
            (None, Some(req)) => Ok(req),
            (None, None) => Err(domain("set N or both epsilon and delta")),
        }
    }
}

#[derive(Clone, Debug)]
struct Copy {
    state: DecisiveState,
    rng: ChaCha8Rng,
    mirrored: bool,
}

/// `N` decisive states driven by Bernoulli samples of the bets.
#[derive(Clone, Debug)]
pub struct MCState {
    copies: Vec<Copy>,
    horizon: usize,
    t: usize,
    // every bet so far was decisive, so all copies hold the same state
    coherent: bool,
    updates: u64,
}

impl MCState {
    pub fn new(horizon: usize, n: usize, seed: u64) -> Result<Self> {
        Self::with_mode(horizon, n, seed, false)
    }

    pub fn with_mode(horizon: usize, n: usize, seed: u64, antithetic: bool) -> Result<Self> {
        if n == 0 {
            return Err(domain("at least one copy is required"));
        }
        let init = DecisiveState::init(horizon)?;
        let base = ChaCha8Rng::seed_from_u64(seed);
        let copies = (0..n)
            .map(|j| {
                let mut rng = base.clone();
                let stream = if antithetic { j / 2 } else { j };
                rng.set_stream(stream as u64);
                Copy {
                    state: init,
                    rng,
                    mirrored: antithetic && j % 2 == 1,
                }
            })
            .collect();
        Ok(Self {
            copies,
            horizon,
            t: 1,
            coherent: true,
            updates: 0,
        })
    }

    pub fn copies(&self) -> usize {
        self.copies.len()
    }

    /// Total number of single-copy state updates performed so far.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Feeds the bet of round `t` and returns the estimated odd of round `t+1`.
    pub fn next_odds(&mut self, q_prev: BetPoint) -> Result<OddsPoint> {
        if self.t >= self.horizon {
            return Err(domain(format!("all {} rounds already played", self.horizon)));
        }
        let q = q_prev.value();
        // (sum of the chunk's odds, odd of the chunk's first copy)
        let partials: Vec<Result<(f64, f64)>> = self
            .copies
            .par_chunks_mut(CHUNK)
            .map(|chunk| {
                let mut sum = 0.0;
                let mut first = f64::NAN;
                for (i, c) in chunk.iter_mut().enumerate() {
                    let u: f64 = c.rng.gen();
                    // P(X = 1) = q either way; q ∈ {0, 1} is never random
                    let one = if c.mirrored { u >= 1.0 - q } else { u < q };
                    let (next, r) = c.state.step(Outcome::from_bit(one))?;
                    c.state = next;
                    if i == 0 {
                        first = r.value();
                    }
                    sum += r.value();
                }
                Ok((sum, first))
            })
            .collect();
        let mut total = 0.0;
        let mut first = f64::NAN;
        for (i, p) in partials.into_iter().enumerate() {
            let (sum, r0) = p?;
            if i == 0 {
                first = r0;
            }
            total += sum;
        }
        self.t += 1;
        self.updates += self.copies.len() as u64;
        self.coherent &= q_prev.decisive().is_some();

        // identical copies: the mean is exactly their common value
        let r = if self.coherent {
            first
        } else {
            total / self.copies.len() as f64
        };
        OddsPoint::new(r).map_err(|_| Error::Invariant(format!("Monte Carlo odds {r} left (0, 1)")))
    }
}

/// House quoting the Monte Carlo estimate of the expected-skeleton odds.
#[derive(Clone, Debug)]
pub struct MonteCarloHouse {
    state: MCState,
    started: bool,
}

impl MonteCarloHouse {
    pub fn new(horizon: usize, config: &MCConfig) -> Result<Self> {
        let n = config.resolve_copies(horizon)?;
        Ok(Self {
            state: MCState::with_mode(horizon, n, config.seed, config.antithetic)?,
            started: false,
        })
    }

    pub fn state(&self) -> &MCState {
        &self.state
    }
}

impl HouseStrategy for MonteCarloHouse {
    fn name(&self) -> &'static str {
        "mc"
    }

    fn horizon(&self) -> usize {
        self.state.horizon
    }

    fn next_odds(&mut self, prev_bet: Option<BetPoint>) -> Result<OddsPoint> {
        match (self.started, prev_bet) {
            (false, None) => {
                self.started = true;
                Ok(OddsPoint::EVEN)
            }
            (true, Some(q)) => self.state.next_odds(q),
            _ => Err(domain("previous bet must be absent exactly on the first round")),
        }
    }

    fn boxed_clone(&self) -> Box<dyn HouseStrategy> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategies::{expected_skeleton_odds, optimal_odds_path};

    #[test]
    fn required_samples_examples() {
        assert_eq!(required_samples(0.01, 0.01, 100).unwrap(), 49518);
        // ⌈1250·ln 400⌉ = ⌈7489.33⌉
        assert_eq!(required_samples(0.02, 0.05, 10).unwrap(), 7490);
        // smallest reachable case still rounds up to a whole copy
        assert_eq!(required_samples(0.5, 0.999, 1).unwrap(), 2);
        assert!(required_samples(0.0, 0.1, 3).is_err());
        assert!(required_samples(0.6, 0.1, 3).is_err());
        assert!(required_samples(0.1, 1.0, 3).is_err());
    }

    #[test]
    fn deviation_bound_examples() {
        assert!(deviation_probability_bound(49518, 0.01, 100).unwrap() <= 0.01);
        let p = deviation_probability_bound(1, 1.0, 1).unwrap();
        assert!((p - 2.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert!((p - 0.2707).abs() < 1e-4);
        assert!(deviation_probability_bound(0, 0.1, 1).is_err());
        assert_eq!(deviation_probability_bound(1, 0.01, 10).unwrap(), 1.0);
    }

    #[test]
    fn loss_inflation_examples() {
        for t in [1usize, 4, 30] {
            let tf = t as f64;
            let opt = tf + tf.sqrt();
            assert_eq!(loss_inflation_bound(0.0, t).unwrap(), opt);
            let edge = 1.0 / (2.0 * opt);
            assert!((loss_inflation_bound(edge, t).unwrap() - 2.0 * opt).abs() < 1e-12);
            assert!(loss_inflation_bound(edge * 1.01, t).is_err());
        }
        assert!((loss_inflation_bound(0.05, 4).unwrap() - 9.6).abs() < 1e-12);
    }

    #[test]
    fn config_resolution() {
        assert_eq!(MCConfig::with_copies(5, 0).resolve_copies(3).unwrap(), 5);
        let c = MCConfig {
            n: None,
            seed: 1,
            epsilon: Some(0.02),
            delta: Some(0.05),
            antithetic: false,
        };
        assert_eq!(c.resolve_copies(10).unwrap(), 7490);
        let c = MCConfig { n: Some(10), ..c };
        assert!(c.resolve_copies(10).is_err());
        assert!(MCConfig::default().resolve_copies(3).is_err());
        assert!(MCConfig::with_copies(0, 0).resolve_copies(3).is_err());
    }

    #[test]
    fn decisive_bets_match_optimal_exactly() {
        let t = 12;
        let seq: Vec<Outcome> = (0..t - 1).map(|i| Outcome::from_bit((i * 7) % 3 == 1)).collect();
        let exact = optimal_odds_path(&seq, t).unwrap();
        for n in [1usize, 3, 1000, 2049] {
            let mut st = MCState::new(t, n, 99).unwrap();
            for (i, &b) in seq.iter().enumerate() {
                let r = st.next_odds(b.as_bet()).unwrap();
                assert_eq!(r, exact[i + 1], "N={n} round {}", i + 2);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let qs = [0.3, 0.9, 0.5, 0.1];
        let run = |seed| {
            let mut st = MCState::new(5, 3000, seed).unwrap();
            qs.iter()
                .map(|&q| st.next_odds(BetPoint::new(q).unwrap()).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(4), run(4));
        assert_ne!(run(4), run(5));
    }

    #[test]
    fn independent_of_thread_count() {
        let qs = [0.3, 0.9, 0.5];
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let mut st = MCState::new(4, 5000, 11).unwrap();
                qs.iter()
                    .map(|&q| st.next_odds(BetPoint::new(q).unwrap()).unwrap())
                    .collect::<Vec<_>>()
            })
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn converges_to_expected_skeleton() {
        let q = BetPoint::new(0.5).unwrap();
        let mut st = MCState::new(3, 200_000, 1).unwrap();
        let r = st.next_odds(q).unwrap().value();
        let exact = expected_skeleton_odds(&[q], 3).unwrap().value();
        assert!((exact - 0.5).abs() < 1e-15);
        assert!((r - exact).abs() < 5e-3, "{r}");
    }

    #[test]
    fn antithetic_mode_is_unbiased_and_decisive_exact() {
        let q = BetPoint::new(0.5).unwrap();
        let mut st = MCState::with_mode(3, 100_000, 8, true).unwrap();
        let r = st.next_odds(q).unwrap().value();
        assert!((r - 0.5).abs() < 5e-3, "{r}");

        let exact = optimal_odds_path(&[Outcome::One, Outcome::Zero], 4).unwrap();
        let mut st = MCState::with_mode(4, 7, 8, true).unwrap();
        assert_eq!(st.next_odds(Outcome::One.as_bet()).unwrap(), exact[1]);
        assert_eq!(st.next_odds(Outcome::Zero.as_bet()).unwrap(), exact[2]);
    }

    #[test]
    fn update_count_scales_with_copies() {
        let play = |n| {
            let mut st = MCState::new(6, n, 2).unwrap();
            for _ in 0..5 {
                st.next_odds(BetPoint::new(0.4).unwrap()).unwrap();
            }
            st.updates()
        };
        assert_eq!(play(500), 2500);
        assert_eq!(play(1000), 2 * play(500));
    }
}
