//! Bi-balanced binary trees.
//!
//! At remaining depth `d` the two coordinates of the individual value
//! function of a bi-balanced tree are linked by the involution
//!
//! ```text
//! f_d(x) = d (x - d + 1) / (x - d),      f_0 = 0
//! ```
//!
//! Given the root value, every node's value follows forward: a bet on team 0
//! keeps `V¹` and recomputes `V⁰ = f_d(V¹)`, a bet on team 1 keeps `V⁰`. The odd
//! at a node is `1 / (V¹ - V¹_{·1})` where `V¹_{·1}` is the team-1 value after a
//! hypothetical bet on team 1.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::game::{OddsPoint, Outcome};

/// Largest depth a [`BalancedTree`] is materialised for.
pub const MAX_MATERIALIZED_DEPTH: usize = 24;

/// Individual value function `(V⁰, V¹)`: future loss if team 0 (resp. 1) wins.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValuePair {
    pub v0: f64,
    pub v1: f64,
}

impl ValuePair {
    pub fn new(v0: f64, v1: f64) -> Self {
        Self { v0, v1 }
    }

    pub fn get(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::Zero => self.v0,
            Outcome::One => self.v1,
        }
    }
}

/// `f_d(x) = d (x - d + 1) / (x - d)`, with `f_0 ≡ 0`.
///
/// Requires `x > d` for `d >= 1`; the map is a decreasing involution there.
pub fn f_involution(depth: usize, x: f64) -> Result<f64> {
    if depth == 0 {
        return Ok(0.0);
    }
    let d = depth as f64;
    if !(x > d) || !x.is_finite() {
        return Err(domain(format!("f_{depth} is defined for x > {depth}, got {x}")));
    }
    Ok(d * (x - (d - 1.0)) / (x - d))
}

/// Value pair after one decisive bet, with `depth_after` rounds still to play.
pub fn advance_value(v: ValuePair, bet: Outcome, depth_after: usize) -> Result<ValuePair> {
    Ok(match bet {
        Outcome::Zero => ValuePair::new(f_involution(depth_after, v.v1)?, v.v1),
        Outcome::One => ValuePair::new(v.v0, f_involution(depth_after, v.v0)?),
    })
}

/// Odd at a node whose value is `v` with `depth_remaining` rounds left.
pub fn odds_from_value(v: ValuePair, depth_remaining: usize) -> Result<OddsPoint> {
    if depth_remaining == 0 {
        return Err(domain("no odds are quoted at a leaf"));
    }
    let hypothetical = f_involution(depth_remaining - 1, v.v0)?;
    let r = 1.0 / (v.v1 - hypothetical);
    OddsPoint::new(r).map_err(|_| Error::Infeasible {
        node: format!("value ({}, {}) at depth {depth_remaining}", v.v0, v.v1),
        reason: format!("odd {r} outside (0, 1)"),
    })
}

/// Symmetric root value of the optimal tree: the solution of `x = f_T(x)`
/// above `T`, i.e. `T + √T`.
pub fn root_fixed_point(horizon: usize) -> Result<f64> {
    if horizon == 0 {
        return Err(domain("horizon must be at least 1"));
    }
    let t = horizon as f64;
    Ok(t + t.sqrt())
}

/// Heap code of a bet prefix: `1` for the empty prefix, `2c + b` for the child.
fn prefix_code(prefix: &[Outcome]) -> usize {
    prefix.iter().fold(1usize, |c, b| 2 * c + b.index())
}

fn code_to_string(code: usize) -> String {
    let len = usize::BITS - 1 - code.leading_zeros();
    (0..len)
        .rev()
        .map(|i| if (code >> i) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Parses a bitstring such as `"010"` into a prefix.
pub fn parse_prefix(s: &str) -> Result<Vec<Outcome>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(Outcome::Zero),
            '1' => Ok(Outcome::One),
            other => Err(domain(format!("prefix characters must be 0 or 1, got {other:?}"))),
        })
        .collect()
}

/// A complete tree of odds over every decisive prefix shorter than `depth`.
#[derive(Clone, Debug, PartialEq)]
pub struct BalancedTree {
    depth: usize,
    x: f64,
    root_value: ValuePair,
    // indexed by prefix_code; slot 0 unused
    odds: Vec<f64>,
}

impl BalancedTree {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn root_value(&self) -> ValuePair {
        self.root_value
    }

    pub fn odds_at(&self, prefix: &[Outcome]) -> Option<OddsPoint> {
        if prefix.len() >= self.depth {
            return None;
        }
        Some(OddsPoint::new(self.odds[prefix_code(prefix)]).expect("stored odds are interior"))
    }

    pub fn odds_for(&self, bits: &str) -> Result<OddsPoint> {
        let prefix = parse_prefix(bits)?;
        self.odds_at(&prefix).ok_or_else(|| {
            domain(format!(
                "prefix {bits:?} is not an internal node of a depth-{} tree",
                self.depth
            ))
        })
    }

    /// Copy of the tree with the odd at `bits` shifted by `delta`.
    pub fn perturbed(&self, bits: &str, delta: f64) -> Result<Self> {
        let prefix = parse_prefix(bits)?;
        if prefix.len() >= self.depth {
            return Err(domain(format!("prefix {bits:?} is not an internal node")));
        }
        let code = prefix_code(&prefix);
        let r = OddsPoint::new(self.odds[code] + delta)?;
        let mut out = self.clone();
        out.odds[code] = r.value();
        Ok(out)
    }

    /// `{"depth": d, "x": x, "odds": {"<bitstring>": r}}`.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Export {
            depth: usize,
            x: f64,
            odds: BTreeMap<String, f64>,
        }
        let odds = (1..self.odds.len())
            .map(|code| (code_to_string(code), self.odds[code]))
            .collect();
        Ok(serde_json::to_string(&Export {
            depth: self.depth,
            x: self.x,
            odds,
        })?)
    }
}

/// Builds the bi-balanced tree of the given depth whose root value is
/// `(x, f_depth(x))`.
pub fn build_bibalanced_tree(depth: usize, x: f64) -> Result<BalancedTree> {
    if depth == 0 {
        return Err(domain("tree depth must be at least 1"));
    }
    if depth > MAX_MATERIALIZED_DEPTH {
        return Err(Error::Capacity(format!(
            "depth {depth} exceeds the materialisation limit {MAX_MATERIALIZED_DEPTH}; use verify_bibalanced_streaming"
        )));
    }
    if !(x >= (depth + 1) as f64) || !x.is_finite() {
        return Err(Error::Infeasible {
            node: "root".into(),
            reason: format!("x = {x} must be at least depth + 1 = {}", depth + 1),
        });
    }
    let root_value = ValuePair::new(x, f_involution(depth, x)?);
    let mut odds = vec![f64::NAN; 1 << depth];
    let mut stack = vec![(1usize, 0usize, root_value)];
    while let Some((code, len, v)) = stack.pop() {
        let remaining = depth - len;
        let r = odds_from_value(v, remaining).map_err(|e| name_node(e, code))?;
        odds[code] = r.value();
        if remaining > 1 {
            for bet in [Outcome::One, Outcome::Zero] {
                let child = advance_value(v, bet, remaining - 1).map_err(|e| name_node(e, code))?;
                stack.push((2 * code + bet.index(), len + 1, child));
            }
        }
    }
    Ok(BalancedTree {
        depth,
        x,
        root_value,
        odds,
    })
}

fn name_node(err: Error, code: usize) -> Error {
    let node = format!("prefix {:?}", code_to_string(code));
    match err {
        Error::Infeasible { reason, .. } => Error::Infeasible { node, reason },
        other => Error::Infeasible {
            node,
            reason: other.to_string(),
        },
    }
}

/// Outcome of exhaustively checking the bi-balance property.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BalanceReport {
    pub depth: usize,
    /// Team-0 loss shared by sequences ending in 0 (first one seen).
    pub value0: f64,
    /// Team-1 loss shared by sequences ending in 1 (first one seen).
    pub value1: f64,
    /// Max minus min of `V⁰` over sequences ending in 0.
    pub spread0: f64,
    /// Max minus min of `V¹` over sequences ending in 1.
    pub spread1: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Default comparison tolerance for values at depth `depth`: absolute 1e-9
/// up to depth 1000, relative beyond.
pub fn default_tolerance(depth: usize) -> f64 {
    if depth <= 1000 {
        1e-9
    } else {
        1e-9 * depth as f64
    }
}

#[derive(Default)]
struct Range {
    first: Option<f64>,
    lo: f64,
    hi: f64,
}

impl Range {
    fn push(&mut self, v: f64) {
        match self.first {
            None => {
                self.first = Some(v);
                self.lo = v;
                self.hi = v;
            }
            Some(_) => {
                self.lo = self.lo.min(v);
                self.hi = self.hi.max(v);
            }
        }
    }

    fn spread(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Walks all `2^depth` decisive sequences. `odds(code, len, value)` returns the
/// odd at an internal node and, optionally, the value pairs of its children,
/// which are handed back when those children are visited.
fn enumerate_balance<F>(depth: usize, tolerance: f64, mut odds: F) -> Result<BalanceReport>
where
    F: FnMut(usize, usize, Option<ValuePair>) -> Result<(f64, Option<[ValuePair; 2]>)>,
{
    let mut ends = [Range::default(), Range::default()];
    // explicit stack: (code, len, l0, l1, value-pair slot)
    let mut stack: Vec<(usize, usize, f64, f64, Option<ValuePair>)> = vec![(1, 0, 0.0, 0.0, None)];
    while let Some((code, len, l0, l1, vp)) = stack.pop() {
        let (r, children) = odds(code, len, vp)?;
        let pay0 = 1.0 / (1.0 - r);
        let pay1 = 1.0 / r;
        if len + 1 == depth {
            ends[0].push(l0 + pay0);
            ends[1].push(l1 + pay1);
        } else {
            let (c0, c1) = match children {
                Some([a, b]) => (Some(a), Some(b)),
                None => (None, None),
            };
            stack.push((2 * code + 1, len + 1, l0, l1 + pay1, c1));
            stack.push((2 * code, len + 1, l0 + pay0, l1, c0));
        }
    }
    let spread0 = ends[0].spread();
    let spread1 = ends[1].spread();
    Ok(BalanceReport {
        depth,
        value0: ends[0].first.unwrap_or(0.0),
        value1: ends[1].first.unwrap_or(0.0),
        spread0,
        spread1,
        tolerance,
        pass: spread0 <= tolerance && spread1 <= tolerance,
    })
}

/// Exhaustively checks that `V⁰` is constant over sequences ending in 0 and
/// `V¹` over sequences ending in 1.
pub fn verify_bibalanced(tree: &BalancedTree, tolerance: f64) -> BalanceReport {
    enumerate_balance(tree.depth, tolerance, |code, _, _| Ok((tree.odds[code], None)))
        .expect("materialised trees have interior odds")
}

/// Same check as [`verify_bibalanced`] for the tree rooted at `(x, f_depth(x))`,
/// generating odds on the fly instead of materialising the tree.
pub fn verify_bibalanced_streaming(depth: usize, x: f64, tolerance: f64) -> Result<BalanceReport> {
    if depth == 0 {
        return Err(domain("tree depth must be at least 1"));
    }
    let root = ValuePair::new(x, f_involution(depth, x)?);
    enumerate_balance(depth, tolerance, |_, len, vp| {
        let v = vp.unwrap_or(root);
        let remaining = depth - len;
        let r = odds_from_value(v, remaining)?.value();
        let children = if remaining > 1 {
            Some([
                advance_value(v, Outcome::Zero, remaining - 1)?,
                advance_value(v, Outcome::One, remaining - 1)?,
            ])
        } else {
            None
        };
        Ok((r, children))
    })
}
