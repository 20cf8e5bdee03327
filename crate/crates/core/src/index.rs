//! Exact exponent arithmetic and the integer indices that decide which
//! twisted bundles contribute to the L^p obstruction.
//!
//! Every quantity here is an exact rational. The band formulas branch on whether
//! `2d/p` is an integer, so no floating point is allowed anywhere in this
//! module.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Exact rational used for every exponent and weight.
pub type Rational = Rational64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndexError {
    #[error("malformed exponent {0:?}: expected \"inf\", an integer, or a fraction a/b")]
    MalformedExponent(String),
    #[error("exponent {0} is below 1")]
    ExponentBelowOne(String),
    #[error("dimension d = {0} must be at least 2")]
    InvalidDimension(u32),
    #[error("form degree q = {q} must satisfy 1 <= q <= d = {d}")]
    InvalidDegree { q: u32, d: u32 },
}

/// A Lebesgue exponent `p` in `[1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Exponent {
    Finite(Rational),
    Infinite,
}

impl Exponent {
    pub fn finite(value: Rational) -> Result<Self, IndexError> {
        if value < Rational::one() {
            return Err(IndexError::ExponentBelowOne(value.to_string()));
        }
        Ok(Exponent::Finite(value))
    }

    pub fn integer(value: i64) -> Result<Self, IndexError> {
        Self::finite(Rational::from_integer(value))
    }

    pub fn ratio(numer: i64, denom: i64) -> Result<Self, IndexError> {
        if denom == 0 {
            return Err(IndexError::MalformedExponent(format!("{numer}/{denom}")));
        }
        Self::finite(Rational::new(numer, denom))
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Exponent::Finite(v) if v.is_one())
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Exponent::Infinite)
    }

    /// `1/p`, with `1/∞ = 0`.
    pub fn reciprocal(&self) -> Rational {
        match self {
            Exponent::Finite(v) => v.recip(),
            Exponent::Infinite => Rational::zero(),
        }
    }

    /// `k/p` for an integer numerator.
    pub fn divide(&self, numer: i64) -> Rational {
        self.reciprocal() * Rational::from_integer(numer)
    }

    /// Lossy conversion for the numerical modules. `∞` maps to `f64::INFINITY`.
    pub fn to_f64(&self) -> f64 {
        match self {
            Exponent::Finite(v) => *v.numer() as f64 / *v.denom() as f64,
            Exponent::Infinite => f64::INFINITY,
        }
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Exponent {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Exponent::Finite(a), Exponent::Finite(b)) => a.cmp(b),
            (Exponent::Finite(_), Exponent::Infinite) => Ordering::Less,
            (Exponent::Infinite, Exponent::Finite(_)) => Ordering::Greater,
            (Exponent::Infinite, Exponent::Infinite) => Ordering::Equal,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(v) => write!(f, "{v}"),
            Exponent::Infinite => f.write_str("inf"),
        }
    }
}

fn parse_integer(text: &str) -> Option<i64> {
    let digits = text.strip_prefix('-').unwrap_or(text);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    text.parse().ok()
}

/// Parses `"inf" | INT | INT "/" INT` without whitespace.
pub fn parse_exponent(text: &str) -> Result<Exponent, IndexError> {
    let malformed = || IndexError::MalformedExponent(text.to_string());
    if text == "inf" {
        return Ok(Exponent::Infinite);
    }
    let value = match text.split_once('/') {
        Some((n, d)) => {
            let numer = parse_integer(n).ok_or_else(malformed)?;
            let denom = parse_integer(d).ok_or_else(malformed)?;
            if denom == 0 {
                return Err(malformed());
            }
            Rational::new(numer, denom)
        }
        None => Rational::from_integer(parse_integer(text).ok_or_else(malformed)?),
    };
    if value < Rational::one() {
        return Err(IndexError::ExponentBelowOne(text.to_string()));
    }
    Ok(Exponent::Finite(value))
}

impl FromStr for Exponent {
    type Err = IndexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_exponent(s)
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_exponent(&text).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn check_degree(q: u32, d: u32) -> Result<(), IndexError> {
    if d < 2 {
        return Err(IndexError::InvalidDimension(d));
    }
    if q == 0 || q > d {
        return Err(IndexError::InvalidDegree { q, d });
    }
    Ok(())
}

/// `max{k ∈ Z : k < x}`.
pub fn max_integer_below(x: Rational) -> i64 {
    if x.is_integer() {
        x.to_integer() - 1
    } else {
        x.floor().to_integer()
    }
}

/// `max{k ∈ Z : k <= x}`.
pub fn max_integer_at_most(x: Rational) -> i64 {
    x.floor().to_integer()
}

/// The common threshold `1 + q - 2d/p`.
pub fn index_threshold(p: Exponent, q: u32, d: u32) -> Result<Rational, IndexError> {
    check_degree(q, d)?;
    Ok(Rational::from_integer(1 + q as i64) - p.divide(2 * d as i64))
}

/// Sufficient-condition index: the lowest twist that can carry an obstruction.
pub fn a_index(p: Exponent, q: u32, d: u32) -> Result<i64, IndexError> {
    let threshold = index_threshold(p, q, d)?;
    Ok(if p.is_one() {
        max_integer_at_most(threshold)
    } else {
        max_integer_below(threshold)
    })
}

/// Necessary-condition index: every twist from here on injects.
pub fn c_index(p: Exponent, q: u32, d: u32) -> Result<i64, IndexError> {
    Ok(max_integer_at_most(index_threshold(p, q, d)?))
}

/// The dbar-weight `k(p, s)`: the largest `m` with
/// `|z|^s L^p_loc ⊂ |z|^m L^1_loc` in one complex variable.
pub fn dbar_weight(p: Exponent, s: Rational) -> i64 {
    let threshold = Rational::from_integer(2) + s - p.divide(2);
    if p.is_one() {
        max_integer_at_most(threshold)
    } else {
        max_integer_below(threshold)
    }
}

/// Weight exponent `s = (q - 1) - (2d - 2)/p` carried by a pulled-back `(0,q)`-form.
pub fn pullback_exponent(p: Exponent, q: u32, d: u32) -> Result<Rational, IndexError> {
    check_degree(q, d)?;
    Ok(Rational::from_integer(q as i64 - 1) - p.divide(2 * d as i64 - 2))
}

/// Exponent `w(P)` of the removable-hyperplane extension condition.
pub fn w_exponent(p: Exponent) -> Rational {
    match p {
        Exponent::Finite(v) if v <= Rational::from_integer(2) => {
            Rational::from_integer(2) / v - Rational::one()
        }
        _ => Rational::zero(),
    }
}

/// Hölder conjugate `P/(P-1)` with `1 ↔ ∞`.
pub fn holder_conjugate(p: Exponent) -> Exponent {
    match p {
        Exponent::Infinite => Exponent::Finite(Rational::one()),
        Exponent::Finite(v) if v.is_one() => Exponent::Infinite,
        Exponent::Finite(v) => Exponent::Finite(v / (v - Rational::one())),
    }
}

/// Admissible shifts `ν ∈ (0, max]` (or `(0, max)` when `max_inclusive` is false)
/// for which `k(p, s + ν)` equals the necessary index `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NuInterval {
    pub max: Rational,
    pub max_inclusive: bool,
}

impl NuInterval {
    pub fn contains(&self, nu: Rational) -> bool {
        nu > Rational::zero()
            && if self.max_inclusive {
                nu <= self.max
            } else {
                nu < self.max
            }
    }

    /// Default representative `max/2`.
    pub fn midpoint(&self) -> Rational {
        self.max / Rational::from_integer(2)
    }
}

pub fn nu_interval(p: Exponent, q: u32, d: u32) -> Result<NuInterval, IndexError> {
    let threshold = index_threshold(p, q, d)?;
    Ok(if threshold.is_integer() {
        NuInterval {
            max: Rational::one(),
            max_inclusive: false,
        }
    } else {
        // At p = 1 the non-strict branch makes the right endpoint itself jump.
        NuInterval {
            max: threshold.ceil() - threshold,
            max_inclusive: !p.is_one(),
        }
    })
}

/// Exponents `p ∈ [1, ∞)` where `2d/p` is an integer, ascending. These are
/// exactly the points where `a` or `c` jump; the values do not depend on `q`.
pub fn breakpoints(q: u32, d: u32) -> Result<Vec<Rational>, IndexError> {
    check_degree(q, d)?;
    let two_d = 2 * d as i64;
    let mut points: Vec<Rational> = (1..=two_d)
        .map(|m| Rational::new(two_d, m))
        .collect();
    points.sort();
    points.dedup();
    Ok(points)
}

/// All derived indices for one `(p, q, d)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexBundle {
    pub p: Exponent,
    pub q: u32,
    pub d: u32,
    pub a: i64,
    pub c: i64,
    pub s: Rational,
    pub k_of_s: i64,
    pub w: Rational,
    pub nu: NuInterval,
    pub breakpoints: Vec<Rational>,
}

impl IndexBundle {
    pub fn new(p: Exponent, q: u32, d: u32) -> Result<Self, IndexError> {
        let s = pullback_exponent(p, q, d)?;
        Ok(IndexBundle {
            p,
            q,
            d,
            a: a_index(p, q, d)?,
            c: c_index(p, q, d)?,
            s,
            k_of_s: dbar_weight(p, s),
            w: w_exponent(p),
            nu: nu_interval(p, q, d)?,
            breakpoints: breakpoints(q, d)?,
        })
    }

    /// `t = s + ν` for the default `ν`.
    pub fn shifted_exponent(&self) -> Rational {
        self.s + self.nu.midpoint()
    }
}

#[derive(Serialize)]
struct IndexBundleRendering<'a> {
    p: String,
    q: String,
    dim: String,
    a: String,
    c: String,
    s: String,
    k_of_s: String,
    w: String,
    nu_max: String,
    nu_max_inclusive: bool,
    breakpoints: &'a [String],
}

impl Serialize for IndexBundle {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let breakpoints: Vec<String> = self.breakpoints.iter().map(|b| b.to_string()).collect();
        IndexBundleRendering {
            p: self.p.to_string(),
            q: self.q.to_string(),
            dim: self.d.to_string(),
            a: self.a.to_string(),
            c: self.c.to_string(),
            s: self.s.to_string(),
            k_of_s: self.k_of_s.to_string(),
            w: self.w.to_string(),
            nu_max: self.nu.max.to_string(),
            nu_max_inclusive: self.nu.max_inclusive,
            breakpoints: &breakpoints,
        }
        .serialize(serializer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str) -> Exponent {
        text.parse().unwrap()
    }

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn parses_the_exponent_grammar() {
        assert_eq!(p("4/3"), Exponent::Finite(r(4, 3)));
        assert_eq!(p("inf"), Exponent::Infinite);
        assert_eq!(p("2"), Exponent::Finite(r(2, 1)));
        assert!(matches!(
            parse_exponent("0.5"),
            Err(IndexError::MalformedExponent(_))
        ));
        assert!(matches!(
            parse_exponent("1/2"),
            Err(IndexError::ExponentBelowOne(_))
        ));
        for bad in ["", " 2", "2 ", "4/", "/3", "4/0", "+2", "Inf", "4//3", "1e3"] {
            assert!(parse_exponent(bad).is_err(), "{bad:?} should not parse");
        }
    }

    #[test]
    fn a_index_examples() {
        assert_eq!(a_index(p("2"), 1, 2).unwrap(), -1);
        assert_eq!(a_index(p("1"), 1, 2).unwrap(), -2);
        assert_eq!(a_index(p("4/3"), 1, 2).unwrap(), -2);
        assert_eq!(a_index(p("inf"), 1, 2).unwrap(), 1);
    }

    #[test]
    fn c_index_examples() {
        assert_eq!(c_index(p("2"), 1, 2).unwrap(), 0);
        assert_eq!(c_index(p("4/3"), 1, 2).unwrap(), -1);
        assert_eq!(c_index(p("inf"), 1, 2).unwrap(), 2);
    }

    #[test]
    fn dbar_weight_examples() {
        assert_eq!(dbar_weight(p("2"), r(0, 1)), 0);
        assert_eq!(dbar_weight(p("1"), r(3, 2)), 1);
        assert_eq!(dbar_weight(p("inf"), r(-1, 2)), 1);
    }

    #[test]
    fn pullback_exponent_examples() {
        assert_eq!(pullback_exponent(p("2"), 1, 2).unwrap(), r(-1, 1));
        assert_eq!(pullback_exponent(p("inf"), 1, 2).unwrap(), r(0, 1));
        assert_eq!(pullback_exponent(p("1"), 2, 3).unwrap(), r(-3, 1));
    }

    #[test]
    fn w_and_conjugate_examples() {
        assert_eq!(w_exponent(p("1")), r(1, 1));
        assert_eq!(w_exponent(p("2")), r(0, 1));
        assert_eq!(w_exponent(p("4/3")), r(1, 2));
        assert_eq!(w_exponent(p("inf")), r(0, 1));
        assert_eq!(holder_conjugate(p("2")), p("2"));
        assert_eq!(holder_conjugate(p("1")), Exponent::Infinite);
        assert_eq!(holder_conjugate(p("4/3")), p("4"));
        assert_eq!(holder_conjugate(Exponent::Infinite), p("1"));
    }

    #[test]
    fn nu_interval_examples() {
        assert_eq!(nu_interval(p("2"), 1, 2).unwrap().max, r(1, 1));
        assert_eq!(nu_interval(p("4/3"), 1, 2).unwrap().max, r(1, 1));
        let third = nu_interval(p("3"), 1, 2).unwrap();
        assert_eq!(third.max, r(1, 3));
        assert!(third.max_inclusive);
        assert!(!nu_interval(p("2"), 1, 2).unwrap().max_inclusive);
    }

    #[test]
    fn breakpoint_examples() {
        let q1d2 = vec![r(1, 1), r(4, 3), r(2, 1), r(4, 1)];
        assert_eq!(breakpoints(1, 2).unwrap(), q1d2);
        assert_eq!(breakpoints(2, 2).unwrap(), q1d2);
        assert_eq!(
            breakpoints(1, 3).unwrap(),
            vec![r(1, 1), r(6, 5), r(3, 2), r(2, 1), r(3, 1), r(6, 1)]
        );
    }

    #[test]
    fn rejects_degree_zero_and_small_dimension() {
        assert_eq!(
            a_index(p("2"), 0, 2),
            Err(IndexError::InvalidDegree { q: 0, d: 2 })
        );
        assert_eq!(a_index(p("2"), 3, 2), Err(IndexError::InvalidDegree { q: 3, d: 2 }));
        assert_eq!(c_index(p("2"), 1, 1), Err(IndexError::InvalidDimension(1)));
    }

    #[test]
    fn bundle_serializes_exact_strings() {
        let bundle = IndexBundle::new(p("4/3"), 1, 2).unwrap();
        let json = serde_json::to_value(&bundle).unwrap();
        assert_eq!(json["a"], "-2");
        assert_eq!(json["c"], "-1");
        assert_eq!(json["p"], "4/3");
        assert_eq!(json["s"], "-3/2");
        assert_eq!(json["breakpoints"][1], "4/3");
    }

    #[test]
    fn exponent_order_puts_infinity_last() {
        let mut xs = vec![Exponent::Infinite, p("4"), p("1"), p("4/3")];
        xs.sort();
        assert_eq!(xs, vec![p("1"), p("4/3"), p("4"), Exponent::Infinite]);
    }
}
