//! Lefschetz traces, Alexander polynomial candidates, the Rykken bound,
//! twist-coefficient intervals and braid word statistics.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::IntPoly;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArithError {
    #[error("unsupported genus {0}")]
    UnsupportedGenus(u32),
    #[error("real edge count {0} is below the homology rank {1}")]
    Rank(i64, i64),
    #[error("bad interval: {0}")]
    Interval(String),
    #[error("bad braid word: {0}")]
    Braid(String),
}

/// `2 − Σ indices`.
pub fn lefschetz_trace(indices: &[i64]) -> i64 {
    2 - indices.iter().sum::<i64>()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlexanderCandidates {
    pub candidates: Vec<IntPoly>,
    /// Candidates with a real root above 1, i.e. an orientable dilatation.
    pub selected: Vec<IntPoly>,
}

/// Monic palindromic quartics with `t³` coefficient `−trace` and `Δ(1) = ±1`.
pub fn alexander_candidates(trace: i64, genus: u32) -> Result<AlexanderCandidates, ArithError> {
    if genus != 2 {
        return Err(ArithError::UnsupportedGenus(genus));
    }
    let a = -trace;
    let mut candidates = Vec::new();
    for d1 in [1i64, -1] {
        // Δ(1) = 2 + 2a + b
        let b = d1 - 2 - 2 * a;
        candidates.push(IntPoly::from_high(vec![1, a, b, a, 1]));
    }
    candidates.sort_by_key(|p| std::cmp::Reverse(p.coeff(2)));
    let one = BigRational::one();
    let selected = candidates
        .iter()
        .filter(|p| {
            let sf = p.squarefree();
            let hi = sf.cauchy_bound() + BigRational::one();
            sf.count_roots(&one, &hi) > 0
        })
        .cloned()
        .collect();
    Ok(AlexanderCandidates { candidates, selected })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RykkenVerdict {
    Consistent,
    Contradiction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RykkenResult {
    pub bound: i64,
    pub verdict: RykkenVerdict,
}

pub fn rykken_check(hom_trace: i64, real_edges: i64, hom_rank: i64, matrix_trace: i64) -> Result<RykkenResult, ArithError> {
    if real_edges < hom_rank {
        return Err(ArithError::Rank(real_edges, hom_rank));
    }
    let bound = hom_trace - (real_edges - hom_rank);
    let verdict = if matrix_trace < bound {
        RykkenVerdict::Contradiction
    } else {
        RykkenVerdict::Consistent
    };
    Ok(RykkenResult { bound, verdict })
}

/// Interval of possible twist coefficients, with open or closed ends.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FdtcInterval {
    pub lo: BigRational,
    pub hi: BigRational,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

fn parse_rational(s: &str) -> Result<BigRational, ArithError> {
    let s = s.trim();
    let bad = || ArithError::Interval(format!("bad number {s}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((ip, fp)) = s.split_once('.') {
        let neg = ip.trim_start().starts_with('-');
        let digits = format!("{}{}", ip.trim_start_matches('-'), fp);
        let n: BigInt = digits.parse().map_err(|_| bad())?;
        let d = num_traits::pow(BigInt::from(10), fp.len());
        let r = BigRational::new(n, d);
        return Ok(if neg { -r } else { r });
    }
    Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?))
}

impl FdtcInterval {
    pub fn new(lo: BigRational, hi: BigRational, lo_closed: bool, hi_closed: bool) -> Result<Self, ArithError> {
        let empty = lo > hi || (lo == hi && !(lo_closed && hi_closed));
        if empty {
            return Err(ArithError::Interval("empty interval".into()));
        }
        Ok(FdtcInterval {
            lo,
            hi,
            lo_closed,
            hi_closed,
        })
    }

    /// Parse `(a,b]`, `[a,b]` and the like; bounds may be integers, decimals or fractions.
    pub fn parse(text: &str) -> Result<Self, ArithError> {
        let s = text.trim();
        let bad = || ArithError::Interval(format!("cannot parse {text}"));
        let lo_closed = match s.chars().next() {
            Some('[') => true,
            Some('(') => false,
            _ => return Err(bad()),
        };
        let hi_closed = match s.chars().last() {
            Some(']') => true,
            Some(')') => false,
            _ => return Err(bad()),
        };
        let inner = &s[1..s.len() - 1];
        let (a, b) = inner.split_once(',').ok_or_else(bad)?;
        FdtcInterval::new(parse_rational(a)?, parse_rational(b)?, lo_closed, hi_closed)
    }
}

impl fmt::Display for FdtcInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{},{}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

/// Integers `m` such that the shifted interval `c + m` meets `(−1, 1)`.
pub fn fdtc_filter(c: &FdtcInterval) -> Vec<i64> {
    // c + m meets the open interval iff −1 − hi < m < 1 − lo
    let one = BigRational::one();
    let lower = -&one - &c.hi;
    let upper = &one - &c.lo;
    let mut m = lower.floor() + &one;
    let mut out = Vec::new();
    while m < upper {
        out.push(m.to_integer().try_into().expect("twist exponent fits in i64"));
        m += &one;
    }
    out
}

/// A braid word on `strands` strands; generator `i` is `σ_|i|` with sign.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BraidWord {
    pub strands: u32,
    pub gens: Vec<i32>,
}

impl BraidWord {
    pub fn new(strands: u32, gens: Vec<i32>) -> Result<Self, ArithError> {
        for &g in &gens {
            if g == 0 || g.unsigned_abs() >= strands {
                return Err(ArithError::Braid(format!("generator {g} out of range")));
            }
        }
        Ok(BraidWord { strands, gens })
    }

    /// Tokens `s3`, `s3^-1`, `S3` (inverse) or signed integers.
    pub fn parse(strands: u32, text: &str) -> Result<Self, ArithError> {
        let mut gens = Vec::new();
        for tok in text.split(|c: char| c.is_whitespace() || c == ',' || c == '.').filter(|t| !t.is_empty()) {
            let bad = || ArithError::Braid(format!("bad token {tok}"));
            let g: i32 = if let Some(rest) = tok.strip_prefix('s') {
                match rest.split_once('^') {
                    Some((i, "-1")) => -i.parse::<i32>().map_err(|_| bad())?,
                    Some((i, "1")) => i.parse().map_err(|_| bad())?,
                    Some(_) => return Err(bad()),
                    None => rest.parse().map_err(|_| bad())?,
                }
            } else if let Some(rest) = tok.strip_prefix('S') {
                -rest.parse::<i32>().map_err(|_| bad())?
            } else {
                tok.parse().map_err(|_| bad())?
            };
            gens.push(g);
        }
        BraidWord::new(strands, gens)
    }

    pub fn inverse(&self) -> BraidWord {
        BraidWord {
            strands: self.strands,
            gens: self.gens.iter().rev().map(|g| -g).collect(),
        }
    }

    /// `Δ^{2m}` as the word `((σ₁⋯σ_{n−1})ⁿ)^m`.
    pub fn full_twist(strands: u32, m: i32) -> BraidWord {
        let n = strands as i32;
        let mut gens = Vec::new();
        for _ in 0..m.unsigned_abs() {
            for _ in 0..n {
                for i in 1..n {
                    gens.push(if m > 0 { i } else { -(n - i) });
                }
            }
        }
        BraidWord { strands, gens }
    }

    /// `Δ^{2m}·self`.
    pub fn with_twist(&self, m: i32) -> BraidWord {
        let mut w = BraidWord::full_twist(self.strands, m);
        w.gens.extend(&self.gens);
        w
    }
}

impl fmt::Display for BraidWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let toks: Vec<String> = self
            .gens
            .iter()
            .map(|&g| if g > 0 { format!("s{g}") } else { format!("s{}^-1", -g) })
            .collect();
        write!(f, "{}", toks.join(" "))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BraidStats {
    pub exponent_sum: i64,
    pub self_linking: i64,
}

pub fn braid_stats(w: &BraidWord) -> BraidStats {
    let e: i64 = w.gens.iter().map(|g| g.signum() as i64).sum();
    BraidStats {
        exponent_sum: e,
        self_linking: e - w.strands as i64,
    }
}

/// Exponent sum of `Δ^{2m}` on `n` strands.
pub fn full_twist_exponent(strands: u32, m: i64) -> i64 {
    let n = strands as i64;
    m * n * (n - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lefschetz() {
        assert_eq!(lefschetz_trace(&[1]), 1);
        assert_eq!(lefschetz_trace(&[-5]), 7);
        assert_eq!(lefschetz_trace(&[]), 2);
    }

    #[test]
    fn rykken() {
        let r = rykken_check(7, 8, 4, 0).unwrap();
        assert_eq!((r.bound, r.verdict), (3, RykkenVerdict::Contradiction));
        let r = rykken_check(1, 8, 4, 0).unwrap();
        assert_eq!((r.bound, r.verdict), (-3, RykkenVerdict::Consistent));
        let r = rykken_check(7, 8, 4, 3).unwrap();
        assert_eq!((r.bound, r.verdict), (3, RykkenVerdict::Consistent));
        assert!(rykken_check(7, 3, 4, 0).is_err());
    }

    #[test]
    fn intervals() {
        let f = |s: &str| fdtc_filter(&FdtcInterval::parse(s).unwrap());
        assert_eq!(f("(0,1]"), vec![-1, 0]);
        assert_eq!(f("(0,1)"), vec![-1, 0]);
        assert_eq!(f("[5,5]"), vec![-5]);
        assert_eq!(f("[-0.4,0.4]"), vec![-1, 0, 1]);
        assert!(FdtcInterval::parse("(1,1]").is_err());
    }

    #[test]
    fn braids() {
        let a = BraidWord::parse(5, "s1 s2 s3 s4 s1 s2").unwrap();
        assert_eq!(braid_stats(&a), BraidStats { exponent_sum: 6, self_linking: 1 });
        let b = a.inverse().with_twist(1);
        assert_eq!(braid_stats(&b).self_linking, 9);
        assert_eq!(full_twist_exponent(5, 1), 20);
        let empty = BraidWord::parse(4, "").unwrap();
        assert_eq!(braid_stats(&empty).self_linking, -4);
        assert!(BraidWord::parse(3, "s3").is_err());
    }
}
