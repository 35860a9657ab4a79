//! Exact integer polynomials, Sturm sequences and real-root isolation.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Polynomial with integer coefficients, stored lowest degree first.
///
/// The zero polynomial has an empty coefficient list; otherwise the last
/// coefficient is nonzero.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct IntPoly {
    coeffs: Vec<BigInt>,
}

impl IntPoly {
    pub fn new<I: Into<BigInt>>(coeffs: Vec<I>) -> Self {
        let mut p = IntPoly {
            coeffs: coeffs.into_iter().map(Into::into).collect(),
        };
        p.trim();
        p
    }

    /// Build from coefficients listed highest degree first, as usually written.
    pub fn from_high<I: Into<BigInt>>(coeffs: Vec<I>) -> Self {
        let mut c: Vec<BigInt> = coeffs.into_iter().map(Into::into).collect();
        c.reverse();
        IntPoly::new(c)
    }

    pub fn zero() -> Self {
        IntPoly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        IntPoly::new(vec![1])
    }

    /// The monomial `t`.
    pub fn t() -> Self {
        IntPoly::new(vec![0, 1])
    }

    pub fn constant<I: Into<BigInt>>(c: I) -> Self {
        IntPoly::new(vec![c.into()])
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports `None`.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> BigInt {
        self.coeffs.get(i).cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn leading(&self) -> BigInt {
        self.coeffs.last().cloned().unwrap_or_else(BigInt::zero)
    }

    /// Coefficients as `i64`, highest degree first. Panics on overflow.
    pub fn to_i64_high(&self) -> Vec<i64> {
        self.coeffs
            .iter()
            .rev()
            .map(|c| c.to_i64().expect("coefficient exceeds i64"))
            .collect()
    }

    pub fn add(&self, other: &IntPoly) -> IntPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        IntPoly::new((0..n).map(|i| self.coeff(i) + other.coeff(i)).collect())
    }

    pub fn sub(&self, other: &IntPoly) -> IntPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        IntPoly::new((0..n).map(|i| self.coeff(i) - other.coeff(i)).collect())
    }

    pub fn mul(&self, other: &IntPoly) -> IntPoly {
        if self.is_zero() || other.is_zero() {
            return IntPoly::zero();
        }
        let mut out = vec![BigInt::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        IntPoly::new(out)
    }

    pub fn scale(&self, k: &BigInt) -> IntPoly {
        IntPoly::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn neg(&self) -> IntPoly {
        self.scale(&BigInt::from(-1))
    }

    pub fn derivative(&self) -> IntPoly {
        IntPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * BigInt::from(i))
                .collect(),
        )
    }

    /// Exact division; `None` when `divisor` does not divide `self` over the integers.
    pub fn div_exact(&self, divisor: &IntPoly) -> Option<IntPoly> {
        let (q, r) = div_rem_rational(&to_rat(self), &to_rat(divisor));
        if !r.is_empty() {
            return None;
        }
        if q.iter().any(|c| !c.is_integer()) {
            return None;
        }
        Some(IntPoly::new(q.into_iter().map(|c| c.to_integer()).collect()))
    }

    pub fn eval_i64(&self, x: i64) -> BigInt {
        let x = BigInt::from(x);
        self.coeffs
            .iter()
            .rev()
            .fold(BigInt::zero(), |acc, c| acc * &x + c)
    }

    pub fn eval_rational(&self, x: &BigRational) -> BigRational {
        self.coeffs.iter().rev().fold(BigRational::zero(), |acc, c| {
            acc * x + BigRational::from_integer(c.clone())
        })
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + c.to_f64().unwrap_or(f64::NAN))
    }

    /// Sign of the value at a rational point: -1, 0 or 1.
    pub fn sign_at(&self, x: &BigRational) -> i32 {
        sign_of(&self.eval_rational(x))
    }

    /// True when `p(t) = t^d p(1/t)`.
    pub fn is_palindromic(&self) -> bool {
        let c = &self.coeffs;
        let n = c.len();
        (0..n).all(|i| c[i] == c[n - 1 - i])
    }

    pub fn content(&self) -> BigInt {
        self.coeffs
            .iter()
            .fold(BigInt::zero(), |g, c| g.gcd(c))
    }

    /// Positive primitive part (content removed, leading coefficient positive).
    pub fn primitive(&self) -> IntPoly {
        if self.is_zero() {
            return IntPoly::zero();
        }
        let mut g = self.content();
        if self.leading().is_negative() {
            g = -g;
        }
        IntPoly::new(self.coeffs.iter().map(|c| c / &g).collect())
    }

    /// Greatest common divisor, primitive with positive leading coefficient.
    pub fn gcd(&self, other: &IntPoly) -> IntPoly {
        let mut a = to_rat(self);
        let mut b = to_rat(other);
        while !b.is_empty() {
            let (_, r) = div_rem_rational(&a, &b);
            a = b;
            b = r;
        }
        from_rat_primitive(&a)
    }

    /// Squarefree part `p / gcd(p, p')`.
    pub fn squarefree(&self) -> IntPoly {
        let g = self.gcd(&self.derivative());
        if g.degree().unwrap_or(0) == 0 {
            return self.primitive();
        }
        let (q, _) = div_rem_rational(&to_rat(self), &to_rat(&g));
        from_rat_primitive(&q)
    }

    /// Sturm sequence of the squarefree part, each term scaled by a positive constant.
    pub fn sturm_sequence(&self) -> Vec<IntPoly> {
        let p0 = self.squarefree();
        if p0.is_zero() {
            return Vec::new();
        }
        let mut seq = vec![p0.clone(), p0.derivative()];
        loop {
            let n = seq.len();
            if seq[n - 1].is_zero() {
                seq.pop();
                break;
            }
            let (_, r) = div_rem_rational(&to_rat(&seq[n - 2]), &to_rat(&seq[n - 1]));
            if r.is_empty() {
                break;
            }
            let r = from_rat_positive_scaled(&r);
            seq.push(r.neg());
        }
        seq
    }

    /// Number of distinct real roots in the half-open interval `(a, b]`.
    pub fn count_roots(&self, a: &BigRational, b: &BigRational) -> usize {
        let seq = self.sturm_sequence();
        let va = sign_changes(&seq, a);
        let vb = sign_changes(&seq, b);
        va.saturating_sub(vb)
    }

    /// Number of distinct real roots.
    pub fn count_real_roots(&self) -> usize {
        let bound = self.cauchy_bound();
        self.count_roots(&-bound.clone(), &bound)
    }

    /// A rational strictly greater than the absolute value of every root.
    pub fn cauchy_bound(&self) -> BigRational {
        let lc = self.leading().abs();
        let m = self
            .coeffs
            .iter()
            .take(self.coeffs.len().saturating_sub(1))
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(BigInt::zero);
        BigRational::new(m, lc) + BigRational::from_integer(BigInt::from(2))
    }

    /// Largest real root enclosed in an interval of width at most `tol`.
    pub fn largest_real_root(&self, tol: f64) -> Option<RootInterval> {
        let sq = self.squarefree();
        if sq.degree().unwrap_or(0) == 0 {
            return None;
        }
        let seq = sq.sturm_sequence();
        let hi = sq.cauchy_bound();
        let lo = -hi.clone();
        let total = sign_changes(&seq, &lo) - sign_changes(&seq, &hi);
        if total == 0 {
            return None;
        }
        // Shrink to an interval holding exactly the largest root.
        let mut a = lo;
        let mut b = hi;
        let two = BigRational::from_integer(BigInt::from(2));
        loop {
            let vb = sign_changes(&seq, &b);
            let va = sign_changes(&seq, &a);
            if va - vb == 1 {
                break;
            }
            let mid = (&a + &b) / &two;
            let vm = sign_changes(&seq, &mid);
            if vm - vb >= 1 {
                a = mid;
            } else {
                b = mid;
            }
        }
        Some(refine(&sq, a, b, tol))
    }

    /// All distinct real roots, each isolated to width at most `tol`, ascending.
    pub fn real_roots(&self, tol: f64) -> Vec<RootInterval> {
        let sq = self.squarefree();
        if sq.degree().unwrap_or(0) == 0 {
            return Vec::new();
        }
        let seq = sq.sturm_sequence();
        let hi = sq.cauchy_bound();
        let lo = -hi.clone();
        let mut out = Vec::new();
        isolate(&sq, &seq, lo, hi, tol, &mut out);
        out
    }
}

/// Closed interval `[lo, hi]` certified to contain exactly one root.
#[derive(Clone, Debug)]
pub struct RootInterval {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl RootInterval {
    pub fn mid_f64(&self) -> f64 {
        let two = BigRational::from_integer(BigInt::from(2));
        rat_to_f64(&((&self.lo + &self.hi) / two))
    }

    pub fn width_f64(&self) -> f64 {
        rat_to_f64(&(&self.hi - &self.lo))
    }
}

pub fn rat_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational from a finite `f64`.
pub fn rat_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

fn isolate(
    sq: &IntPoly,
    seq: &[IntPoly],
    a: BigRational,
    b: BigRational,
    tol: f64,
    out: &mut Vec<RootInterval>,
) {
    let n = sign_changes(seq, &a) - sign_changes(seq, &b);
    if n == 0 {
        return;
    }
    if n == 1 {
        out.push(refine(sq, a, b, tol));
        return;
    }
    let mid = (&a + &b) / BigRational::from_integer(BigInt::from(2));
    isolate(sq, seq, a, mid.clone(), tol, out);
    isolate(sq, seq, mid, b, tol, out);
}

/// Bisect `(a, b]`, known to contain exactly one simple root of `sq`.
fn refine(sq: &IntPoly, mut a: BigRational, mut b: BigRational, tol: f64) -> RootInterval {
    let two = BigRational::from_integer(BigInt::from(2));
    if sq.sign_at(&b) == 0 {
        return RootInterval { lo: b.clone(), hi: b };
    }
    let sb = sq.sign_at(&b);
    let tol_r = rat_from_f64(tol);
    while &b - &a > tol_r {
        let mid = (&a + &b) / &two;
        let sm = sq.sign_at(&mid);
        if sm == 0 {
            return RootInterval { lo: mid.clone(), hi: mid };
        }
        if sm == sb {
            b = mid;
        } else {
            a = mid;
        }
    }
    RootInterval { lo: a, hi: b }
}

fn sign_of(x: &BigRational) -> i32 {
    if x.is_zero() {
        0
    } else if x.is_positive() {
        1
    } else {
        -1
    }
}

fn sign_changes(seq: &[IntPoly], x: &BigRational) -> usize {
    let mut last = 0;
    let mut n = 0;
    for p in seq {
        let s = p.sign_at(x);
        if s == 0 {
            continue;
        }
        if last != 0 && s != last {
            n += 1;
        }
        last = s;
    }
    n
}

fn to_rat(p: &IntPoly) -> Vec<BigRational> {
    p.coeffs
        .iter()
        .map(|c| BigRational::from_integer(c.clone()))
        .collect()
}

fn trim_rat(v: &mut Vec<BigRational>) {
    while v.last().is_some_and(|c| c.is_zero()) {
        v.pop();
    }
}

fn div_rem_rational(a: &[BigRational], b: &[BigRational]) -> (Vec<BigRational>, Vec<BigRational>) {
    let mut r: Vec<BigRational> = a.to_vec();
    trim_rat(&mut r);
    let mut b = b.to_vec();
    trim_rat(&mut b);
    assert!(!b.is_empty(), "division by zero polynomial");
    if r.len() < b.len() {
        return (Vec::new(), r);
    }
    let mut q = vec![BigRational::zero(); r.len() - b.len() + 1];
    let lb = b.last().unwrap().clone();
    while r.len() >= b.len() && !r.is_empty() {
        let shift = r.len() - b.len();
        let f = r.last().unwrap() / &lb;
        for (i, c) in b.iter().enumerate() {
            r[i + shift] -= &f * c;
        }
        q[shift] = f;
        r.pop();
        trim_rat(&mut r);
    }
    (q, r)
}

/// Clear denominators with a positive factor and remove the positive content.
fn from_rat_positive_scaled(v: &[BigRational]) -> IntPoly {
    let l = v
        .iter()
        .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
    let ints: Vec<BigInt> = v.iter().map(|c| (c * BigRational::from_integer(l.clone())).to_integer()).collect();
    let p = IntPoly::new(ints);
    let g = p.content();
    if g.is_zero() {
        return p;
    }
    IntPoly::new(p.coeffs.iter().map(|c| c / &g).collect())
}

fn from_rat_primitive(v: &[BigRational]) -> IntPoly {
    from_rat_positive_scaled(v).primitive()
}

impl fmt::Display for IntPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            first = false;
            let show_mag = !mag.is_one() || i == 0;
            if show_mag {
                write!(f, "{mag}")?;
            }
            match i {
                0 => {}
                1 => write!(f, "t")?,
                _ => write!(f, "t^{i}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn display_reads_naturally() {
        let p = IntPoly::from_high(vec![1, -1, -1, -1, 1]);
        assert_eq!(p.to_string(), "t^4 - t^3 - t^2 - t + 1");
        assert_eq!(IntPoly::from_high(vec![-2, 0, 3]).to_string(), "-2t^2 + 3");
    }

    #[test]
    fn sturm_counts_known_roots() {
        // (t - 1)(t - 2)(t + 3)
        let p = IntPoly::new(vec![-1, 1])
            .mul(&IntPoly::new(vec![-2, 1]))
            .mul(&IntPoly::new(vec![3, 1]));
        assert_eq!(p.count_real_roots(), 3);
        assert_eq!(p.count_roots(&r(0, 1), &r(5, 2)), 2);
        assert_eq!(p.count_roots(&r(1, 1), &r(2, 1)), 1);
    }

    #[test]
    fn repeated_roots_are_counted_once() {
        let p = IntPoly::new(vec![-1, 1]).mul(&IntPoly::new(vec![-1, 1]));
        assert_eq!(p.count_real_roots(), 1);
        assert_eq!(p.squarefree(), IntPoly::new(vec![-1, 1]));
    }

    #[test]
    fn largest_root_of_golden_polynomial() {
        let p = IntPoly::from_high(vec![1, -1, -1]);
        let root = p.largest_real_root(1e-12).unwrap();
        assert!(root.width_f64() <= 1e-12);
        assert!((root.mid_f64() - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-11);
    }

    #[test]
    fn exact_division() {
        let a = IntPoly::new(vec![1, 1]);
        let b = IntPoly::from_high(vec![1, -1, -1, -1, 1]);
        let prod = a.mul(&b);
        assert_eq!(prod.div_exact(&a), Some(b));
        assert_eq!(IntPoly::new(vec![1, 2]).div_exact(&IntPoly::new(vec![0, 2])), None);
    }
}
