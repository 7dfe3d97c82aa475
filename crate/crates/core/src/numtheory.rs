//! Exact rationals, Bezout pairs and Farey sequences.
//!
//! All comparisons here are exact. Floats enter only through
//! [`float_to_rational`] or [`Rational::from_f64`], which is exact as well
//! (every finite double is a dyadic rational).

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision rational, always reduced with a positive denominator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(BigRational);

impl Rational {
    pub fn new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Result<Self> {
        let den = den.into();
        if den.is_zero() {
            return Err(Error::Argument("zero denominator".into()));
        }
        Ok(Rational(BigRational::new(num.into(), den)))
    }

    pub fn integer(n: impl Into<BigInt>) -> Self {
        Rational(BigRational::from_integer(n.into()))
    }

    pub fn zero() -> Self {
        Self::integer(0)
    }

    pub fn one() -> Self {
        Self::integer(1)
    }

    /// The exact value of a finite double.
    pub fn from_f64(x: f64) -> Result<Self> {
        BigRational::from_float(x)
            .map(Rational)
            .ok_or_else(|| Error::Argument(format!("non-finite value {x}")))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn floor(&self) -> BigInt {
        self.0.floor().to_integer()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn recip(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::Argument("reciprocal of zero".into()));
        }
        Ok(Rational(self.0.recip()))
    }

    pub fn inner(&self) -> &BigRational {
        &self.0
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Parses `7/10`, `-3`, `0.7`, `1.5e-3` and `-2.25E2` exactly.
impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Argument(format!("cannot parse {s:?} as a rational"));
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            return Rational::new(n, d);
        }
        let (mantissa, exp) = match s.find(['e', 'E']) {
            Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
            None => (s, 0),
        };
        let (neg, body) = match mantissa.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        if int.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let digits: BigInt = format!("0{int}{frac}").parse().map_err(|_| bad())?;
        let scale = exp - frac.len() as i32;
        let ten = BigInt::from(10);
        let mut value = if scale >= 0 {
            Rational::integer(digits * num_traits::pow(ten, scale as usize))
        } else {
            Rational::new(digits, num_traits::pow(ten, (-scale) as usize))?
        };
        if neg {
            value = -value;
        }
        Ok(value)
    }
}

macro_rules! forward_binop {
    ($tr:ident, $m:ident) => {
        impl $tr for Rational {
            type Output = Rational;
            fn $m(self, rhs: Rational) -> Rational {
                Rational(self.0.$m(rhs.0))
            }
        }
        impl<'a> $tr<&'a Rational> for &'a Rational {
            type Output = Rational;
            fn $m(self, rhs: &'a Rational) -> Rational {
                Rational((&self.0).$m(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::integer(n)
    }
}

/// Canonical (dn1, dn2) with u dn1 + v dn2 = 1 and 0 <= dn1 < v
/// (so |dn2| < u as well whenever v > 1).
pub fn bezout(u: u64, v: u64) -> Result<(i64, i64)> {
    if u == 0 || v == 0 {
        return Err(Error::Argument(format!("bezout needs positive inputs, got ({u}, {v})")));
    }
    let (g, x, _) = extended_gcd(u as i128, v as i128);
    if g != 1 {
        return Err(Error::Argument(format!("{u} and {v} share the factor {g}")));
    }
    let (u, v) = (u as i128, v as i128);
    let dn1 = x.rem_euclid(v);
    let dn2 = (1 - u * dn1) / v;
    debug_assert_eq!(u * dn1 + v * dn2, 1);
    Ok((dn1 as i64, dn2 as i64))
}

/// (g, x, y) with a x + b y = g = gcd(a, b).
fn extended_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i128, 0i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    (r0, s0, t0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FareySequence {
    order: u64,
    elements: Vec<Rational>,
}

impl FareySequence {
    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn elements(&self) -> &[Rational] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// All reduced fractions in [0, 1] with denominator <= n, ascending, via the
/// next-term recurrence.
pub fn farey_sequence(n: u64) -> Result<FareySequence> {
    if n == 0 {
        return Err(Error::Argument("Farey order must be at least 1".into()));
    }
    let mut elements = Vec::new();
    for (p, q) in farey_pairs(n) {
        elements.push(Rational::new(p, q)?);
    }
    Ok(FareySequence { order: n, elements })
}

/// The Farey sequence as raw (numerator, denominator) pairs.
pub fn farey_pairs(n: u64) -> Vec<(u64, u64)> {
    let (mut a, mut b, mut c, mut d) = (0u64, 1u64, 1u64, n.max(1));
    let mut out = vec![(0, 1)];
    while c <= n {
        out.push((c, d));
        let k = (n + b) / d;
        (a, b, c, d) = (c, d, k * c - a, k * d - b);
    }
    out
}

/// Element of the order-n Farey sequence closest to `target` in [0, 1];
/// ties go to the smaller denominator.
pub fn nearest_farey(target: &Rational, n: u64) -> Result<Rational> {
    if n == 0 {
        return Err(Error::Argument("Farey order must be at least 1".into()));
    }
    if target.is_negative() || target > &Rational::one() {
        return Err(Error::Argument(format!("target {target} outside [0, 1]")));
    }
    if target.is_zero() || target == &Rational::one() {
        return Ok(target.clone());
    }
    // Stern-Brocot descent bounded by the order; lo < target < hi stay
    // Farey neighbours throughout.
    let nb = BigInt::from(n);
    let mut lo = (BigInt::zero(), BigInt::one());
    let mut hi = (BigInt::one(), BigInt::one());
    loop {
        match advance(&mut hi, &lo, target, &nb) {
            Descent::Exact(x) => return Ok(x),
            Descent::Capped => break,
            Descent::Moved => {}
        }
        match advance(&mut lo, &hi, target, &nb) {
            Descent::Exact(x) => return Ok(x),
            Descent::Capped => break,
            Descent::Moved => {}
        }
    }
    let lo = Rational::new(lo.0, lo.1)?;
    let hi = Rational::new(hi.0, hi.1)?;
    let dl = target - &lo;
    let dh = &hi - target;
    Ok(match dl.cmp(&dh) {
        Ordering::Less => lo,
        Ordering::Greater => hi,
        Ordering::Equal if lo.denom() <= hi.denom() => lo,
        Ordering::Equal => hi,
    })
}

enum Descent {
    Exact(Rational),
    Capped,
    Moved,
}

/// Replaces `moving` by moving + j * fixed for the largest j that keeps the
/// target strictly between the endpoints and the denominator within n.
fn advance(moving: &mut (BigInt, BigInt), fixed: &(BigInt, BigInt), target: &Rational, n: &BigInt) -> Descent {
    let (tn, td) = (target.numer(), target.denom());
    let num = (&moving.0 * td - tn * &moving.1).abs();
    let den = (&fixed.0 * td - tn * &fixed.1).abs();
    let (jt, rem) = num.div_rem(&den);
    let exact = rem.is_zero();
    let jn = (n - &moving.1).div_floor(&fixed.1);
    if exact && jt <= jn {
        let p = &moving.0 + &jt * &fixed.0;
        let q = &moving.1 + &jt * &fixed.1;
        return Descent::Exact(Rational::new(p, q).expect("positive denominator"));
    }
    let jmax = if exact { &jt - 1 } else { jt };
    let j = jmax.clone().min(jn.clone());
    moving.0 = &moving.0 + &j * &fixed.0;
    moving.1 = &moving.1 + &j * &fixed.1;
    if jn <= jmax {
        Descent::Capped
    } else {
        Descent::Moved
    }
}

/// Open interval center +- eps / (|y| v*), center removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub center: Rational,
    pub half_width: Rational,
}

impl Interval {
    pub fn half_width_f64(&self) -> f64 {
        self.half_width.to_f64()
    }

    pub fn lower(&self) -> Rational {
        &self.center - &self.half_width
    }

    pub fn upper(&self) -> Rational {
        &self.center + &self.half_width
    }

    pub fn contains(&self, x: &Rational) -> bool {
        x != &self.center && (x - &self.center).abs() < self.half_width
    }

    /// Whether the closed range [lo, hi] lies inside the punctured interval.
    pub fn contains_range(&self, lo: &Rational, hi: &Rational) -> bool {
        lo > &self.lower() && hi < &self.upper() && !(lo <= &self.center && &self.center <= hi)
    }
}

pub fn farey_interval(center: &Rational, epsilon: &Rational, y: &Rational) -> Result<Interval> {
    if !(epsilon > &Rational::zero()) {
        return Err(Error::Argument(format!("epsilon must be positive, got {epsilon}")));
    }
    if y.is_zero() {
        return Err(Error::Argument("y must be non-zero".into()));
    }
    let v = Rational::integer(center.denom().clone());
    let half_width = epsilon / &(&y.abs() * &v);
    Ok(Interval { center: center.clone(), half_width })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageViolation {
    pub left: Rational,
    pub right: Rational,
    /// Positive means the neighbouring intervals fail to overlap.
    pub gap: Rational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub order: u64,
    pub pairs_checked: usize,
    /// Smallest (eps/|y|)(1/v + 1/v') - 1/(v v') over adjacent pairs.
    pub min_overlap: Rational,
    pub violations: Vec<CoverageViolation>,
}

impl CoverageReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that neighbouring Farey intervals overlap for every adjacent pair
/// of the order-n sequence, with n = floor(|y| / eps) enforced.
pub fn verify_coverage(n: u64, epsilon: &Rational, y: &Rational) -> Result<CoverageReport> {
    if !(epsilon > &Rational::zero()) || y.is_zero() {
        return Err(Error::Argument("need epsilon > 0 and y != 0".into()));
    }
    let ratio = &y.abs() / epsilon;
    let expected = ratio.floor();
    if expected != BigInt::from(n) {
        return Err(Error::Argument(format!("order {n} does not match floor(|y|/eps) = {expected}")));
    }
    let w = epsilon / &y.abs();
    let pairs = farey_pairs(n);
    for win in pairs.windows(2) {
        let ((p, q), (pp, qq)) = (win[0], win[1]);
        if pp as u128 * q as u128 - p as u128 * qq as u128 != 1 || q + qq <= n {
            return Err(Error::Invariant(format!("{p}/{q}, {pp}/{qq} are not Farey neighbours")));
        }
    }
    let small = |b: &BigInt| b.to_i128().filter(|v| v.abs() < 1i128 << 40);
    match (small(w.numer()), small(w.denom())) {
        (Some(wp), Some(wq)) if n < 1 << 20 => Ok(coverage_fast(n, wp, wq, &pairs)),
        _ => coverage_exact(n, &w, &pairs),
    }
}

/// Overlap of neighbours u/v, u'/v' is (w (v + v') - 1) / (v v'); with
/// w = wp / wq its sign is that of wp (v + v') - wq.
fn coverage_fast(n: u64, wp: i128, wq: i128, pairs: &[(u64, u64)]) -> CoverageReport {
    let mut violations = Vec::new();
    let mut best: Option<(i128, i128)> = None;
    for win in pairs.windows(2) {
        let ((p, q), (pp, qq)) = (win[0], win[1]);
        let num = wp * (q + qq) as i128 - wq;
        let den = (q * qq) as i128;
        if num <= 0 {
            violations.push(CoverageViolation {
                left: Rational::new(p, q).expect("q > 0"),
                right: Rational::new(pp, qq).expect("q > 0"),
                gap: Rational::new(-num, wq * den).expect("positive"),
            });
        }
        best = match best {
            Some((bn, bd)) if bn * den <= num * bd => Some((bn, bd)),
            _ => Some((num, den)),
        };
    }
    let (bn, bd) = best.expect("a Farey sequence has at least two terms");
    CoverageReport {
        order: n,
        pairs_checked: pairs.len() - 1,
        min_overlap: Rational::new(bn, wq * bd).expect("positive"),
        violations,
    }
}

fn coverage_exact(n: u64, w: &Rational, pairs: &[(u64, u64)]) -> Result<CoverageReport> {
    let mut report = CoverageReport { order: n, pairs_checked: 0, min_overlap: Rational::integer(i64::MAX), violations: Vec::new() };
    for win in pairs.windows(2) {
        let ((p, q), (pp, qq)) = (win[0], win[1]);
        let sum = Rational::new(q + qq, q * qq)?;
        let gap_between = Rational::new(1, q * qq)?;
        let overlap = &(w * &sum) - &gap_between;
        if overlap <= Rational::zero() {
            report.violations.push(CoverageViolation {
                left: Rational::new(p, q)?,
                right: Rational::new(pp, qq)?,
                gap: -overlap.clone(),
            });
        }
        if overlap < report.min_overlap {
            report.min_overlap = overlap;
        }
        report.pairs_checked += 1;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub enum RobustSelection {
    /// |x dn1 + y dn2| < eps for every x/y within delta of the measurement.
    Selected { dn1: i64, dn2: i64, center: Rational, order: u64, interval: Interval },
    /// Shrink delta or grow eps and try again.
    RespecifyRequired { reason: String, center: Rational, interval: Interval },
}

/// Farey-robust choice of (dn1, dn2) from a measured ratio x/y.
///
/// The ratio is shifted by k = floor(measured) into [0, 1), the nearest
/// order-floor(|y|/eps) Farey fraction u/v is found, and the pair
/// (v, -(u + k v)) is returned when the whole uncertainty window
/// [ratio - delta, ratio + delta] sits inside the punctured interval
/// around u/v. Then |x v - y (u + k v)| = |y| v |x/y - k - u/v| < eps.
pub fn robust_select(measured: &Rational, delta: &Rational, epsilon: &Rational, y: &Rational) -> Result<RobustSelection> {
    if delta.is_negative() {
        return Err(Error::Argument(format!("delta must be non-negative, got {delta}")));
    }
    if !(epsilon > &Rational::zero()) || y.is_zero() {
        return Err(Error::Argument("need epsilon > 0 and y != 0".into()));
    }
    let k = measured.floor();
    let shifted = measured - &Rational::integer(k.clone());
    let order = (&y.abs() / epsilon).floor().to_u64().unwrap_or(u64::MAX).max(1);
    let center = nearest_farey(&shifted, order)?;
    let interval = farey_interval(&center, epsilon, y)?;
    let lo = &shifted - delta;
    let hi = &shifted + delta;
    if !interval.contains_range(&lo, &hi) {
        let reason = if lo <= center && center <= hi {
            "uncertainty window contains the interval center".to_string()
        } else {
            "uncertainty window leaves the interval".to_string()
        };
        return Ok(RobustSelection::RespecifyRequired { reason, center, interval });
    }
    let u = center.numer().clone();
    let v = center.denom().clone();
    let dn2 = -(u + &k * &v);
    let to_i64 = |b: &BigInt| b.to_i64().ok_or_else(|| Error::Argument(format!("coefficient {b} overflows i64")));
    Ok(RobustSelection::Selected { dn1: to_i64(&v)?, dn2: to_i64(&dn2)?, center, order, interval })
}

/// Best rational approximation with denominator <= `max_den`.
pub fn float_to_rational(value: f64, max_den: u64) -> Result<Rational> {
    if !value.is_finite() {
        return Err(Error::Argument(format!("non-finite value {value}")));
    }
    if max_den == 0 {
        return Err(Error::Argument("max denominator must be at least 1".into()));
    }
    limit_denominator(&Rational::from_f64(value)?, max_den)
}

/// Closest fraction with denominator <= `max_den` to an exact rational,
/// from the last convergent and the best semiconvergent.
pub fn limit_denominator(x: &Rational, max_den: u64) -> Result<Rational> {
    let bound = BigInt::from(max_den);
    if x.denom() <= &bound {
        return Ok(x.clone());
    }
    let (mut p0, mut q0, mut p1, mut q1) = (BigInt::zero(), BigInt::one(), BigInt::one(), BigInt::zero());
    let (mut n, mut d) = (x.numer().clone(), x.denom().clone());
    loop {
        let a = n.div_floor(&d);
        let q2 = &q0 + &a * &q1;
        if q2 > bound {
            break;
        }
        let p2 = &p0 + &a * &p1;
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let r = &n - &a * &d;
        (n, d) = (d, r);
        if d.is_zero() {
            break;
        }
    }
    let j = (&bound - &q0).div_floor(&q1);
    let semi = Rational::new(&p0 + &j * &p1, &q0 + &j * &q1)?;
    let conv = Rational::new(p1, q1)?;
    if (&conv - x).abs() <= (&semi - x).abs() {
        Ok(conv)
    } else {
        Ok(semi)
    }
}

/// Convergents p_k/q_k of the continued fraction of `x`, stopping once the
/// denominator exceeds `max_den` or the expansion terminates.
pub fn convergents(x: &Rational, max_den: u64) -> Vec<(BigInt, BigInt)> {
    let bound = BigInt::from(max_den);
    let (mut p0, mut q0, mut p1, mut q1) = (BigInt::zero(), BigInt::one(), BigInt::one(), BigInt::zero());
    let (mut n, mut d) = (x.numer().clone(), x.denom().clone());
    let mut out = Vec::new();
    while !d.is_zero() {
        let a = n.div_floor(&d);
        let p2 = &p0 + &a * &p1;
        let q2 = &q0 + &a * &q1;
        if q2 > bound {
            break;
        }
        out.push((p2.clone(), q2.clone()));
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let r = &n - &a * &d;
        (n, d) = (d, r);
    }
    out
}
