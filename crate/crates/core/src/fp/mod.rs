//! Exact p-bit floating point.
//!
//! A value is a pair `⟨m, e⟩` meaning `m * 2^e`, with the significand
//! normalized: `m ∈ (-2^p, -2^(p-1)] ∪ {0} ∪ [2^(p-1), 2^p)` and the
//! exponent bounded by `e ∈ [-2^p, 2^p)`. Zero is canonical (`m = 0`
//! forces `e = 0`), so equality of values is equality of representations.
//!
//! Every operation computes its result exactly (arbitrary-width integer
//! arithmetic) and rounds once: to the nearest representable value, ties
//! going to the candidate with even significand. `iter_add`/`iter_mul`
//! round the exact n-term sum/product once, which is *not* the same as a
//! chain of binary ops. Out-of-range results clamp to the nearest extreme
//! (largest finite magnitude, or zero/min-positive below the bottom of the
//! range) and set sticky overflow/underflow flags — there are no infinities
//! or NaNs. In the one corner the tie rule cannot decide — an exact tie
//! between 0 and the minimum positive value, both of which have even
//! significands — we round toward zero.
//!
//! `exp` and `sqrt` evaluate in extended internal precision (≥ 4p bits,
//! see [`ext`]) and round once; both land within relative error `2^-p` of
//! the true value.

pub mod dyadic;
pub mod ext;

pub use dyadic::Dyadic;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;
use std::fmt;
use thiserror::Error;

pub type Precision = u32;

/// Largest supported significand width. Significands and exponents for
/// p ≤ 60 fit comfortably in i64.
pub const MAX_PRECISION: Precision = 60;

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum FpError {
    #[error("precision {0} out of range 1..={MAX_PRECISION}")]
    InvalidPrecision(Precision),
    #[error("significand {m} not representable at p={p}")]
    BadSignificand { m: i64, p: Precision },
    #[error("exponent {e} out of range at p={p}")]
    BadExponent { e: i64, p: Precision },
    #[error("zero must be canonical (m=0 requires e=0)")]
    NonCanonicalZero,
    #[error("precision mismatch: {0} vs {1}")]
    PrecisionMismatch(Precision, Precision),
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of negative value")]
    NegativeSqrt,
    #[error("cannot parse fp literal {0:?}")]
    BadLiteral(String),
}

/// Sticky overflow/underflow indicators. Operations only ever set bits;
/// clearing is explicit via `clear`.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct FpFlags {
    pub overflow: bool,
    pub underflow: bool,
}

impl FpFlags {
    pub fn new() -> Self {
        FpFlags::default()
    }

    pub fn clear(&mut self) {
        *self = FpFlags::default();
    }

    pub fn merge(&mut self, other: FpFlags) {
        self.overflow |= other.overflow;
        self.underflow |= other.underflow;
    }

    pub fn any(&self) -> bool {
        self.overflow || self.underflow
    }
}

/// A p-bit float. Construction validates normalization, so any `FpNum`
/// you can get your hands on is a legal value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FpNum {
    m: i64,
    e: i64,
    p: Precision,
}

pub fn exp_min(p: Precision) -> i64 {
    -(1i64 << p)
}

pub fn exp_max(p: Precision) -> i64 {
    (1i64 << p) - 1
}

fn sig_min(p: Precision) -> i64 {
    1i64 << (p - 1)
}

fn sig_max(p: Precision) -> i64 {
    (1i64 << p) - 1
}

impl FpNum {
    pub fn new(m: i64, e: i64, p: Precision) -> Result<Self, FpError> {
        if p < 1 || p > MAX_PRECISION {
            return Err(FpError::InvalidPrecision(p));
        }
        if m == 0 {
            if e != 0 {
                return Err(FpError::NonCanonicalZero);
            }
            return Ok(FpNum { m: 0, e: 0, p });
        }
        let a = m.unsigned_abs() as i64;
        if a < sig_min(p) || a > sig_max(p) {
            return Err(FpError::BadSignificand { m, p });
        }
        if e < exp_min(p) || e > exp_max(p) {
            return Err(FpError::BadExponent { e, p });
        }
        Ok(FpNum { m, e, p })
    }

    pub fn zero(p: Precision) -> Self {
        FpNum { m: 0, e: 0, p }
    }

    /// 1 = ⟨2^(p-1), -(p-1)⟩.
    pub fn one(p: Precision) -> Self {
        FpNum { m: sig_min(p), e: -(p as i64 - 1), p }
    }

    /// Largest finite value, (2^p - 1) * 2^(2^p - 1).
    pub fn max_value(p: Precision) -> Self {
        FpNum { m: sig_max(p), e: exp_max(p), p }
    }

    /// Smallest positive value, 2^(p-1) * 2^(-2^p).
    pub fn min_positive(p: Precision) -> Self {
        FpNum { m: sig_min(p), e: exp_min(p), p }
    }

    /// Round an integer into F_p.
    pub fn from_int(v: i64, p: Precision, flags: &mut FpFlags) -> Self {
        round_dyadic(&Dyadic::from_int(v), p, flags)
    }

    /// Round a finite f64 into F_p. Doubles are dyadic rationals, so the
    /// input is represented exactly and the only rounding is the final one.
    pub fn from_f64(x: f64, p: Precision, flags: &mut FpFlags) -> Self {
        assert!(x.is_finite(), "from_f64 needs a finite input");
        if x == 0.0 {
            return FpNum::zero(p);
        }
        let bits = x.to_bits();
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = (bits & ((1u64 << 52) - 1)) as i64;
        let (m, e) = if biased == 0 {
            (frac, -1074)
        } else {
            (frac | (1 << 52), biased - 1075)
        };
        let m = if bits >> 63 == 1 { -m } else { m };
        round_dyadic(&Dyadic::new(BigInt::from(m), e), p, flags)
    }

    pub fn significand(&self) -> i64 {
        self.m
    }

    pub fn exponent(&self) -> i64 {
        self.e
    }

    pub fn precision(&self) -> Precision {
        self.p
    }

    pub fn is_zero(&self) -> bool {
        self.m == 0
    }

    /// -1, 0, or 1.
    pub fn signum(&self) -> i32 {
        self.m.signum() as i32
    }

    /// Negation is exact: the significand range is symmetric.
    pub fn neg(&self) -> Self {
        FpNum { m: -self.m, e: self.e, p: self.p }
    }

    pub fn to_dyadic(&self) -> Dyadic {
        Dyadic::new(BigInt::from(self.m), self.e)
    }

    /// Approximate conversion for reporting; exact whenever the value fits
    /// an f64 (always true for p ≤ 24 values in ordinary exponent ranges).
    pub fn to_f64(&self) -> f64 {
        self.m as f64 * 2f64.powi(self.e.clamp(-1_000_000, 1_000_000) as i32)
    }

    /// Total order on values. Normalization makes this a lexicographic
    /// comparison: for equal signs, larger exponent means larger magnitude
    /// (binades do not overlap), then significands decide.
    pub fn compare(&self, other: &FpNum) -> Ordering {
        assert_eq!(self.p, other.p, "compare across precisions");
        let sx = self.m.signum();
        let sy = other.m.signum();
        if sx != sy {
            return sx.cmp(&sy);
        }
        match sx {
            0 => Ordering::Equal,
            1 => (self.e, self.m).cmp(&(other.e, other.m)),
            _ => (other.e, -other.m).cmp(&(self.e, -self.m)),
        }
    }

    /// Parse `fp(p=3, m=5, e=-4)`.
    pub fn parse_literal(s: &str) -> Result<Self, FpError> {
        let bad = || FpError::BadLiteral(s.to_string());
        let inner = s
            .trim()
            .strip_prefix("fp(")
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(bad)?;
        let (mut p, mut m, mut e) = (None, None, None);
        for part in inner.split(',') {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            let v: i64 = v.trim().parse().map_err(|_| bad())?;
            match k.trim() {
                "p" => p = Some(v),
                "m" => m = Some(v),
                "e" => e = Some(v),
                _ => return Err(bad()),
            }
        }
        match (p, m, e) {
            (Some(p), Some(m), Some(e)) if p >= 1 => FpNum::new(m, e, p as Precision),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for FpNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fp(p={}, m={}, e={})", self.p, self.m, self.e)
    }
}

/// Round ±mag·2^grid_exp (plus, when `sticky_extra`, a positive fraction of
/// one grid step) to the nearest F_p value, ties to even significand.
/// This is the single rounding primitive everything else funnels through.
fn round_bits(
    negative: bool,
    mag: &BigUint,
    grid_exp: i64,
    sticky_extra: bool,
    p: Precision,
    flags: &mut FpFlags,
) -> FpNum {
    assert!(p >= 1 && p <= MAX_PRECISION);
    if mag.is_zero() {
        assert!(!sticky_extra, "sticky bit without magnitude bits");
        return FpNum::zero(p);
    }
    let bits = mag.bits() as i64;
    // The value sits in [2^bin, 2^(bin+1)).
    let bin = bits - 1 + grid_exp;
    let f = bin - (p as i64 - 1);
    let emin = exp_min(p);
    let emax = exp_max(p);

    let signed = |q: i64, e: i64| FpNum {
        m: if negative { -q } else { q },
        e,
        p,
    };

    if f > emax {
        // Already beyond max + half-ulp; clamp.
        flags.overflow = true;
        return signed(sig_max(p), emax);
    }
    if f < emin {
        // Below the smallest normalized binade: the only representable
        // neighbours are 0 and ±min_positive = 2^(p-1+emin).
        flags.underflow = true;
        let t = emin + p as i64 - 2; // min_positive / 2 = 2^t
        if bin < t {
            return FpNum::zero(p);
        }
        debug_assert_eq!(bin, t);
        // Exactly min_positive/2 (a lone top bit, nothing below) rounds to
        // zero: both candidates have even significands, we take the one
        // nearer zero.
        let exact_half = mag.count_ones() == 1 && !sticky_extra;
        if exact_half {
            return FpNum::zero(p);
        }
        return signed(sig_min(p), emin);
    }

    // Normal range: take the top p bits, round to nearest / ties-to-even.
    let shift = bits - p as i64;
    let (mut q, round, sticky) = if shift <= 0 {
        assert!(!sticky_extra, "sticky bit below an exact window");
        let q: BigUint = mag << (-shift) as u64;
        (q, false, false)
    } else {
        let q: BigUint = mag >> shift as u64;
        let round = mag.bit(shift as u64 - 1);
        let below: BigUint = mag & ((BigUint::one() << (shift as u64 - 1)) - 1u32);
        (q, round, !below.is_zero() || sticky_extra)
    };
    let mut f = f;
    if round && (sticky || q.bit(0)) {
        q += 1u32;
    }
    let mut qi: i64 = (&q).try_into().expect("p+1 bits fit i64");
    if qi == 1i64 << p {
        qi = sig_min(p);
        f += 1;
    }
    if f > emax {
        flags.overflow = true;
        return signed(sig_max(p), emax);
    }
    signed(qi, f)
}

/// Uniformly random normalized value with exponent drawn from
/// [e_lo, e_hi]; never zero. Drives random fixtures, experiments, and
/// randomized checks — all randomness flows through the one seeded stream.
pub fn random_value(
    rng: &mut crate::rng::SplitMix64,
    p: Precision,
    e_lo: i64,
    e_hi: i64,
) -> FpNum {
    assert!(e_lo <= e_hi && e_lo >= exp_min(p) && e_hi <= exp_max(p));
    let m = rng.next_range(sig_min(p), sig_max(p));
    let m = if rng.next_bool() { m } else { -m };
    let e = rng.next_range(e_lo, e_hi);
    FpNum { m, e, p }
}

/// Round an exact dyadic rational into F_p.
pub fn round_dyadic(x: &Dyadic, p: Precision, flags: &mut FpFlags) -> FpNum {
    if x.is_zero() {
        return FpNum::zero(p);
    }
    round_bits(x.is_negative(), x.mant.magnitude(), x.exp, false, p, flags)
}

/// Round an exact rational num/den (den > 0) into F_p. Covers inputs that
/// are not dyadic, e.g. 3/10.
pub fn round_ratio(num: &BigInt, den: &BigInt, p: Precision, flags: &mut FpFlags) -> FpNum {
    assert!(den.is_positive(), "round_ratio needs den > 0");
    if num.is_zero() {
        return FpNum::zero(p);
    }
    let negative = num.is_negative();
    let a = num.magnitude();
    let b = den.magnitude();
    // Scale so the quotient carries at least p+2 significant bits, then let
    // round_bits see the remainder through the sticky flag.
    let s = (p as i64 + 3) + b.bits() as i64 - a.bits() as i64;
    let s = s.max(0) as u64;
    let scaled: BigUint = a << s;
    let (q, r) = scaled.div_rem(b);
    round_bits(negative, &q, -(s as i64), !r.is_zero(), p, flags)
}

/// x + y, rounded once from the exact sum.
pub fn fp_add(x: &FpNum, y: &FpNum, flags: &mut FpFlags) -> FpNum {
    assert_eq!(x.p, y.p, "fp_add across precisions");
    if x.is_zero() {
        return *y;
    }
    if y.is_zero() {
        return *x;
    }
    let (hi, lo) = if x.e >= y.e { (x, y) } else { (y, x) };
    // When the exponents are p+3 apart, |lo| < 2^(hi.e - 3) is strictly
    // inside the half-gap around hi (worst case 2^(hi.e - 2) at a binade
    // boundary), so the exact sum rounds back to hi and no tie can occur.
    if hi.e - lo.e > x.p as i64 + 2 {
        return *hi;
    }
    let sum = hi.to_dyadic().add(&lo.to_dyadic());
    round_dyadic(&sum, x.p, flags)
}

/// x * y, rounded once from the exact product.
pub fn fp_mul(x: &FpNum, y: &FpNum, flags: &mut FpFlags) -> FpNum {
    assert_eq!(x.p, y.p, "fp_mul across precisions");
    if x.is_zero() || y.is_zero() {
        return FpNum::zero(x.p);
    }
    let prod = BigInt::from(x.m as i128 * y.m as i128);
    round_bits(
        prod.is_negative(),
        prod.magnitude(),
        x.e + y.e,
        false,
        x.p,
        flags,
    )
}

/// x / y, rounded once from the exact quotient. Division by zero is a hard
/// error, never a flag.
pub fn fp_div(x: &FpNum, y: &FpNum, flags: &mut FpFlags) -> Result<FpNum, FpError> {
    assert_eq!(x.p, y.p, "fp_div across precisions");
    if y.is_zero() {
        return Err(FpError::DivisionByZero);
    }
    if x.is_zero() {
        return Ok(FpNum::zero(x.p));
    }
    let a = BigUint::from(x.m.unsigned_abs());
    let b = BigUint::from(y.m.unsigned_abs());
    let s = (x.p as i64 + 3) + b.bits() as i64 - a.bits() as i64;
    let s = s.max(0) as u64;
    let scaled: BigUint = &a << s;
    let (q, r) = scaled.div_rem(&b);
    let negative = (x.m < 0) != (y.m < 0);
    Ok(round_bits(
        negative,
        &q,
        x.e - y.e - s as i64,
        !r.is_zero(),
        x.p,
        flags,
    ))
}

/// Iterated addition: one rounding of the exact n-term sum. Empty input is
/// zero. This is a genuinely different operation from folding `fp_add`.
pub fn iter_add(p: Precision, xs: &[FpNum], flags: &mut FpFlags) -> FpNum {
    let mut acc = Dyadic::zero();
    for x in xs {
        assert_eq!(x.p, p, "iter_add across precisions");
        acc = acc.add(&x.to_dyadic());
    }
    round_dyadic(&acc, p, flags)
}

/// Iterated multiplication: one rounding of the exact n-term product.
/// Empty input is one.
pub fn iter_mul(p: Precision, xs: &[FpNum], flags: &mut FpFlags) -> FpNum {
    let mut acc = Dyadic::one();
    for x in xs {
        assert_eq!(x.p, p, "iter_mul across precisions");
        if x.is_zero() {
            return FpNum::zero(p);
        }
        acc = acc.mul(&x.to_dyadic());
    }
    round_dyadic(&acc, p, flags)
}

/// Precision cap for the transcendental ops: the argument-reduction
/// bookkeeping holds binade counts in i64 and is sized for p ≤ 32, which
/// covers every precision this crate sweeps.
const MAX_TRANSCENDENTAL_P: Precision = 32;

/// e^x, computed in ≥ 4p-bit internal precision and rounded once.
/// Relative error ≤ 2^-p against the true exponential.
pub fn fp_exp(x: &FpNum, flags: &mut FpFlags) -> FpNum {
    assert!(
        x.p <= MAX_TRANSCENDENTAL_P,
        "fp_exp supported for p ≤ {MAX_TRANSCENDENTAL_P}"
    );
    if x.is_zero() {
        return FpNum::one(x.p);
    }
    // |x| ≥ 2^(p+2) certainly lands outside the representable range
    // (log2 e^x = x·log2(e) with |x|·1.44 ≫ 2^p + p); short-circuit so the
    // reduction below never sees astronomical binade counts.
    if x.e >= 3 {
        if x.m > 0 {
            flags.overflow = true;
            return FpNum::max_value(x.p);
        }
        flags.underflow = true;
        return FpNum::zero(x.p);
    }
    let prec = 4 * x.p as u64 + 40;
    let approx = ext::exp(&x.to_dyadic(), prec);
    round_dyadic(&approx, x.p, flags)
}

/// √x with a single final rounding. The integer square root is carried to
/// 2p+16 guard bits, which pins the rounded result: no square root of a
/// representable value can sit closer to a rounding boundary than that.
pub fn fp_sqrt(x: &FpNum, flags: &mut FpFlags) -> Result<FpNum, FpError> {
    assert!(
        x.p <= MAX_TRANSCENDENTAL_P,
        "fp_sqrt supported for p ≤ {MAX_TRANSCENDENTAL_P}"
    );
    if x.m < 0 {
        return Err(FpError::NegativeSqrt);
    }
    if x.is_zero() {
        return Ok(FpNum::zero(x.p));
    }
    let mut mag = BigUint::from(x.m as u64);
    let mut e = x.e;
    if e.rem_euclid(2) == 1 {
        mag <<= 1u32;
        e -= 1;
    }
    let g = 2 * x.p as u64 + 16;
    let scaled: BigUint = &mag << (2 * g);
    let root = scaled.sqrt();
    let exact = &root * &root == scaled;
    Ok(round_bits(
        false,
        &root,
        e / 2 - g as i64,
        !exact,
        x.p,
        flags,
    ))
}

#[cfg(test)]
mod tests;
