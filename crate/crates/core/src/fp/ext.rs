//! Extended-precision evaluation on exact dyadic rationals.
//!
//! These routines back the transcendental p-bit operations: they compute
//! e^x, ln x, quotients, and log-sum-exp to a requested number of
//! significant bits (callers pass ≥ 4p + 40), after which a single rounding
//! into F_p stays within relative error 2^-p of the true value. Internally
//! every step is integer arithmetic; truncations are explicit and always
//! leave ≥ 32 bits of slack below the requested precision.

use super::Dyadic;
use num_bigint::{BigInt, BigUint};
use num_traits::One;
use std::sync::OnceLock;

/// Bits carried by the cached ln 2 master copy.
const LN2_CACHE_BITS: u64 = 768;

/// ln 2 truncated to `prec` significant bits. Computed once as
/// 2·atanh(1/3) (since 2 = (1 + 1/3)/(1 - 1/3)) and cached.
pub fn ln2(prec: u64) -> Dyadic {
    assert!(
        prec <= LN2_CACHE_BITS - 64,
        "ln2 cache sized for prec ≤ {}",
        LN2_CACHE_BITS - 64
    );
    static LN2: OnceLock<Dyadic> = OnceLock::new();
    LN2.get_or_init(|| {
        let third = div(&Dyadic::one(), &Dyadic::from_int(3), LN2_CACHE_BITS + 16);
        atanh_small(&third, LN2_CACHE_BITS + 8).mul_pow2(1)
    })
    .truncate(prec)
}

/// a / b truncated toward zero at `prec` significant bits. b must be
/// non-zero.
pub fn div(a: &Dyadic, b: &Dyadic, prec: u64) -> Dyadic {
    assert!(!b.is_zero(), "ext::div by zero");
    if a.is_zero() {
        return Dyadic::zero();
    }
    let na = a.mant.magnitude();
    let nb = b.mant.magnitude();
    let s = (prec as i64 + 2) + nb.bits() as i64 - na.bits() as i64;
    let s = s.max(0) as u64;
    let scaled: BigUint = na << s;
    let q = scaled / nb;
    let negative = a.is_negative() != b.is_negative();
    let mant = BigInt::from(q);
    Dyadic::new(if negative { -mant } else { mant }, a.exp - b.exp - s as i64)
}

/// atanh(z) = z + z³/3 + z⁵/5 + … for |z| ≤ 0.4, truncated working terms,
/// absolute error well below 2^-prec.
fn atanh_small(z: &Dyadic, prec: u64) -> Dyadic {
    debug_assert!(
        z.abs().cmp_value(&Dyadic::new(BigInt::from(2), -2)) == std::cmp::Ordering::Less
            || z.is_zero(),
        "atanh_small needs |z| < 1/2"
    );
    if z.is_zero() {
        return Dyadic::zero();
    }
    let work = prec + 32;
    let z2 = z.mul(z).truncate(work);
    let mut power = z.truncate(work);
    let mut sum = power.clone();
    let mut n: i64 = 3;
    loop {
        power = power.mul(&z2).truncate(work);
        let term = div(&power, &Dyadic::from_int(n), work);
        if term.is_zero() || term.binade() < -(prec as i64 + 16) {
            break;
        }
        sum = sum.add(&term);
        n += 2;
        assert!(n < 8 * prec as i64 + 64, "atanh series failed to converge");
    }
    sum
}

/// e^x to `prec` significant bits. Argument reduction x = k·ln2 + r with
/// |r| ≲ 0.7, then the Taylor series for e^r, then an exact 2^k scale.
/// The binade count k must fit an i64 with room to spare; callers keep
/// |x| < 2^40.
pub fn exp(x: &Dyadic, prec: u64) -> Dyadic {
    if x.is_zero() {
        return Dyadic::one();
    }
    assert!(x.binade() < 40, "ext::exp argument out of supported range");
    let work = prec + 96;
    // k = floor(x/ln2 + 1/2): nearest binade count. The quotient is
    // truncated toward zero, which can shift k by one; that only widens
    // |r| to < ln2, still comfortably inside the series' sweet spot.
    let q = div(x, &ln2(80), 80);
    let k = nearest_int(&q);
    let r = x.sub(&ln2(work).mul_int(k));
    let mut term = Dyadic::one();
    let mut sum = Dyadic::one();
    let mut n: i64 = 1;
    loop {
        term = term.mul(&r).truncate(work);
        term = div(&term, &Dyadic::from_int(n), work);
        if term.is_zero() || term.binade() < -(prec as i64 + 16) {
            break;
        }
        sum = sum.add(&term);
        n += 1;
        assert!(n < 4 * prec as i64 + 64, "exp series failed to converge");
    }
    sum.truncate(work).mul_pow2(k)
}

/// ln x to `prec` significant bits, for x > 0. Binade reduction
/// x = m·2^j with m ∈ [1, 2), then ln m = 2·atanh((m-1)/(m+1)).
pub fn ln(x: &Dyadic, prec: u64) -> Dyadic {
    assert!(
        !x.is_zero() && !x.is_negative(),
        "ext::ln needs a positive argument"
    );
    let work = prec + 96;
    let bits = x.mant_bits() as i64;
    let j = x.exp + bits - 1;
    let m = Dyadic::new(x.mant.clone(), -(bits - 1));
    let z = div(&m.sub(&Dyadic::one()), &m.add(&Dyadic::one()), work);
    let frac = atanh_small(&z, work).mul_pow2(1);
    ln2(work).mul_int(j).add(&frac)
}

/// log-sum-exp: β⁻¹ · ln Σᵢ e^(β·zᵢ), to `prec` significant bits. Requires
/// β > 0 and at least one term. Stabilized by factoring out the maximum so
/// every exponential is ≤ 1; terms too small to touch the requested
/// precision are dropped rather than materialized.
pub fn lse(beta: &Dyadic, zs: &[Dyadic], prec: u64) -> Dyadic {
    assert!(!zs.is_empty(), "lse of an empty list");
    assert!(
        !beta.is_zero() && !beta.is_negative(),
        "lse needs β > 0"
    );
    let ys: Vec<Dyadic> = zs.iter().map(|z| beta.mul(z)).collect();
    let mut max = ys[0].clone();
    for y in &ys[1..] {
        if y.cmp_value(&max) == std::cmp::Ordering::Greater {
            max = y.clone();
        }
    }
    let cutoff = Dyadic::from_int(-(prec as i64 + 48));
    let mut sum = Dyadic::zero();
    for y in &ys {
        let d = y.sub(&max);
        // e^d < 2^(-(prec+48)·log2 e) is invisible at this precision next
        // to the guaranteed e^0 = 1 term.
        if d.cmp_value(&cutoff) == std::cmp::Ordering::Less {
            continue;
        }
        sum = sum.add(&exp(&d, prec + 32));
    }
    let l = ln(&sum, prec + 32);
    div(&max.add(&l), beta, prec)
}

/// Nearest integer to a dyadic (floor(q + 1/2)); the result must fit i64.
fn nearest_int(q: &Dyadic) -> i64 {
    let half_up = q.add(&Dyadic::new(BigInt::one(), -1));
    let v = if half_up.exp >= 0 {
        half_up.mant << half_up.exp as u64
    } else {
        half_up.mant >> (-half_up.exp) as u64 // BigInt shr floors
    };
    i64::try_from(&v).expect("binade count fits i64")
}
