//! Exact binary rationals `mant * 2^exp` on arbitrary-width integers.
//!
//! Every intermediate value in this crate that must be held exactly — the
//! sum inside `iter_add`, the product inside `iter_mul`, the working values
//! of the extended-precision kernels in [`super::ext`] — is a `Dyadic`.
//! Addition and multiplication are exact; nothing here rounds unless
//! `truncate` is called explicitly.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use std::cmp::Ordering;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dyadic {
    pub mant: BigInt,
    pub exp: i64,
}

impl Dyadic {
    pub fn new(mant: BigInt, exp: i64) -> Self {
        Dyadic { mant, exp }
    }

    pub fn zero() -> Self {
        Dyadic { mant: BigInt::zero(), exp: 0 }
    }

    pub fn one() -> Self {
        Dyadic { mant: BigInt::from(1), exp: 0 }
    }

    pub fn from_int(v: i64) -> Self {
        Dyadic { mant: BigInt::from(v), exp: 0 }
    }

    /// Exact conversion; every finite f64 is a dyadic rational.
    /// Panics on NaN/infinity.
    pub fn from_f64(v: f64) -> Self {
        assert!(v.is_finite(), "from_f64 on non-finite value");
        if v == 0.0 {
            return Dyadic::zero();
        }
        let bits = v.to_bits();
        let sign = if bits >> 63 == 1 { -1i64 } else { 1 };
        let biased = ((bits >> 52) & 0x7FF) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, exp) = if biased == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), biased - 1075)
        };
        Dyadic { mant: BigInt::from(sign * mant as i64), exp }
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mant.is_negative()
    }

    /// Bit length of |mant|; 0 for zero.
    pub fn mant_bits(&self) -> u64 {
        self.mant.magnitude().bits()
    }

    pub fn neg(&self) -> Self {
        Dyadic { mant: -&self.mant, exp: self.exp }
    }

    pub fn abs(&self) -> Self {
        Dyadic { mant: self.mant.abs(), exp: self.exp }
    }

    pub fn add(&self, other: &Dyadic) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let e = self.exp.min(other.exp);
        let a = &self.mant << (self.exp - e) as u64;
        let b = &other.mant << (other.exp - e) as u64;
        Dyadic { mant: a + b, exp: e }
    }

    pub fn sub(&self, other: &Dyadic) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Dyadic) -> Self {
        if self.is_zero() || other.is_zero() {
            return Dyadic::zero();
        }
        Dyadic { mant: &self.mant * &other.mant, exp: self.exp + other.exp }
    }

    /// Exact product with an integer.
    pub fn mul_int(&self, k: i64) -> Self {
        Dyadic::new(&self.mant * k, self.exp)
    }

    /// Exponent of the value's binade: the unique b with |x| ∈ [2^b, 2^(b+1)).
    /// Meaningless for zero (returns i64::MIN as a sentinel).
    pub fn binade(&self) -> i64 {
        if self.is_zero() {
            return i64::MIN;
        }
        self.exp + self.mant_bits() as i64 - 1
    }

    pub fn mul_pow2(&self, k: i64) -> Self {
        if self.is_zero() {
            return Dyadic::zero();
        }
        Dyadic { mant: self.mant.clone(), exp: self.exp + k }
    }

    pub fn cmp_value(&self, other: &Dyadic) -> Ordering {
        let d = self.sub(other);
        if d.mant.is_zero() {
            Ordering::Equal
        } else if d.mant.is_negative() {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }

    /// Drop trailing zero bits of the mantissa (value unchanged).
    pub fn normalize(mut self) -> Self {
        if self.mant.is_zero() {
            return Dyadic::zero();
        }
        let tz = self.mant.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            self.mant >>= tz;
            self.exp += tz as i64;
        }
        self
    }

    /// Keep at most `bits` significant bits, truncating toward zero.
    /// Used by the extended-precision kernels to stop mantissa growth;
    /// the discarded error is below one ulp of the kept width.
    pub fn truncate(&self, bits: u64) -> Self {
        let n = self.mant_bits();
        if n <= bits {
            return self.clone();
        }
        let drop = (n - bits) as i64;
        Dyadic { mant: &self.mant >> drop as u64, exp: self.exp + drop }
    }

    /// Approximate conversion for reporting only.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        // Take the top 64 bits and scale.
        let bits = self.mant_bits() as i64;
        let keep = 63.min(bits);
        let shifted = &self.mant >> (bits - keep) as u64;
        let top: i64 = shifted.try_into().expect("top bits fit i64");
        top as f64 * 2f64.powi((self.exp + bits - keep) as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(m: i64, e: i64) -> Dyadic {
        Dyadic::new(BigInt::from(m), e)
    }

    #[test]
    fn add_aligns_exponents() {
        // 3*2^2 + 5*2^-1 = 12 + 2.5 = 14.5 = 29 * 2^-1
        let s = d(3, 2).add(&d(5, -1));
        assert_eq!(s.normalize(), d(29, -1));
    }

    #[test]
    fn mul_is_exact() {
        let p = d(7, -3).mul(&d(-5, 2));
        assert_eq!(p, d(-35, -1));
    }

    #[test]
    fn from_f64_roundtrips_small_values() {
        for v in [0.5, -1.25, 3.0, 0.1] {
            let dy = Dyadic::from_f64(v);
            assert_eq!(dy.to_f64(), v);
        }
    }

    #[test]
    fn truncate_keeps_top_bits() {
        let x = d(0b1011_1101, 0);
        let t = x.truncate(4);
        assert_eq!(t, d(0b1011, 4));
    }

    #[test]
    fn cmp_value_ignores_representation() {
        assert_eq!(d(4, 0).cmp_value(&d(1, 2)), Ordering::Equal);
        assert_eq!(d(3, 0).cmp_value(&d(1, 2)), Ordering::Less);
    }
}
