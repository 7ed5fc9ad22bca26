//! Bit-level encoding of p-bit floats, shared by the circuit evaluator and
//! the lowering pass.
//!
//! A value occupies 2(p+1) wires: the significand as a (p+1)-bit
//! two's-complement integer, least significant bit first, followed by the
//! exponent as a (p+1)-bit two's-complement integer, also LSB first. Both
//! fields fit exactly: |m| < 2^p and e ∈ [-2^p, 2^p). Decoding validates
//! normalization, so a bundle of wires either denotes a legal value or is
//! rejected.

use crate::fp::{FpError, FpNum, Precision};

/// Wires per encoded value.
pub fn width(p: Precision) -> usize {
    2 * (p as usize + 1)
}

fn field_bits(p: Precision) -> usize {
    p as usize + 1
}

/// v as an n-bit two's-complement little-endian bit vector. Requires
/// -2^(n-1) ≤ v < 2^(n-1).
pub fn int_to_bits(v: i64, n: usize) -> Vec<bool> {
    assert!(n < 64);
    assert!(
        v >= -(1i64 << (n - 1)) && v < (1i64 << (n - 1)),
        "{v} does not fit {n} two's-complement bits"
    );
    (0..n).map(|i| (v >> i) & 1 == 1).collect()
}

/// Little-endian two's-complement bits back to an integer.
pub fn bits_to_int(bits: &[bool]) -> i64 {
    assert!(!bits.is_empty() && bits.len() < 64);
    let mut v: i64 = 0;
    for (i, &b) in bits.iter().enumerate() {
        if b {
            v |= 1i64 << i;
        }
    }
    if *bits.last().unwrap() {
        v -= 1i64 << bits.len();
    }
    v
}

pub fn encode(x: &FpNum) -> Vec<bool> {
    let n = field_bits(x.precision());
    let mut out = int_to_bits(x.significand(), n);
    out.extend(int_to_bits(x.exponent(), n));
    out
}

pub fn decode(bits: &[bool], p: Precision) -> Result<FpNum, FpError> {
    let n = field_bits(p);
    assert_eq!(bits.len(), 2 * n, "encoded value must be {} bits", 2 * n);
    let m = bits_to_int(&bits[..n]);
    let e = bits_to_int(&bits[n..]);
    FpNum::new(m, e, p)
}

/// Concatenate the encodings of several values.
pub fn encode_all(xs: &[FpNum]) -> Vec<bool> {
    xs.iter().flat_map(encode).collect()
}

/// Split a flat bit string into values.
pub fn decode_all(bits: &[bool], p: Precision) -> Result<Vec<FpNum>, FpError> {
    let w = width(p);
    assert_eq!(bits.len() % w, 0, "bit string is not a whole number of values");
    bits.chunks(w).map(|c| decode(c, p)).collect()
}
