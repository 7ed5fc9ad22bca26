//! Symbolic depth expressions: non-negative integer combinations of the
//! six depth units plus a constant term.
//!
//! The units are opaque costs for the six kinds of bounded-depth stages a
//! lowered circuit is built from: `d_std` (a standard scalar stage —
//! add/mul/div/compare/ReLU), `d_oplus` (an iterated addition), `d_otimes`
//! (an iterated multiplication), `d_exp` (an exponential), `d_sqrt` (a
//! square root), and `d_f` (an arbitrary component subcircuit). Measuring a
//! circuit produces one of these expressions; closed-form predictions are
//! compared against it coefficient by coefficient.

use std::fmt;
use std::str::FromStr;

/// Names of the symbolic units, in coefficient order.
pub const DEPTH_VARS: [&str; 6] = ["d_std", "d_oplus", "d_otimes", "d_exp", "d_sqrt", "d_f"];

/// Coefficients over `DEPTH_VARS`, plus a trailing constant term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct DepthExpr(pub [u64; 7]);

impl DepthExpr {
    pub const ZERO: DepthExpr = DepthExpr([0; 7]);

    pub fn std(k: u64) -> Self {
        Self::var(0, k)
    }

    pub fn oplus(k: u64) -> Self {
        Self::var(1, k)
    }

    pub fn otimes(k: u64) -> Self {
        Self::var(2, k)
    }

    pub fn exp(k: u64) -> Self {
        Self::var(3, k)
    }

    pub fn sqrt(k: u64) -> Self {
        Self::var(4, k)
    }

    pub fn f(k: u64) -> Self {
        Self::var(5, k)
    }

    pub fn constant(k: u64) -> Self {
        Self::var(6, k)
    }

    fn var(i: usize, k: u64) -> Self {
        let mut c = [0; 7];
        c[i] = k;
        DepthExpr(c)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn add(&self, other: &DepthExpr) -> DepthExpr {
        let mut out = [0; 7];
        for i in 0..7 {
            out[i] = self.0[i] + other.0[i];
        }
        DepthExpr(out)
    }

    pub fn scale(&self, k: u64) -> DepthExpr {
        let mut out = self.0;
        for c in &mut out {
            *c *= k;
        }
        DepthExpr(out)
    }

    /// Coefficientwise maximum: the least expression that upper-bounds both
    /// for every non-negative assignment of the units.
    pub fn max(&self, other: &DepthExpr) -> DepthExpr {
        let mut out = [0; 7];
        for i in 0..7 {
            out[i] = self.0[i].max(other.0[i]);
        }
        DepthExpr(out)
    }
}

impl fmt::Display for DepthExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, name) in DEPTH_VARS.iter().enumerate() {
            match self.0[i] {
                0 => {}
                k => {
                    if !first {
                        write!(f, "+")?;
                    }
                    if k == 1 {
                        write!(f, "{name}")?;
                    } else {
                        write!(f, "{k}{name}")?;
                    }
                    first = false;
                }
            }
        }
        if self.0[6] != 0 {
            if !first {
                write!(f, "+")?;
            }
            write!(f, "{}", self.0[6])?;
        }
        Ok(())
    }
}

#[derive(Debug, PartialEq, Eq)]
pub struct DepthParseError(pub String);

impl fmt::Display for DepthParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot parse depth expression: {}", self.0)
    }
}

impl std::error::Error for DepthParseError {}

impl FromStr for DepthExpr {
    type Err = DepthParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "0" {
            return Ok(DepthExpr::ZERO);
        }
        let mut out = DepthExpr::ZERO;
        for term in s.split('+') {
            let term = term.trim();
            if term.is_empty() {
                return Err(DepthParseError(format!("empty term in {s:?}")));
            }
            let digits: String = term.chars().take_while(|c| c.is_ascii_digit()).collect();
            let rest = &term[digits.len()..];
            let coeff: u64 = if digits.is_empty() {
                1
            } else {
                digits
                    .parse()
                    .map_err(|_| DepthParseError(format!("bad coefficient in {term:?}")))?
            };
            if rest.is_empty() {
                if digits.is_empty() {
                    return Err(DepthParseError(format!("bad term {term:?}")));
                }
                out = out.add(&DepthExpr::constant(coeff));
                continue;
            }
            let idx = DEPTH_VARS
                .iter()
                .position(|v| *v == rest)
                .ok_or_else(|| DepthParseError(format!("unknown unit {rest:?}")))?;
            out = out.add(&DepthExpr::var(idx, coeff));
        }
        Ok(out)
    }
}
