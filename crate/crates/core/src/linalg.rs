//! Dense matrices over p-bit floats, with the library's fixed rounding
//! discipline: a matrix product rounds each scalar product once and each
//! row-sum once (the sum is an exact multi-term addition, not a fold), so
//! results are independent of summation order and reproducible bit for bit.
//!
//! Also hosts the row/column softmax built from the exact-rounded exp, the
//! extended-precision log-sum-exp, and a plain text fixture format:
//!
//! ```text
//! rows cols p
//! m:e m:e ... (row-major, one row per line)
//! ```

use crate::fp::{
    self, ext, round_dyadic, Dyadic, FpError, FpFlags, FpNum, Precision,
};
use std::cmp::Ordering;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum MatrixError {
    #[error("matrix parse error: {0}")]
    Parse(String),
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    Dimensions(usize, usize, usize, usize),
    #[error(transparent)]
    Fp(#[from] FpError),
}

/// Row-major matrix of p-bit floats. All entries share one precision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FpMatrix {
    rows: usize,
    cols: usize,
    p: Precision,
    data: Vec<FpNum>,
}

impl FpMatrix {
    pub fn zero(rows: usize, cols: usize, p: Precision) -> Self {
        FpMatrix {
            rows,
            cols,
            p,
            data: vec![FpNum::zero(p); rows * cols],
        }
    }

    pub fn identity(n: usize, p: Precision) -> Self {
        let mut m = FpMatrix::zero(n, n, p);
        for i in 0..n {
            m.set(i, i, FpNum::one(p));
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<FpNum>>, p: Precision) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in &rows {
            assert_eq!(row.len(), c, "ragged rows");
            for x in row {
                assert_eq!(x.precision(), p, "entry precision mismatch");
                data.push(*x);
            }
        }
        FpMatrix { rows: r, cols: c, p, data }
    }

    /// d×1 column vector.
    pub fn column(entries: Vec<FpNum>, p: Precision) -> Self {
        FpMatrix::from_rows(entries.into_iter().map(|x| vec![x]).collect(), p)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn precision(&self) -> Precision {
        self.p
    }

    pub fn get(&self, i: usize, j: usize) -> FpNum {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: FpNum) {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        assert_eq!(v.precision(), self.p, "entry precision mismatch");
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[FpNum] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn entries(&self) -> &[FpNum] {
        &self.data
    }

    pub fn transpose(&self) -> FpMatrix {
        let mut t = FpMatrix::zero(self.cols, self.rows, self.p);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn neg(&self) -> FpMatrix {
        let mut out = self.clone();
        for x in &mut out.data {
            *x = x.neg();
        }
        out
    }

    /// Entrywise max(0, x); exact, no rounding.
    pub fn relu(&self) -> FpMatrix {
        let mut out = self.clone();
        for x in &mut out.data {
            if x.signum() < 0 {
                *x = FpNum::zero(self.p);
            }
        }
        out
    }

    /// Entrywise sum (each entry one two-term exact-rounded addition).
    pub fn add(&self, other: &FpMatrix, flags: &mut FpFlags) -> FpMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(&other.data) {
            *x = fp::fp_add(x, y, flags);
        }
        out
    }

    /// Entrywise scale by a scalar (one rounding per entry).
    pub fn scale(&self, s: &FpNum, flags: &mut FpFlags) -> FpMatrix {
        let mut out = self.clone();
        for x in &mut out.data {
            *x = fp::fp_mul(s, x, flags);
        }
        out
    }

    /// Exact sum of each row, rounded once per row.
    pub fn row_sums(&self, flags: &mut FpFlags) -> Vec<FpNum> {
        (0..self.rows)
            .map(|i| fp::iter_add(self.p, self.row(i), flags))
            .collect()
    }

    /// Fixture text: header `rows cols p`, then row-major `m:e` tokens.
    pub fn fixture_string(&self) -> String {
        use fmt::Write;
        let mut s = String::new();
        writeln!(s, "{} {} {}", self.rows, self.cols, self.p).unwrap();
        for i in 0..self.rows {
            let line: Vec<String> = self
                .row(i)
                .iter()
                .map(|x| format!("{}:{}", x.significand(), x.exponent()))
                .collect();
            writeln!(s, "{}", line.join(" ")).unwrap();
        }
        s
    }

    pub fn parse_fixture(text: &str) -> Result<FpMatrix, MatrixError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| MatrixError::Parse("empty fixture".into()))?;
        let dims: Vec<&str> = header.split_whitespace().collect();
        if dims.len() != 3 {
            return Err(MatrixError::Parse(format!(
                "header must be `rows cols p`, got {header:?}"
            )));
        }
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| MatrixError::Parse(format!("bad header field {s:?}")))
        };
        let rows = parse_usize(dims[0])?;
        let cols = parse_usize(dims[1])?;
        let p = parse_usize(dims[2])? as Precision;
        let mut data = Vec::with_capacity(rows * cols);
        for line in lines {
            for tok in line.split_whitespace() {
                let (m, e) = tok
                    .split_once(':')
                    .ok_or_else(|| MatrixError::Parse(format!("bad entry {tok:?}")))?;
                let m: i64 = m
                    .parse()
                    .map_err(|_| MatrixError::Parse(format!("bad significand {tok:?}")))?;
                let e: i64 = e
                    .parse()
                    .map_err(|_| MatrixError::Parse(format!("bad exponent {tok:?}")))?;
                data.push(FpNum::new(m, e, p)?);
            }
        }
        if data.len() != rows * cols {
            return Err(MatrixError::Parse(format!(
                "expected {} entries, found {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(FpMatrix { rows, cols, p, data })
    }
}

/// Matrix product with single-rounding semantics: every scalar product is
/// rounded once, every row-sum is one exact multi-term addition rounded
/// once. Multiplying by an identity (or any 0/1 pattern) is therefore an
/// exact pass-through: 1·x = x, 0·x = 0, and a sum with one non-zero term
/// rounds to itself.
pub fn matmul(a: &FpMatrix, b: &FpMatrix, flags: &mut FpFlags) -> FpMatrix {
    assert_eq!(a.p, b.p, "matmul across precisions");
    assert_eq!(
        a.cols, b.rows,
        "matmul shape mismatch: {}x{} by {}x{}",
        a.rows, a.cols, b.rows, b.cols
    );
    let mut out = FpMatrix::zero(a.rows, b.cols, a.p);
    let mut prods = vec![FpNum::zero(a.p); a.cols];
    for i in 0..a.rows {
        for j in 0..b.cols {
            for (k, prod) in prods.iter_mut().enumerate() {
                *prod = fp::fp_mul(&a.get(i, k), &b.get(k, j), flags);
            }
            out.set(i, j, fp::iter_add(a.p, &prods, flags));
        }
    }
    out
}

/// Row-wise softmax at inverse temperature β: entry (i,j) becomes
/// exp(β·m_ij) / Σ_k exp(β·m_ik), every step in p-bit arithmetic. A row
/// whose exponentials all underflow to zero is a hard error.
///
/// When no overflow clamping occurs (flags stay clean), each row sums to 1
/// within 2^(2-p): the divisions and the row-sum each contribute one
/// rounding of relative size ≤ 2^-p. Clamped exponentials void that bound,
/// which is why the flags are worth checking.
pub fn softmax_rows(
    m: &FpMatrix,
    beta: &FpNum,
    flags: &mut FpFlags,
) -> Result<FpMatrix, FpError> {
    assert_eq!(m.p, beta.precision(), "softmax across precisions");
    let mut expd = m.clone();
    for x in &mut expd.data {
        *x = fp::fp_exp(&fp::fp_mul(beta, x, flags), flags);
    }
    let sums = expd.row_sums(flags);
    for i in 0..expd.rows {
        for j in 0..expd.cols {
            let q = fp::fp_div(&expd.get(i, j), &sums[i], flags)?;
            expd.set(i, j, q);
        }
    }
    Ok(expd)
}

/// Column-wise softmax: softmax_rows on the transpose, transposed back.
pub fn softmax_cols(
    m: &FpMatrix,
    beta: &FpNum,
    flags: &mut FpFlags,
) -> Result<FpMatrix, FpError> {
    Ok(softmax_rows(&m.transpose(), beta, flags)?.transpose())
}

/// log-sum-exp: β⁻¹·ln Σᵢ exp(β·xᵢ), evaluated in ≥ 4p-bit extended
/// precision and rounded once into F_p. Requires β > 0.
pub fn lse(beta: &FpNum, xs: &[FpNum], flags: &mut FpFlags) -> FpNum {
    let p = beta.precision();
    assert!(beta.signum() > 0, "lse needs β > 0");
    assert!(!xs.is_empty(), "lse of an empty list");
    for x in xs {
        assert_eq!(x.precision(), p, "lse across precisions");
    }
    let zs: Vec<Dyadic> = xs.iter().map(|x| x.to_dyadic()).collect();
    let prec = 4 * p as u64 + 40;
    let approx = ext::lse(&beta.to_dyadic(), &zs, prec);
    round_dyadic(&approx, p, flags)
}

/// Random matrix with entries drawn via [`fp::random_value`] (never zero).
pub fn random_matrix(
    rng: &mut crate::rng::SplitMix64,
    rows: usize,
    cols: usize,
    p: Precision,
    e_lo: i64,
    e_hi: i64,
) -> FpMatrix {
    let mut m = FpMatrix::zero(rows, cols, p);
    for i in 0..rows {
        for j in 0..cols {
            m.set(i, j, fp::random_value(rng, p, e_lo, e_hi));
        }
    }
    m
}

/// Largest |aᵢ - bᵢ| over entries, as an exact dyadic (diagnostics).
pub fn max_abs_diff(a: &FpMatrix, b: &FpMatrix) -> Dyadic {
    assert_eq!((a.rows, a.cols), (b.rows, b.cols), "shape mismatch");
    let mut best = Dyadic::zero();
    for (x, y) in a.data.iter().zip(&b.data) {
        let d = x.to_dyadic().sub(&y.to_dyadic()).abs();
        if d.cmp_value(&best) == Ordering::Greater {
            best = d;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn fpn(m: i64, e: i64, p: Precision) -> FpNum {
        FpNum::new(m, e, p).unwrap()
    }

    #[test]
    fn identity_matmul_is_exact_pass_through() {
        let p = 10;
        let mut rng = SplitMix64::new(0x11a1_0001);
        let a = random_matrix(&mut rng, 5, 7, p, -20, 20);
        let id5 = FpMatrix::identity(5, p);
        let id7 = FpMatrix::identity(7, p);
        let mut fl = FpFlags::new();
        assert_eq!(matmul(&id5, &a, &mut fl), a);
        assert_eq!(matmul(&a, &id7, &mut fl), a);
        assert!(!fl.any());
    }

    #[test]
    fn matmul_row_sum_rounds_once() {
        // [7, 0.25, 0.25]·[1,1,1]ᵀ: the exact sum 7.5 ties up to 8; a
        // folded accumulation would stall at 7.
        let p = 3;
        let a = FpMatrix::from_rows(
            vec![vec![fpn(7, 0, p), fpn(4, -4, p), fpn(4, -4, p)]],
            p,
        );
        let ones = FpMatrix::column(vec![FpNum::one(p); 3], p);
        let mut fl = FpFlags::new();
        let c = matmul(&a, &ones, &mut fl);
        assert_eq!(c.get(0, 0), fpn(4, 1, p));
    }

    #[test]
    fn matmul_dimensions_and_transpose() {
        let p = 6;
        let mut rng = SplitMix64::new(0x11a1_0002);
        let a = random_matrix(&mut rng, 3, 4, p, -5, 5);
        let b = random_matrix(&mut rng, 4, 2, p, -5, 5);
        let mut fl = FpFlags::new();
        let c = matmul(&a, &b, &mut fl);
        assert_eq!((c.rows(), c.cols()), (3, 2));
        assert_eq!(a.transpose().transpose(), a);
        // (AB)ᵀ entries equal BᵀAᵀ entries: both round the same products
        // and the same sums.
        let ct = matmul(&b.transpose(), &a.transpose(), &mut fl);
        assert_eq!(c.transpose(), ct);
    }

    #[test]
    #[should_panic(expected = "shape mismatch")]
    fn matmul_rejects_bad_shapes() {
        let p = 4;
        let a = FpMatrix::zero(2, 3, p);
        let b = FpMatrix::zero(2, 3, p);
        matmul(&a, &b, &mut FpFlags::new());
    }

    #[test]
    fn relu_zeroes_negatives_exactly() {
        let p = 4;
        let m = FpMatrix::from_rows(
            vec![vec![fpn(-8, 0, p), FpNum::zero(p), fpn(9, -2, p)]],
            p,
        );
        let r = m.relu();
        assert_eq!(r.get(0, 0), FpNum::zero(p));
        assert_eq!(r.get(0, 1), FpNum::zero(p));
        assert_eq!(r.get(0, 2), fpn(9, -2, p));
    }

    #[test]
    fn softmax_rows_sum_near_one() {
        let p = 10;
        let mut rng = SplitMix64::new(0x11a1_0003);
        let beta = FpNum::one(p);
        let tol = Dyadic::new(num_bigint::BigInt::from(1), -(p as i64) + 2);
        for _ in 0..20 {
            // Entry magnitudes in [1/16, 8]: exp arguments comfortably
            // inside the representable range, so no clamping voids the
            // row-sum bound.
            let m = random_matrix(&mut rng, 4, 6, p, -(p as i64) - 3, -(p as i64) + 3);
            let mut fl = FpFlags::new();
            let s = softmax_rows(&m, &beta, &mut fl).unwrap();
            assert!(!fl.overflow);
            for sum in s.row_sums(&mut fl) {
                let err = sum.to_dyadic().sub(&Dyadic::one()).abs();
                assert!(
                    err.cmp_value(&tol) != Ordering::Greater,
                    "row sum {} too far from 1",
                    sum
                );
            }
        }
    }

    #[test]
    fn softmax_row_of_underflows_is_an_error() {
        let p = 3;
        // β·(-32) = -32 per entry: e^-32 underflows to zero at p=3, the row
        // sum is zero, and the normalization must fail loudly.
        let m = FpMatrix::from_rows(vec![vec![fpn(-4, 3, p), fpn(-4, 3, p)]], p);
        let mut fl = FpFlags::new();
        assert_eq!(
            softmax_rows(&m, &FpNum::one(p), &mut fl),
            Err(FpError::DivisionByZero)
        );
        assert!(fl.underflow);
    }

    #[test]
    fn softmax_cols_is_transposed_rows() {
        let p = 8;
        let mut rng = SplitMix64::new(0x11a1_0004);
        let m = random_matrix(&mut rng, 3, 5, p, -4, 1);
        let beta = FpNum::one(p);
        let mut fl = FpFlags::new();
        let by_cols = softmax_cols(&m, &beta, &mut fl).unwrap();
        let expect = softmax_rows(&m.transpose(), &beta, &mut fl)
            .unwrap()
            .transpose();
        assert_eq!(by_cols, expect);
    }

    #[test]
    fn lse_of_two_zeros_is_rounded_ln2() {
        let p = 10;
        let mut fl = FpFlags::new();
        let z = FpNum::zero(p);
        let v = lse(&FpNum::one(p), &[z, z], &mut fl);
        assert_eq!(v, fpn(710, -10, p)); // ln 2 ≈ 710/1024
        assert!(!fl.any());
    }

    #[test]
    fn fixture_round_trip() {
        let p = 5;
        let mut rng = SplitMix64::new(0x11a1_0005);
        let m = random_matrix(&mut rng, 4, 3, p, -30, 30);
        let text = m.fixture_string();
        let back = FpMatrix::parse_fixture(&text).unwrap();
        assert_eq!(back, m);
        assert!(text.starts_with("4 3 5\n"));
    }

    #[test]
    fn fixture_rejects_garbage() {
        assert!(FpMatrix::parse_fixture("").is_err());
        assert!(FpMatrix::parse_fixture("2 2\n1:0 1:0\n1:0 1:0\n").is_err());
        assert!(FpMatrix::parse_fixture("1 1 3\n5\n").is_err());
        assert!(FpMatrix::parse_fixture("1 2 3\n4:0\n").is_err()); // missing entry
        assert!(FpMatrix::parse_fixture("1 1 3\n3:0\n").is_err()); // denormalized
    }

    #[test]
    fn add_scale_neg_entrywise() {
        let p = 4;
        let a = FpMatrix::from_rows(vec![vec![fpn(8, -3, p), fpn(12, -3, p)]], p);
        let b = FpMatrix::from_rows(vec![vec![fpn(8, -3, p), fpn(-12, -3, p)]], p);
        let mut fl = FpFlags::new();
        let s = a.add(&b, &mut fl);
        assert_eq!(s.get(0, 0), fpn(8, -2, p)); // 1 + 1 = 2
        assert_eq!(s.get(0, 1), FpNum::zero(p));
        let two = fpn(8, -2, p);
        let d = a.scale(&two, &mut fl);
        assert_eq!(d.get(0, 0), fpn(8, -2, p)); // 2·1 = 2
        assert_eq!(a.neg().neg(), a);
    }

    #[test]
    fn max_abs_diff_reports_largest_gap() {
        let p = 4;
        let a = FpMatrix::from_rows(vec![vec![fpn(8, 0, p), fpn(8, -3, p)]], p);
        let b = FpMatrix::from_rows(vec![vec![fpn(9, 0, p), fpn(8, -3, p)]], p);
        let d = max_abs_diff(&a, &b);
        assert_eq!(d.cmp_value(&Dyadic::one()), Ordering::Equal);
    }
}
