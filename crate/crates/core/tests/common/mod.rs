//! Independent oracles for the acceptance suite.
//!
//! Everything here recomputes expected results from scratch: exact i128
//! fixed-point arithmetic for the small-precision sweeps, high-precision
//! integer series for exp and sqrt, brute-force search for the problem
//! oracles, and a hand-rolled self-attention reference. Values from the
//! crate under test are only constructed and destructured, never pushed
//! through its arithmetic.

use hopcirc_core::fp::{self, FpFlags, FpNum, Precision};
use hopcirc_core::linalg::FpMatrix;
use hopcirc_core::problems::{Perm5, Tree};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use std::collections::VecDeque;

/// Every value of F_p, zero included, in no particular order.
pub fn all_values(p: Precision) -> Vec<FpNum> {
    let mut out = vec![FpNum::zero(p)];
    for m in -((1i64 << p) - 1)..=((1i64 << p) - 1) {
        if m == 0 {
            continue;
        }
        for e in fp::exp_min(p)..=fp::exp_max(p) {
            if let Ok(v) = FpNum::new(m, e, p) {
                out.push(v);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Exact fixed-point oracle for small p. Reals are i128 multiples of 2^-SCALE;
// at p = 3 exponents of values and of two-term products stay >= -16, so
// SCALE = 40 represents everything exactly with room for midpoints.
// ---------------------------------------------------------------------------

pub const SCALE: i64 = 40;

/// The exact real value of `v`, as an integer multiple of 2^-SCALE.
pub fn exact_scaled(v: &FpNum) -> i128 {
    let sh = SCALE + v.exponent();
    assert!(sh >= 0, "value too fine for the fixed-point scale");
    (v.significand() as i128) << sh
}

/// The exact product of two values, as an integer multiple of 2^-SCALE.
pub fn exact_product_scaled(x: &FpNum, y: &FpNum) -> i128 {
    if x.is_zero() || y.is_zero() {
        return 0;
    }
    let sh = SCALE + x.exponent() + y.exponent();
    assert!(sh >= 0, "product too fine for the fixed-point scale");
    (x.significand() as i128 * y.significand() as i128) << sh
}

/// All values of one F_p sorted by exact value, supporting round-to-nearest
/// by direct scan: ties go to the even significand, a tie between two even
/// significands (only ever 0 versus ±minpos) goes toward zero, and anything
/// beyond the largest finite value clamps.
pub struct ValueTable {
    vals: Vec<(i128, FpNum)>,
}

impl ValueTable {
    pub fn new(p: Precision) -> ValueTable {
        let mut vals: Vec<(i128, FpNum)> =
            all_values(p).iter().map(|v| (exact_scaled(v), *v)).collect();
        vals.sort_by_key(|&(k, _)| k);
        for w in vals.windows(2) {
            assert!(w[0].0 < w[1].0, "duplicate value in table");
        }
        ValueTable { vals }
    }

    pub fn entries(&self) -> &[(i128, FpNum)] {
        &self.vals
    }

    /// Round an exact multiple of 2^-SCALE to the nearest value.
    pub fn round_scaled(&self, x: i128) -> FpNum {
        let n = self.vals.len();
        if x <= self.vals[0].0 {
            return self.vals[0].1;
        }
        if x >= self.vals[n - 1].0 {
            return self.vals[n - 1].1;
        }
        let idx = self.vals.partition_point(|&(k, _)| k < x);
        if self.vals[idx].0 == x {
            return self.vals[idx].1;
        }
        let (klo, lo) = self.vals[idx - 1];
        let (khi, hi) = self.vals[idx];
        let dlo = x - klo;
        let dhi = khi - x;
        if dlo < dhi {
            return lo;
        }
        if dhi < dlo {
            return hi;
        }
        let lo_even = lo.significand() % 2 == 0;
        let hi_even = hi.significand() % 2 == 0;
        match (lo_even, hi_even) {
            (true, false) => lo,
            (false, true) => hi,
            // Both even happens only around zero; take the smaller magnitude.
            (true, true) => {
                if klo.abs() <= khi.abs() {
                    lo
                } else {
                    hi
                }
            }
            (false, false) => unreachable!("adjacent odd significands"),
        }
    }
}

// ---------------------------------------------------------------------------
// High-precision oracles for exp and sqrt. Results are (s, k) pairs meaning
// s * 2^(k - prec) with s a positive integer of about prec bits, so huge
// output exponents never materialize as huge integers.
// ---------------------------------------------------------------------------

fn shr_trunc(x: &BigInt, s: u64) -> BigInt {
    if x.is_negative() {
        -((-x) >> s)
    } else {
        x >> s
    }
}

fn shl_signed(x: &BigInt, s: i64) -> BigInt {
    if s >= 0 {
        x << (s as u64)
    } else {
        shr_trunc(x, (-s) as u64)
    }
}

/// ln 2 scaled by 2^prec, via ln 2 = 2·atanh(1/3) = Σ 2 / ((2k+1)·3^(2k+1)).
/// Each term contributes at most one unit of truncation, and the series
/// gains over three bits per term, so the result is accurate to well within
/// prec - 8 bits.
pub fn oracle_ln2(prec: u32) -> BigInt {
    let two: BigInt = BigInt::from(2) << prec;
    let mut acc = BigInt::zero();
    let mut p3 = BigInt::from(3);
    let mut k = 0u32;
    loop {
        let term = &two / (&p3 * (2 * k + 1));
        if term.is_zero() {
            break;
        }
        acc += term;
        p3 *= 9;
        k += 1;
        assert!(k < 4 * prec, "ln2 series failed to converge");
    }
    acc
}

/// e^x for a p-bit x, as s·2^(k-prec): argument reduction by ln 2, then the
/// Taylor series on the remainder |r| <= ln(2)/2, all in truncating
/// fixed-point arithmetic at prec bits.
pub fn oracle_exp(x: &FpNum, prec: u32, ln2: &BigInt) -> (BigInt, i64) {
    let xs = shl_signed(
        &BigInt::from(x.significand()),
        prec as i64 + x.exponent(),
    );
    // Nearest integer to xs / ln2; the half-way direction is irrelevant.
    let k_big = (&xs * 2u32 + ln2).div_floor(&(ln2 * 2u32));
    let k = k_big.to_i64().expect("reduction count fits i64");
    let r = &xs - ln2 * &k_big;
    let mut sum: BigInt = BigInt::from(1) << prec;
    let mut term = sum.clone();
    let mut j = 1u32;
    loop {
        term = shr_trunc(&(&term * &r), prec as u64) / j;
        if term.is_zero() {
            break;
        }
        sum += &term;
        j += 1;
        assert!(j < 4 * prec, "exp series failed to converge");
    }
    (sum, k)
}

/// sqrt(x) for a positive p-bit x, as s·2^(k-prec), by integer square root
/// of the significand shifted to even exponent.
pub fn oracle_sqrt(x: &FpNum, prec: u32) -> (BigInt, i64) {
    assert!(x.signum() > 0, "sqrt oracle needs a positive input");
    let (mut m, mut e) = (x.significand(), x.exponent());
    if e.rem_euclid(2) != 0 {
        m *= 2;
        e -= 1;
    }
    let s = (BigInt::from(m) << (2 * prec)).sqrt();
    (s, e / 2)
}

/// Whether |y - v| <= v·2^-p for the oracle value v = s·2^(k-prec) > 0.
pub fn within_rel_pow2(y: &FpNum, s: &BigInt, k: i64, prec: u32, p: Precision) -> bool {
    let shift = y.exponent() - k + prec as i64;
    let t = shl_signed(&BigInt::from(y.significand()), shift);
    let diff = if t >= *s { &t - s } else { s - &t };
    (diff << p) <= *s
}

// ---------------------------------------------------------------------------
// Hand-rolled self-attention reference. Matrix products follow the same
// contract as the library (each scalar product rounded once, each row sum
// accumulated exactly and rounded once) but through freshly written loops,
// and the layer is assembled here from scalar operations only.
// ---------------------------------------------------------------------------

pub fn ref_matmul(a: &FpMatrix, b: &FpMatrix, flags: &mut FpFlags) -> FpMatrix {
    assert_eq!(a.cols(), b.rows());
    let p = a.precision();
    let mut out = FpMatrix::zero(a.rows(), b.cols(), p);
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let prods: Vec<FpNum> = (0..a.cols())
                .map(|k| fp::fp_mul(&a.get(i, k), &b.get(k, j), flags))
                .collect();
            out.set(i, j, fp::iter_add(p, &prods, flags));
        }
    }
    out
}

fn ref_transpose(a: &FpMatrix) -> FpMatrix {
    let mut out = FpMatrix::zero(a.cols(), a.rows(), a.precision());
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            out.set(j, i, a.get(i, j));
        }
    }
    out
}

fn ref_softmax_rows(s: &FpMatrix, beta: &FpNum, flags: &mut FpFlags) -> FpMatrix {
    let p = s.precision();
    let mut out = FpMatrix::zero(s.rows(), s.cols(), p);
    for i in 0..s.rows() {
        let exps: Vec<FpNum> = (0..s.cols())
            .map(|j| fp::fp_exp(&fp::fp_mul(beta, &s.get(i, j), flags), flags))
            .collect();
        let sum = fp::iter_add(p, &exps, flags);
        for (j, e) in exps.iter().enumerate() {
            let q = fp::fp_div(e, &sum, flags).expect("softmax row sum is positive");
            out.set(i, j, q);
        }
    }
    out
}

/// Self-attention over token states Y with tied key/query inputs:
/// softmax_rows(β · Y·(W_Q·W_Kᵀ)·Yᵀ) · Y · W_V. Evaluation order matters in
/// finite precision, so this fixes the same association the library
/// documents; every loop here is independent of the library's matrix and
/// softmax code.
pub fn ref_self_attention(
    y: &FpMatrix,
    w_q: &FpMatrix,
    w_k: &FpMatrix,
    w_v: &FpMatrix,
    beta: &FpNum,
    flags: &mut FpFlags,
) -> FpMatrix {
    let p_mat = ref_matmul(w_q, &ref_transpose(w_k), flags);
    let yp = ref_matmul(y, &p_mat, flags);
    let s = ref_matmul(&yp, &ref_transpose(y), flags);
    let n = ref_softmax_rows(&s, beta, flags);
    let mixed = ref_matmul(&n, y, flags);
    ref_matmul(&mixed, w_v, flags)
}

// ---------------------------------------------------------------------------
// Problem oracles: breadth-first search, brute-force rooted-tree
// isomorphism, an exhaustive rooted-shape enumerator, and pointwise
// permutation application.
// ---------------------------------------------------------------------------

/// Whether u and v are connected in the graph induced by the edge list.
pub fn bfs_connected(edges: &[(u32, u32)], u: u32, v: u32) -> bool {
    if u == v {
        return true;
    }
    let mut adj: std::collections::HashMap<u32, Vec<u32>> = std::collections::HashMap::new();
    for &(a, b) in edges {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut seen = std::collections::HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(u);
    queue.push_back(u);
    while let Some(w) = queue.pop_front() {
        if w == v {
            return true;
        }
        for &x in adj.get(&w).into_iter().flatten() {
            if seen.insert(x) {
                queue.push_back(x);
            }
        }
    }
    false
}

/// Rooted colored tree isomorphism by backtracking over child matchings.
pub fn trees_isomorphic_bruteforce(a: &Tree, b: &Tree) -> bool {
    if a.size() != b.size() {
        return false;
    }
    nodes_match(a, a.root, b, b.root)
}

fn nodes_match(a: &Tree, na: usize, b: &Tree, nb: usize) -> bool {
    if a.colors[na] != b.colors[nb] {
        return false;
    }
    let ca = &a.children[na];
    let cb = &b.children[nb];
    if ca.len() != cb.len() {
        return false;
    }
    let mut used = vec![false; cb.len()];
    assign(a, ca, 0, b, cb, &mut used)
}

fn assign(a: &Tree, ca: &[usize], i: usize, b: &Tree, cb: &[usize], used: &mut [bool]) -> bool {
    if i == ca.len() {
        return true;
    }
    for j in 0..cb.len() {
        if !used[j] && nodes_match(a, ca[i], b, cb[j]) {
            used[j] = true;
            if assign(a, ca, i + 1, b, cb, used) {
                return true;
            }
            used[j] = false;
        }
    }
    false
}

/// All rooted unlabeled tree shapes with 1..=max_n nodes (single color),
/// grouped by node count. Children are chosen as multisets of smaller
/// shapes, so each shape appears exactly once per size class.
pub fn rooted_shapes(max_n: usize) -> Vec<Vec<Tree>> {
    let mut by_size: Vec<Vec<Tree>> = vec![Vec::new(); max_n + 1];
    if max_n >= 1 {
        by_size[1] = vec![Tree {
            root: 0,
            colors: vec![1],
            children: vec![Vec::new()],
        }];
    }
    for k in 2..=max_n {
        let mut acc = Vec::new();
        let mut current = Vec::new();
        pick_children(&by_size, k - 1, (1, 0), &mut current, &mut acc);
        by_size[k] = acc;
    }
    by_size
}

fn pick_children(
    by_size: &[Vec<Tree>],
    remaining: usize,
    min_key: (usize, usize),
    current: &mut Vec<(usize, usize)>,
    acc: &mut Vec<Tree>,
) {
    if remaining == 0 {
        acc.push(assemble(by_size, current));
        return;
    }
    for size in min_key.0..=remaining {
        let start = if size == min_key.0 { min_key.1 } else { 0 };
        for idx in start..by_size[size].len() {
            current.push((size, idx));
            pick_children(by_size, remaining - size, (size, idx), current, acc);
            current.pop();
        }
    }
}

fn assemble(by_size: &[Vec<Tree>], picks: &[(usize, usize)]) -> Tree {
    let mut colors = vec![1u32];
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    for &(size, idx) in picks {
        let sub = &by_size[size][idx];
        let off = colors.len();
        children[0].push(sub.root + off);
        for i in 0..sub.size() {
            colors.push(sub.colors[i]);
            children.push(sub.children[i].iter().map(|&j| j + off).collect());
        }
    }
    Tree { root: 0, colors, children }
}

/// Whether the word composes to the identity, checked by applying each
/// permutation to every point in turn.
pub fn word_is_identity(word: &[Perm5]) -> bool {
    (1u8..=5).all(|x| {
        let mut v = x;
        for p in word {
            v = p.0[(v - 1) as usize];
        }
        v == x
    })
}

// ---------------------------------------------------------------------------
// Miscellaneous helpers.
// ---------------------------------------------------------------------------

/// Nearest p-bit value to an ordinary float (moderate magnitudes only).
pub fn fp_from_f64(x: f64, p: Precision) -> FpNum {
    if x == 0.0 {
        return FpNum::zero(p);
    }
    let a = x.abs();
    let mut e = a.log2().floor() as i64 - (p as i64 - 1);
    let mut m = (a / 2f64.powi(e as i32)).round() as i64;
    if m >= 1 << p {
        m >>= 1;
        e += 1;
    }
    if x < 0.0 {
        m = -m;
    }
    FpNum::new(m, e, p).expect("conversion landed outside the normal range")
}

/// Deterministic uniform pick from a slice.
pub fn pick<'a, T>(rng: &mut hopcirc_core::rng::SplitMix64, xs: &'a [T]) -> &'a T {
    &xs[rng.next_below(xs.len() as u64) as usize]
}
