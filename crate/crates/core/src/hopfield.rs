//! Reference semantics for Hopfield-style attention layers in p-bit
//! arithmetic.
//!
//! Everything here defines *values*: the exact sequence of rounded
//! operations a layer performs. The circuit lowering reproduces these
//! sequences gate for gate, so these functions double as the ground truth
//! an emitted circuit is checked against.
//!
//! Conventions: stored patterns are the rows of `Y` (L×d); queries/states
//! are the rows of `R` (n×d). The association matrix `P = W_Q·W_Kᵀ` is
//! formed once, then scores are `S = (R·P)·Yᵀ` — the parenthesization is
//! part of the semantics, since each matrix product rounds.

use crate::fp::{self, FpError, FpFlags, FpNum};
use crate::linalg::{self, FpMatrix, MatrixError};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum ModelError {
    #[error("β must be positive")]
    BetaNotPositive,
    #[error("shape error: {0}")]
    Shape(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Fp(#[from] FpError),
}

/// How a layer turns unnormalized attention weights into a stochastic-ish
/// matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Row-wise softmax of β·S.
    Softmax,
    /// Divide each row of A = exp(β·S) by β times its sum.
    BetaRowSum,
}

impl Normalization {
    pub fn as_str(&self) -> &'static str {
        match self {
            Normalization::Softmax => "softmax",
            Normalization::BetaRowSum => "beta_rowsum",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ModelError> {
        match s {
            "softmax" => Ok(Normalization::Softmax),
            "beta_rowsum" => Ok(Normalization::BetaRowSum),
            other => Err(ModelError::Shape(format!(
                "unknown normalization {other:?}"
            ))),
        }
    }
}

/// Weights of one Hopfield attention layer.
#[derive(Debug, Clone, PartialEq)]
pub struct HopfieldLayerParams {
    /// d×k query map.
    pub w_q: FpMatrix,
    /// d×k key map.
    pub w_k: FpMatrix,
    /// d×v value map applied after pattern mixing.
    pub w_v_tilde: FpMatrix,
    /// L×d stored patterns.
    pub y: FpMatrix,
}

impl HopfieldLayerParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let d = self.w_q.rows();
        if self.w_k.rows() != d || self.w_v_tilde.rows() != d || self.y.cols() != d {
            return Err(ModelError::Shape(format!(
                "W_Q is {}x{}, W_K {}x{}, W̃_V {}x{}, Y {}x{}: first dimensions must agree with Y's columns",
                self.w_q.rows(), self.w_q.cols(),
                self.w_k.rows(), self.w_k.cols(),
                self.w_v_tilde.rows(), self.w_v_tilde.cols(),
                self.y.rows(), self.y.cols(),
            )));
        }
        if self.w_k.cols() != self.w_q.cols() {
            return Err(ModelError::Shape(
                "W_Q and W_K must share their inner dimension".into(),
            ));
        }
        let p = self.w_q.precision();
        if [&self.w_k, &self.w_v_tilde, &self.y]
            .iter()
            .any(|m| m.precision() != p)
        {
            return Err(ModelError::Shape("mixed precisions in layer".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.w_q.rows()
    }

    pub fn precision(&self) -> fp::Precision {
        self.w_q.precision()
    }
}

fn check_beta(beta: &FpNum) -> Result<(), ModelError> {
    if beta.signum() <= 0 {
        return Err(ModelError::BetaNotPositive);
    }
    Ok(())
}

/// Raw association scores S = (R·P)·Yᵀ with P = W_Q·W_Kᵀ.
pub fn scores(
    params: &HopfieldLayerParams,
    r: &FpMatrix,
    flags: &mut FpFlags,
) -> Result<FpMatrix, ModelError> {
    params.validate()?;
    if r.cols() != params.dim() {
        return Err(ModelError::Shape(format!(
            "state is {}x{}, layer dimension is {}",
            r.rows(),
            r.cols(),
            params.dim()
        )));
    }
    let p_mat = linalg::matmul(&params.w_q, &params.w_k.transpose(), flags);
    let rp = linalg::matmul(r, &p_mat, flags);
    Ok(linalg::matmul(&rp, &params.y.transpose(), flags))
}

/// Unnormalized attention A with a_ij = exp(β·s_ij). β must be positive.
pub fn attention_matrix(
    params: &HopfieldLayerParams,
    r: &FpMatrix,
    beta: &FpNum,
    flags: &mut FpFlags,
) -> Result<FpMatrix, ModelError> {
    check_beta(beta)?;
    let s = scores(params, r, flags)?;
    let mut a = s;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            let v = fp::fp_exp(&fp::fp_mul(beta, &a.get(i, j), flags), flags);
            a.set(i, j, v);
        }
    }
    Ok(a)
}

/// One full layer: normalize the attention weights, mix the stored
/// patterns, then apply the value map: Z = (N·Y)·W̃_V.
///
/// With `BetaRowSum`, N = D⁻¹·A where D = diag(β·(row sums of A)); a zero
/// row sum (all exponentials underflowed) is a hard error. With `Softmax`
/// the two modes agree bit for bit at β = 1 and differ by ~1/β otherwise.
pub fn hopfield_layer(
    params: &HopfieldLayerParams,
    r: &FpMatrix,
    beta: &FpNum,
    norm: Normalization,
    flags: &mut FpFlags,
) -> Result<FpMatrix, ModelError> {
    check_beta(beta)?;
    let n = match norm {
        Normalization::Softmax => {
            let s = scores(params, r, flags)?;
            linalg::softmax_rows(&s, beta, flags)?
        }
        Normalization::BetaRowSum => {
            let a = attention_matrix(params, r, beta, flags)?;
            let sums = a.row_sums(flags);
            let mut n = a;
            for i in 0..n.rows() {
                let d_i = fp::fp_mul(beta, &sums[i], flags);
                for j in 0..n.cols() {
                    let q = fp::fp_div(&n.get(i, j), &d_i, flags)?;
                    n.set(i, j, q);
                }
            }
            n
        }
    };
    let mixed = linalg::matmul(&n, &params.y, flags);
    Ok(linalg::matmul(&mixed, &params.w_v_tilde, flags))
}

/// Two-layer feed-forward block with ReLU: W₂·relu(W₁·x + b₁) + b₂.
#[derive(Debug, Clone, PartialEq)]
pub struct FnnParams {
    /// h×d.
    pub w1: FpMatrix,
    /// h×1.
    pub b1: FpMatrix,
    /// o×h.
    pub w2: FpMatrix,
    /// o×1.
    pub b2: FpMatrix,
}

impl FnnParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let h = self.w1.rows();
        if self.b1.rows() != h || self.b1.cols() != 1 {
            return Err(ModelError::Shape("b₁ must be h×1".into()));
        }
        if self.w2.cols() != h {
            return Err(ModelError::Shape("W₂ columns must match W₁ rows".into()));
        }
        if self.b2.rows() != self.w2.rows() || self.b2.cols() != 1 {
            return Err(ModelError::Shape("b₂ must be o×1".into()));
        }
        Ok(())
    }

    pub fn in_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.w2.rows()
    }
}

/// Add a column vector to every column of `m` (one rounded add per entry).
fn add_broadcast_col(m: &FpMatrix, b: &FpMatrix, flags: &mut FpFlags) -> FpMatrix {
    assert_eq!(m.rows(), b.rows(), "bias length mismatch");
    assert_eq!(b.cols(), 1, "bias must be a column");
    let mut out = m.clone();
    for i in 0..out.rows() {
        for j in 0..out.cols() {
            let v = fp::fp_add(&out.get(i, j), &b.get(i, 0), flags);
            out.set(i, j, v);
        }
    }
    out
}

/// Feed-forward on column vectors: x is d×c (each column an input).
pub fn fnn_forward(
    params: &FnnParams,
    x: &FpMatrix,
    flags: &mut FpFlags,
) -> Result<FpMatrix, ModelError> {
    params.validate()?;
    if x.rows() != params.in_dim() {
        return Err(ModelError::Shape(format!(
            "input is {}x{}, FNN expects {} rows",
            x.rows(),
            x.cols(),
            params.in_dim()
        )));
    }
    let pre = add_broadcast_col(&linalg::matmul(&params.w1, x, flags), &params.b1, flags);
    let hidden = pre.relu();
    Ok(add_broadcast_col(
        &linalg::matmul(&params.w2, &hidden, flags),
        &params.b2,
        flags,
    ))
}

/// Per-block post-processing in a multi-layer network. The FNN variant acts
/// on each state row (the layer output is transposed through it).
#[derive(Debug, Clone, PartialEq)]
pub enum Component {
    Identity,
    Fnn(FnnParams),
}

impl Component {
    pub fn apply(&self, z: &FpMatrix, flags: &mut FpFlags) -> Result<FpMatrix, ModelError> {
        match self {
            Component::Identity => Ok(z.clone()),
            Component::Fnn(f) => {
                if f.out_dim() != z.cols() {
                    return Err(ModelError::Shape(
                        "component FNN must map the state dimension to itself".into(),
                    ));
                }
                Ok(fnn_forward(f, &z.transpose(), flags)?.transpose())
            }
        }
    }
}

/// A stack of m Hopfield blocks, each followed by its component map:
/// R ← f_i(HopfieldLayer_i(R)).
#[derive(Debug, Clone, PartialEq)]
pub struct MhnParams {
    pub blocks: Vec<(HopfieldLayerParams, Component)>,
    pub beta: FpNum,
    pub norm: Normalization,
}

pub fn mhn_forward(
    net: &MhnParams,
    r: &FpMatrix,
    flags: &mut FpFlags,
) -> Result<FpMatrix, ModelError> {
    let mut state = r.clone();
    for (layer, comp) in &net.blocks {
        let z = hopfield_layer(layer, &state, &net.beta, net.norm, flags)?;
        state = comp.apply(&z, flags)?;
    }
    Ok(state)
}

/// One retrieval update toward the stored patterns (columns of Ξ, d×M):
/// x ← Ξ·softmax_cols(β·Ξᵀ·x). The query x may be a d×L batch.
pub fn retrieval_step(
    xi: &FpMatrix,
    x: &FpMatrix,
    beta: &FpNum,
    flags: &mut FpFlags,
) -> Result<FpMatrix, ModelError> {
    check_beta(beta)?;
    if x.rows() != xi.rows() {
        return Err(ModelError::Shape(format!(
            "patterns have dimension {}, query has {}",
            xi.rows(),
            x.rows()
        )));
    }
    let s = linalg::matmul(&xi.transpose(), x, flags);
    let n = linalg::softmax_cols(&s, beta, flags)?;
    Ok(linalg::matmul(xi, &n, flags))
}

/// Network energy at state x (d×1):
/// E = -lse(β, Ξᵀx) + ½⟨x, x⟩,
/// with the log-sum-exp evaluated in extended precision and the quadratic
/// term in ordinary p-bit arithmetic (squares, one exact sum, exact halving).
pub fn energy(
    xi: &FpMatrix,
    x: &FpMatrix,
    beta: &FpNum,
    flags: &mut FpFlags,
) -> Result<FpNum, ModelError> {
    check_beta(beta)?;
    if x.cols() != 1 || x.rows() != xi.rows() {
        return Err(ModelError::Shape("energy expects a d×1 state".into()));
    }
    let p = x.precision();
    let s = linalg::matmul(&xi.transpose(), x, flags);
    let scores: Vec<FpNum> = (0..s.rows()).map(|i| s.get(i, 0)).collect();
    let l = linalg::lse(beta, &scores, flags);
    let squares: Vec<FpNum> = (0..x.rows())
        .map(|i| fp::fp_mul(&x.get(i, 0), &x.get(i, 0), flags))
        .collect();
    let norm2 = fp::iter_add(p, &squares, flags);
    let half = FpNum::new(1i64 << (p - 1), -(p as i64), p).expect("half is representable");
    let quad = fp::fp_mul(&half, &norm2, flags);
    Ok(fp::fp_add(&l.neg(), &quad, flags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fp::Dyadic;
    use crate::linalg::random_matrix;
    use crate::rng::SplitMix64;
    use std::cmp::Ordering;

    fn fpn(m: i64, e: i64, p: u32) -> FpNum {
        FpNum::new(m, e, p).unwrap()
    }

    /// Small random layer: d-dim, L patterns, shared inner dimension k = d,
    /// entries scaled to keep β·scores tame.
    fn random_layer(
        rng: &mut SplitMix64,
        d: usize,
        l: usize,
        p: u32,
    ) -> HopfieldLayerParams {
        let lo = -(p as i64) - 3;
        let hi = -(p as i64);
        HopfieldLayerParams {
            w_q: random_matrix(rng, d, d, p, lo, hi),
            w_k: random_matrix(rng, d, d, p, lo, hi),
            w_v_tilde: random_matrix(rng, d, d, p, lo, hi),
            y: random_matrix(rng, l, d, p, lo, hi),
        }
    }

    #[test]
    fn beta_must_be_positive() {
        let p = 10;
        let mut rng = SplitMix64::new(0x40f1_0001);
        let layer = random_layer(&mut rng, 2, 3, p);
        let r = random_matrix(&mut rng, 1, 2, p, -12, -10);
        let mut fl = FpFlags::new();
        for bad in [FpNum::zero(p), FpNum::one(p).neg()] {
            assert_eq!(
                attention_matrix(&layer, &r, &bad, &mut fl),
                Err(ModelError::BetaNotPositive)
            );
            assert_eq!(
                hopfield_layer(&layer, &r, &bad, Normalization::Softmax, &mut fl),
                Err(ModelError::BetaNotPositive)
            );
            assert_eq!(
                retrieval_step(&r.transpose(), &r.transpose(), &bad, &mut fl),
                Err(ModelError::BetaNotPositive)
            );
            assert_eq!(
                energy(&r.transpose(), &r.transpose(), &bad, &mut fl),
                Err(ModelError::BetaNotPositive)
            );
        }
    }

    #[test]
    fn shape_validation_catches_mismatches() {
        let p = 6;
        let layer = HopfieldLayerParams {
            w_q: FpMatrix::identity(2, p),
            w_k: FpMatrix::identity(3, p), // wrong: rows must be d = 2
            w_v_tilde: FpMatrix::identity(2, p),
            y: FpMatrix::identity(2, p),
        };
        assert!(matches!(layer.validate(), Err(ModelError::Shape(_))));
        let mut fl = FpFlags::new();
        let r = FpMatrix::zero(1, 5, p);
        let good = HopfieldLayerParams {
            w_q: FpMatrix::identity(2, p),
            w_k: FpMatrix::identity(2, p),
            w_v_tilde: FpMatrix::identity(2, p),
            y: FpMatrix::identity(2, p),
        };
        assert!(matches!(
            scores(&good, &r, &mut fl),
            Err(ModelError::Shape(_))
        ));
    }

    #[test]
    fn attention_matches_explicit_scalar_loops() {
        let p = 10;
        let mut rng = SplitMix64::new(0x40f1_0002);
        let layer = random_layer(&mut rng, 3, 4, p);
        let r = random_matrix(&mut rng, 2, 3, p, -(p as i64) - 3, -(p as i64));
        let beta = FpNum::one(p);
        let mut fl = FpFlags::new();
        let a = attention_matrix(&layer, &r, &beta, &mut fl).unwrap();

        // Recompute with nothing but scalar fp ops, same parenthesization.
        let mut fl2 = FpFlags::new();
        let dot = |xs: &[FpNum], ys: &[FpNum], fl: &mut FpFlags| {
            let prods: Vec<FpNum> = xs
                .iter()
                .zip(ys)
                .map(|(a, b)| fp::fp_mul(a, b, fl))
                .collect();
            fp::iter_add(p, &prods, fl)
        };
        let d = 3;
        let mut pm = vec![vec![FpNum::zero(p); d]; d];
        for i in 0..d {
            for j in 0..d {
                let wq_row: Vec<FpNum> = (0..d).map(|k| layer.w_q.get(i, k)).collect();
                let wk_row: Vec<FpNum> = (0..d).map(|k| layer.w_k.get(j, k)).collect();
                pm[i][j] = dot(&wq_row, &wk_row, &mut fl2);
            }
        }
        for qi in 0..2 {
            let r_row: Vec<FpNum> = (0..d).map(|k| r.get(qi, k)).collect();
            let mut rp = vec![FpNum::zero(p); d];
            for j in 0..d {
                let col: Vec<FpNum> = (0..d).map(|k| pm[k][j]).collect();
                rp[j] = dot(&r_row, &col, &mut fl2);
            }
            for li in 0..4 {
                let y_row: Vec<FpNum> = (0..d).map(|k| layer.y.get(li, k)).collect();
                let s = dot(&rp, &y_row, &mut fl2);
                let want = fp::fp_exp(&fp::fp_mul(&beta, &s, &mut fl2), &mut fl2);
                assert_eq!(a.get(qi, li), want, "entry ({qi},{li})");
            }
        }
    }

    #[test]
    fn modes_agree_bit_for_bit_at_beta_one() {
        let p = 10;
        let mut rng = SplitMix64::new(0x40f1_0003);
        for _ in 0..10 {
            let layer = random_layer(&mut rng, 3, 5, p);
            let r = random_matrix(&mut rng, 2, 3, p, -(p as i64) - 3, -(p as i64));
            let beta = FpNum::one(p);
            let mut f1 = FpFlags::new();
            let mut f2 = FpFlags::new();
            let soft = hopfield_layer(&layer, &r, &beta, Normalization::Softmax, &mut f1)
                .unwrap();
            let rowsum =
                hopfield_layer(&layer, &r, &beta, Normalization::BetaRowSum, &mut f2)
                    .unwrap();
            assert_eq!(soft, rowsum);
        }
    }

    #[test]
    fn fnn_forward_matches_hand_computation() {
        let p = 10;
        // W₁ = [[1, -1], [2, 0]], b₁ = [-1, 0.5]ᵀ, W₂ = [[1, 1]], b₂ = [0.25].
        let one = FpNum::one(p);
        let two = fpn(512, -8, p);
        let half = fpn(512, -10, p);
        let quarter = fpn(512, -11, p);
        let w1 = FpMatrix::from_rows(
            vec![vec![one, one.neg()], vec![two, FpNum::zero(p)]],
            p,
        );
        let b1 = FpMatrix::column(vec![one.neg(), half], p);
        let w2 = FpMatrix::from_rows(vec![vec![one, one]], p);
        let b2 = FpMatrix::column(vec![quarter], p);
        let f = FnnParams { w1, b1, w2, b2 };
        // x = [0.5, 1]ᵀ: pre = [0.5-1-1, 1+0.5] = [-1.5, 1.5];
        // relu → [0, 1.5]; out = 0+1.5+0.25 = 1.75.
        let x = FpMatrix::column(vec![half, one], p);
        let mut fl = FpFlags::new();
        let out = fnn_forward(&f, &x, &mut fl).unwrap();
        assert_eq!(out.get(0, 0), fpn(896, -9, p)); // 1.75
        assert!(!fl.any());
    }

    #[test]
    fn fnn_rejects_bad_shapes() {
        let p = 6;
        let f = FnnParams {
            w1: FpMatrix::zero(2, 3, p),
            b1: FpMatrix::zero(2, 1, p),
            w2: FpMatrix::zero(1, 2, p),
            b2: FpMatrix::zero(1, 1, p),
        };
        let mut fl = FpFlags::new();
        assert!(fnn_forward(&f, &FpMatrix::zero(4, 1, p), &mut fl).is_err());
        let bad = FnnParams {
            b1: FpMatrix::zero(3, 1, p),
            ..f.clone()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn mhn_fold_equals_manual_chain() {
        let p = 10;
        let mut rng = SplitMix64::new(0x40f1_0004);
        let l1 = random_layer(&mut rng, 2, 3, p);
        let l2 = random_layer(&mut rng, 2, 4, p);
        let r = random_matrix(&mut rng, 2, 2, p, -(p as i64) - 3, -(p as i64));
        let beta = FpNum::one(p);
        let net = MhnParams {
            blocks: vec![
                (l1.clone(), Component::Identity),
                (l2.clone(), Component::Identity),
            ],
            beta,
            norm: Normalization::Softmax,
        };
        let mut f1 = FpFlags::new();
        let got = mhn_forward(&net, &r, &mut f1).unwrap();
        let mut f2 = FpFlags::new();
        let mid = hopfield_layer(&l1, &r, &beta, Normalization::Softmax, &mut f2).unwrap();
        let want = hopfield_layer(&l2, &mid, &beta, Normalization::Softmax, &mut f2).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn component_fnn_acts_on_rows() {
        let p = 10;
        let one = FpNum::one(p);
        // FNN computing x ↦ relu(x) entrywise on a 2-dim state:
        // W₁ = I, b₁ = 0, W₂ = I, b₂ = 0.
        let f = FnnParams {
            w1: FpMatrix::identity(2, p),
            b1: FpMatrix::zero(2, 1, p),
            w2: FpMatrix::identity(2, p),
            b2: FpMatrix::zero(2, 1, p),
        };
        let z = FpMatrix::from_rows(
            vec![vec![one.neg(), one], vec![one, one.neg()]],
            p,
        );
        let mut fl = FpFlags::new();
        let out = Component::Fnn(f).apply(&z, &mut fl).unwrap();
        assert_eq!(out.get(0, 0), FpNum::zero(p));
        assert_eq!(out.get(0, 1), one);
        assert_eq!(out.get(1, 0), one);
        assert_eq!(out.get(1, 1), FpNum::zero(p));
        assert_eq!(
            Component::Identity.apply(&z, &mut fl).unwrap(),
            z
        );
    }

    #[test]
    fn energy_of_zero_state_is_minus_log_m_over_beta() {
        // x = 0: all scores are 0, lse = ln(M)/β, quadratic term 0.
        // M = 4, β = 1, p = 10: E = -ln 4 = -1.386… → ⟨-710, -9⟩.
        let p = 10;
        let mut rng = SplitMix64::new(0x40f1_0005);
        let xi = random_matrix(&mut rng, 3, 4, p, -12, -10);
        let x = FpMatrix::zero(3, 1, p);
        let beta = FpNum::one(p);
        let mut fl = FpFlags::new();
        let e = energy(&xi, &x, &beta, &mut fl).unwrap();
        assert_eq!(e, fpn(-710, -9, p));
    }

    #[test]
    fn energy_at_single_unit_pattern_is_minus_half() {
        // One stored basis vector, x equal to it: score 1, lse = ln(e) = 1,
        // ⟨x,x⟩ = 1, E = -1 + ½ = -½.
        let p = 10;
        let one = FpNum::one(p);
        let xi = FpMatrix::column(vec![one, FpNum::zero(p), FpNum::zero(p)], p);
        let x = xi.clone();
        let mut fl = FpFlags::new();
        let e = energy(&xi, &x, &one, &mut fl).unwrap();
        assert_eq!(e, fpn(-512, -10, p)); // -½
        assert!(!fl.any());
    }

    #[test]
    fn retrieval_pulls_query_toward_nearest_pattern() {
        // Orthogonal unit patterns (basis vectors): a query near e₁ must map
        // almost exactly onto e₁ at large β.
        let p = 24;
        let d = 8;
        let m = 4;
        let mut xi = FpMatrix::zero(d, m, p);
        for j in 0..m {
            xi.set(j, j, FpNum::one(p));
        }
        let mut fl = FpFlags::new();
        // x = e₁ + 0.05·e₅ (a representable perturbation).
        let mut x = FpMatrix::zero(d, 1, p);
        x.set(0, 0, FpNum::one(p));
        let eps = crate::fp::round_ratio(
            &num_bigint::BigInt::from(1),
            &num_bigint::BigInt::from(20),
            p,
            &mut fl,
        );
        x.set(5, 0, eps);
        let beta = FpNum::new(1 << (p - 1), -(p as i64 - 1) + 5, p).unwrap(); // 32
        let out = retrieval_step(&xi, &x, &beta, &mut fl).unwrap();
        let target = {
            let mut t = FpMatrix::zero(d, 1, p);
            t.set(0, 0, FpNum::one(p));
            t
        };
        let dist = linalg::max_abs_diff(&out, &target);
        let tol = Dyadic::from_f64(1e-2);
        assert_eq!(dist.cmp_value(&tol), Ordering::Less, "distance {}", dist.to_f64());
    }

    #[test]
    fn retrieval_accepts_batched_queries() {
        let p = 10;
        let mut rng = SplitMix64::new(0x40f1_0006);
        let xi = random_matrix(&mut rng, 4, 3, p, -12, -10);
        let batch = random_matrix(&mut rng, 4, 5, p, -12, -10);
        let beta = FpNum::one(p);
        let mut fl = FpFlags::new();
        let out = retrieval_step(&xi, &batch, &beta, &mut fl).unwrap();
        assert_eq!((out.rows(), out.cols()), (4, 5));
        // Column j of the batch result equals the single-query result.
        for j in 0..5 {
            let col = FpMatrix::column((0..4).map(|i| batch.get(i, j)).collect(), p);
            let single = retrieval_step(&xi, &col, &beta, &mut fl).unwrap();
            for i in 0..4 {
                assert_eq!(out.get(i, j), single.get(i, 0), "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn normalization_parse_round_trip() {
        for n in [Normalization::Softmax, Normalization::BetaRowSum] {
            assert_eq!(Normalization::parse(n.as_str()).unwrap(), n);
        }
        assert!(Normalization::parse("l2").is_err());
    }
}
