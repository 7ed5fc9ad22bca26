//! Kernelized Hopfield layers: queries and keys are compared through a
//! learned feature map x ↦ W·x, so the similarity is the kernel
//! K(a, b) = ⟨W·a, W·b⟩ = aᵀ·(WᵀW)·b.
//!
//! The implementation pins one parenthesization: the Gram matrix
//! G = WᵀW is formed first, then P_K = (W_Q·G)·W_Kᵀ, then scores
//! S = (R·P_K)·Yᵀ — five sequential rounded matrix products end to end.
//! Besides fixing the rounding order, this makes the W = I reduction
//! *bit-exact*: multiplying by an identity is an exact pass-through in this
//! arithmetic (1·x = x, 0·x = 0, and a one-term sum rounds to itself), so
//! G = I and every kernelized operation collapses to its plain counterpart
//! representation for representation.

use crate::fp::{self, FpFlags, FpNum};
use crate::hopfield::{
    self, HopfieldLayerParams, ModelError, Normalization,
};
use crate::linalg::{self, FpMatrix};

/// A Hopfield layer plus the feature map W (D_Φ×k, where k is the shared
/// inner dimension of W_Q and W_K; D_Φ = k unless the feature space is
/// widened or narrowed).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelLayerParams {
    pub base: HopfieldLayerParams,
    pub w: FpMatrix,
}

impl KernelLayerParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.base.validate()?;
        if self.w.cols() != self.base.w_q.cols() {
            return Err(ModelError::Shape(format!(
                "feature map W is {}x{}, but W_Q/W_K have inner dimension {}",
                self.w.rows(),
                self.w.cols(),
                self.base.w_q.cols()
            )));
        }
        if self.w.precision() != self.base.precision() {
            return Err(ModelError::Shape("feature map precision mismatch".into()));
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.w.rows()
    }

    /// Gram matrix G = WᵀW (k×k), one rounded matrix product.
    pub fn gram(&self, flags: &mut FpFlags) -> FpMatrix {
        linalg::matmul(&self.w.transpose(), &self.w, flags)
    }
}

/// Kernelized association scores S = (R·((W_Q·G)·W_Kᵀ))·Yᵀ with G = WᵀW.
pub fn kernel_scores(
    params: &KernelLayerParams,
    r: &FpMatrix,
    flags: &mut FpFlags,
) -> Result<FpMatrix, ModelError> {
    params.validate()?;
    if r.cols() != params.base.dim() {
        return Err(ModelError::Shape(format!(
            "state is {}x{}, layer dimension is {}",
            r.rows(),
            r.cols(),
            params.base.dim()
        )));
    }
    let g = params.gram(flags);
    let wqg = linalg::matmul(&params.base.w_q, &g, flags);
    let pk = linalg::matmul(&wqg, &params.base.w_k.transpose(), flags);
    let rp = linalg::matmul(r, &pk, flags);
    Ok(linalg::matmul(&rp, &params.base.y.transpose(), flags))
}

/// Unnormalized kernel attention, a_ij = exp(β·s_ij).
pub fn kernel_attention_matrix(
    params: &KernelLayerParams,
    r: &FpMatrix,
    beta: &FpNum,
    flags: &mut FpFlags,
) -> Result<FpMatrix, ModelError> {
    if beta.signum() <= 0 {
        return Err(ModelError::BetaNotPositive);
    }
    let s = kernel_scores(params, r, flags)?;
    let mut a = s;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            let v = fp::fp_exp(&fp::fp_mul(beta, &a.get(i, j), flags), flags);
            a.set(i, j, v);
        }
    }
    Ok(a)
}

/// Full kernelized layer: normalize, mix patterns, apply the value map —
/// Z = (N·Y)·W̃_V with N from the chosen normalization of the kernel scores.
pub fn kernel_hopfield_layer(
    params: &KernelLayerParams,
    r: &FpMatrix,
    beta: &FpNum,
    norm: Normalization,
    flags: &mut FpFlags,
) -> Result<FpMatrix, ModelError> {
    if beta.signum() <= 0 {
        return Err(ModelError::BetaNotPositive);
    }
    let n = match norm {
        Normalization::Softmax => {
            let s = kernel_scores(params, r, flags)?;
            linalg::softmax_rows(&s, beta, flags)?
        }
        Normalization::BetaRowSum => {
            let a = kernel_attention_matrix(params, r, beta, flags)?;
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
    let mixed = linalg::matmul(&n, &params.base.y, flags);
    Ok(linalg::matmul(&mixed, &params.base.w_v_tilde, flags))
}

/// Multi-layer kernelized network: blocks of (kernel layer, component map).
#[derive(Debug, Clone, PartialEq)]
pub struct KhnParams {
    pub blocks: Vec<(KernelLayerParams, hopfield::Component)>,
    pub beta: FpNum,
    pub norm: Normalization,
}

pub fn khn_forward(
    net: &KhnParams,
    r: &FpMatrix,
    flags: &mut FpFlags,
) -> Result<FpMatrix, ModelError> {
    let mut state = r.clone();
    for (layer, comp) in &net.blocks {
        let z = kernel_hopfield_layer(layer, &state, &net.beta, net.norm, flags)?;
        state = comp.apply(&z, flags)?;
    }
    Ok(state)
}

/// Kernelized retrieval update: x ← Ξ·softmax_cols(β·Ξᵀ·(G·x)).
/// The Gram matrix applies to the query side; patterns Ξ are d×M columns
/// and x may be a d×L batch.
pub fn kernel_retrieval_step(
    xi: &FpMatrix,
    w: &FpMatrix,
    x: &FpMatrix,
    beta: &FpNum,
    flags: &mut FpFlags,
) -> Result<FpMatrix, ModelError> {
    if beta.signum() <= 0 {
        return Err(ModelError::BetaNotPositive);
    }
    if w.cols() != xi.rows() || x.rows() != xi.rows() {
        return Err(ModelError::Shape(
            "kernel retrieval needs W: D_Φ×d, Ξ: d×M, x: d×L".into(),
        ));
    }
    let g = linalg::matmul(&w.transpose(), w, flags);
    let gx = linalg::matmul(&g, x, flags);
    let s = linalg::matmul(&xi.transpose(), &gx, flags);
    let n = linalg::softmax_cols(&s, beta, flags)?;
    Ok(linalg::matmul(xi, &n, flags))
}

/// Kernelized energy at state x (d×1):
/// E_K = ½·K(x, x) + lse(β, Ξᵀ·(G·x)),
/// with K(x, x) = ⟨W·x, W·x⟩ evaluated as p-bit squares and one exact sum.
///
/// Note the sign: this follows the kernelized convention as stated, whose
/// log-sum-exp term enters with the opposite sign from [`hopfield::energy`].
/// Consequently E_K at W = I is *not* the plain energy, even though every
/// other kernelized operation collapses bit-exactly.
pub fn kernel_energy(
    xi: &FpMatrix,
    w: &FpMatrix,
    x: &FpMatrix,
    beta: &FpNum,
    flags: &mut FpFlags,
) -> Result<FpNum, ModelError> {
    if beta.signum() <= 0 {
        return Err(ModelError::BetaNotPositive);
    }
    if x.cols() != 1 || x.rows() != xi.rows() || w.cols() != xi.rows() {
        return Err(ModelError::Shape("kernel energy expects W: D_Φ×d, x: d×1".into()));
    }
    let p = x.precision();
    let g = linalg::matmul(&w.transpose(), w, flags);
    let gx = linalg::matmul(&g, x, flags);
    let s = linalg::matmul(&xi.transpose(), &gx, flags);
    let scores: Vec<FpNum> = (0..s.rows()).map(|i| s.get(i, 0)).collect();
    let l = linalg::lse(beta, &scores, flags);
    let wx = linalg::matmul(w, x, flags);
    let squares: Vec<FpNum> = (0..wx.rows())
        .map(|i| fp::fp_mul(&wx.get(i, 0), &wx.get(i, 0), flags))
        .collect();
    let k_xx = fp::iter_add(p, &squares, flags);
    let half = FpNum::new(1i64 << (p - 1), -(p as i64), p).expect("half is representable");
    let quad = fp::fp_mul(&half, &k_xx, flags);
    Ok(fp::fp_add(&quad, &l, flags))
}
