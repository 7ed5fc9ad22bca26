//! Compilation of network constructs into circuits with symbolic depth
//! accounting.
//!
//! A construct (a matrix product, an attention map, a full Hopfield layer,
//! a feed-forward block, a multi-layer stack, or any of their kernelized
//! counterparts) lowers to a circuit whose regions follow the construct's
//! stage structure: one region per rounded-product stage, per iterated
//! addition, per exponential, and so on. Measuring the lowered circuit
//! therefore yields the closed-form depth of the construct, and evaluating
//! it reproduces the reference arithmetic bit for bit.
//!
//! Two deliberate choices are visible in the output:
//!
//! * Weight-only stages (for example W_Q·W_Kᵀ, whose operands are both
//!   constants) are still emitted as gates rather than folded at compile
//!   time. The circuit is the object of study; its stage chain has to
//!   contain every rounded operation the construct performs.
//! * Multi-layer stacks enter through a buffer stage charged as a
//!   component, and every block's post-map is one component stage, so a
//!   stack of m blocks carries m+1 component charges on its critical path.
//!   Each interface stage also retimes the weight wires the next block's
//!   weight-only stages consume, the way a leveled circuit carries every
//!   live value forward through each level: block k's stages then genuinely
//!   start after block k−1 finishes, and the measured critical path of a
//!   stack is the sum of its per-block depths.

mod manifest;
mod scalar;

pub use manifest::{
    random_network, random_positive_matrix, random_signed_matrix, BlockDesc, ComponentDesc,
    FnnDesc, KernelBlockDesc, KernelLayerDesc, LayerDesc, MatrixDesc, NetworkDesc, NetworkError,
    ResolvedNetwork,
};

use crate::circuit::{Circuit, DepthExpr, EvalError, GateId, RegionId};
use crate::encoding;
use crate::fp::{FpNum, Precision};
use crate::hopfield::{Component, FnnParams, HopfieldLayerParams, Normalization};
use crate::kernel::KernelLayerParams;
use crate::linalg::FpMatrix;

/// Default precision cap for gate-level scalar ops; beyond it the lowering
/// emits opaque macro gates instead of single-bit logic.
pub const DEFAULT_MAX_CONCRETE_P: Precision = 8;

/// Environment variable overriding [`DEFAULT_MAX_CONCRETE_P`] for
/// [`LowerConfig::from_env`].
pub const MAX_CONCRETE_P_ENV: &str = "HOPCIRC_MAX_CONCRETE_P";

/// Knobs for the lowering pass.
#[derive(Debug, Clone, Copy)]
pub struct LowerConfig {
    /// Largest precision lowered to single-bit gates. Gate counts grow like
    /// 2^p in the iterated adders, so this is capped rather than unbounded.
    pub max_concrete_p: Precision,
}

impl Default for LowerConfig {
    fn default() -> Self {
        LowerConfig { max_concrete_p: DEFAULT_MAX_CONCRETE_P }
    }
}

impl LowerConfig {
    /// Default configuration, with the precision cap taken from
    /// `HOPCIRC_MAX_CONCRETE_P` when that parses as a number.
    pub fn from_env() -> Self {
        let mut cfg = LowerConfig::default();
        if let Ok(v) = std::env::var(MAX_CONCRETE_P_ENV) {
            if let Ok(n) = v.trim().parse::<Precision>() {
                cfg.max_concrete_p = n;
            }
        }
        cfg
    }
}

/// Which two-operand scalar operation [`scalar_op_circuit`] builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarOp {
    Add,
    Mul,
    Cmp,
}

/// A standalone circuit for one scalar operation on two encoded inputs, for
/// conformance checking of the gate-level arithmetic against the reference
/// implementation. Inputs are two [`crate::encoding`] bundles; the output is
/// an encoded value for `Add`/`Mul` and the two comparison bits
/// `[x < y, x > y]` for `Cmp`.
pub fn scalar_op_circuit(p: Precision, cfg: &LowerConfig, op: ScalarOp) -> Circuit {
    let mut c = Circuit::new(p);
    let x = c.input_bundle();
    let y = c.input_bundle();
    let (label, charge) = match op {
        ScalarOp::Add => ("add", DepthExpr::std(1)),
        ScalarOp::Mul => ("mul", DepthExpr::std(1)),
        ScalarOp::Cmp => ("cmp", DepthExpr::std(1)),
    };
    let r = c.add_region(charge, label.to_string());
    let out = match op {
        ScalarOp::Add => scalar::emit_add(&mut c, cfg, r, &x, &y),
        ScalarOp::Mul => scalar::emit_mul(&mut c, cfg, r, &x, &y),
        ScalarOp::Cmp => scalar::emit_cmp(&mut c, cfg, r, &x, &y),
    };
    c.mark_outputs(&out);
    c
}

/// A matrix of encoded values living inside a circuit: one wire bundle per
/// entry, row-major.
#[derive(Debug, Clone)]
struct BundleMat {
    rows: usize,
    cols: usize,
    bundles: Vec<Vec<GateId>>,
}

impl BundleMat {
    fn inputs(c: &mut Circuit, rows: usize, cols: usize) -> Self {
        let bundles = (0..rows * cols).map(|_| c.input_bundle()).collect();
        BundleMat { rows, cols, bundles }
    }

    fn consts(c: &mut Circuit, m: &FpMatrix) -> Self {
        let bundles = m
            .entries()
            .iter()
            .map(|v| scalar::const_value(c, v))
            .collect();
        BundleMat { rows: m.rows(), cols: m.cols(), bundles }
    }

    fn get(&self, i: usize, j: usize) -> &[GateId] {
        &self.bundles[i * self.cols + j]
    }

    fn transpose(&self) -> BundleMat {
        let mut bundles = Vec::with_capacity(self.bundles.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                bundles.push(self.get(i, j).to_vec());
            }
        }
        BundleMat { rows: self.cols, cols: self.rows, bundles }
    }

    fn map(&self, mut f: impl FnMut(&[GateId]) -> Vec<GateId>) -> BundleMat {
        BundleMat {
            rows: self.rows,
            cols: self.cols,
            bundles: self.bundles.iter().map(|b| f(b)).collect(),
        }
    }
}

/// Rounded matrix product into the two given regions (products, row sums).
fn matmul_into(
    c: &mut Circuit,
    cfg: &LowerConfig,
    rp: RegionId,
    rs: RegionId,
    a: &BundleMat,
    b: &BundleMat,
) -> BundleMat {
    assert_eq!(a.cols, b.rows, "lowered matmul shape mismatch");
    let mut bundles = Vec::with_capacity(a.rows * b.cols);
    for i in 0..a.rows {
        for j in 0..b.cols {
            let prods: Vec<Vec<GateId>> = (0..a.cols)
                .map(|k| scalar::emit_mul(c, cfg, rp, a.get(i, k), b.get(k, j)))
                .collect();
            bundles.push(scalar::emit_iter_add(c, cfg, rs, &prods));
        }
    }
    BundleMat { rows: a.rows, cols: b.cols, bundles }
}

/// Rounded matrix product as two fresh stages.
fn matmul_stage(
    c: &mut Circuit,
    cfg: &LowerConfig,
    a: &BundleMat,
    b: &BundleMat,
    label: &str,
) -> BundleMat {
    let rp = c.add_region(DepthExpr::std(1), format!("{label}: products"));
    let rs = c.add_region(DepthExpr::oplus(1), format!("{label}: sums"));
    matmul_into(c, cfg, rp, rs, a, b)
}

/// Association scores S = (R·(W_Q·W_Kᵀ))·Yᵀ as three chained products.
/// Inside a stack the caller hands in retimed (W_Q, W_K) wire matrices so
/// the first product starts after the preceding interface stage; standalone
/// constructs pass `None` and the weights enter as raw constants.
fn scores_stages(
    c: &mut Circuit,
    cfg: &LowerConfig,
    r_in: &BundleMat,
    layer: &HopfieldLayerParams,
    weights: Option<(&BundleMat, &BundleMat)>,
    lbl: &str,
) -> BundleMat {
    let (wq, wkt) = match weights {
        Some((q, k)) => (q.clone(), k.transpose()),
        None => (
            BundleMat::consts(c, &layer.w_q),
            BundleMat::consts(c, &layer.w_k.transpose()),
        ),
    };
    let p_mat = matmul_stage(c, cfg, &wq, &wkt, &format!("{lbl} W_Q*W_K^T"));
    let rp = matmul_stage(c, cfg, r_in, &p_mat, &format!("{lbl} R*P"));
    let yt = BundleMat::consts(c, &layer.y.transpose());
    matmul_stage(c, cfg, &rp, &yt, &format!("{lbl} S=RP*Y^T"))
}

/// Kernelized scores S = (R·((W_Q·(WᵀW))·W_Kᵀ))·Yᵀ: five chained products.
/// `w_carry` plays the same role as the retimed weights of
/// [`scores_stages`]: only W feeds the first stage here, so it is the one
/// matrix a stack retimes per block.
fn kernel_scores_stages(
    c: &mut Circuit,
    cfg: &LowerConfig,
    r_in: &BundleMat,
    layer: &KernelLayerParams,
    w_carry: Option<&BundleMat>,
    lbl: &str,
) -> BundleMat {
    let w = match w_carry {
        Some(m) => m.clone(),
        None => BundleMat::consts(c, &layer.w),
    };
    let wt = w.transpose();
    let g = matmul_stage(c, cfg, &wt, &w, &format!("{lbl} G=W^T*W"));
    let wq = BundleMat::consts(c, &layer.base.w_q);
    let wqg = matmul_stage(c, cfg, &wq, &g, &format!("{lbl} W_Q*G"));
    let wkt = BundleMat::consts(c, &layer.base.w_k.transpose());
    let pk = matmul_stage(c, cfg, &wqg, &wkt, &format!("{lbl} P_K"));
    let rp = matmul_stage(c, cfg, r_in, &pk, &format!("{lbl} R*P_K"));
    let yt = BundleMat::consts(c, &layer.base.y.transpose());
    matmul_stage(c, cfg, &rp, &yt, &format!("{lbl} S=RP_K*Y^T"))
}

/// Unnormalized attention exp(β·S) from precomputed scores.
fn attention_tail(
    c: &mut Circuit,
    cfg: &LowerConfig,
    s: &BundleMat,
    beta: &FpNum,
    lbl: &str,
) -> BundleMat {
    let rb = c.add_region(DepthExpr::std(1), format!("{lbl} beta scale"));
    let beta_bits = scalar::const_value(c, beta);
    let bs = s.map(|e| scalar::emit_mul(c, cfg, rb, &beta_bits, e));
    let re = c.add_region(DepthExpr::exp(1), format!("{lbl} exp"));
    bs.map(|e| scalar::emit_exp(c, re, e))
}

/// Normalization plus the two value-side products shared by every full
/// layer: N from the attention weights, then Z = (N·Y)·W̃_V.
fn layer_tail(
    c: &mut Circuit,
    cfg: &LowerConfig,
    a: &BundleMat,
    beta: &FpNum,
    norm: Normalization,
    layer: &HopfieldLayerParams,
    lbl: &str,
) -> BundleMat {
    let rsum = c.add_region(DepthExpr::oplus(1), format!("{lbl} row sums"));
    let sums: Vec<Vec<GateId>> = (0..a.rows)
        .map(|i| {
            let row: Vec<Vec<GateId>> =
                (0..a.cols).map(|j| a.get(i, j).to_vec()).collect();
            scalar::emit_iter_add(c, cfg, rsum, &row)
        })
        .collect();
    let divisors: Vec<Vec<GateId>> = match norm {
        Normalization::BetaRowSum => {
            let rscale = c.add_region(DepthExpr::std(1), format!("{lbl} beta*rowsum"));
            let beta_bits = scalar::const_value(c, beta);
            sums.iter()
                .map(|s| scalar::emit_mul(c, cfg, rscale, &beta_bits, s))
                .collect()
        }
        Normalization::Softmax => sums,
    };
    let rdiv = c.add_region(DepthExpr::std(1), format!("{lbl} normalize"));
    let mut n_bundles = Vec::with_capacity(a.rows * a.cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            n_bundles.push(scalar::emit_div(c, rdiv, a.get(i, j), &divisors[i]));
        }
    }
    let n = BundleMat { rows: a.rows, cols: a.cols, bundles: n_bundles };
    let y = BundleMat::consts(c, &layer.y);
    let mixed = matmul_stage(c, cfg, &n, &y, &format!("{lbl} N*Y"));
    let wv = BundleMat::consts(c, &layer.w_v_tilde);
    matmul_stage(c, cfg, &mixed, &wv, &format!("{lbl} *W_V"))
}

/// One full plain layer: scores, attention, normalization, value map.
fn hop_layer_stages(
    c: &mut Circuit,
    cfg: &LowerConfig,
    r_in: &BundleMat,
    beta: &FpNum,
    norm: Normalization,
    layer: &HopfieldLayerParams,
    weights: Option<(&BundleMat, &BundleMat)>,
    lbl: &str,
) -> BundleMat {
    let s = scores_stages(c, cfg, r_in, layer, weights, lbl);
    let a = attention_tail(c, cfg, &s, beta, lbl);
    layer_tail(c, cfg, &a, beta, norm, layer, lbl)
}

/// One full kernelized layer.
fn kernel_layer_stages(
    c: &mut Circuit,
    cfg: &LowerConfig,
    r_in: &BundleMat,
    beta: &FpNum,
    norm: Normalization,
    layer: &KernelLayerParams,
    w_carry: Option<&BundleMat>,
    lbl: &str,
) -> BundleMat {
    let s = kernel_scores_stages(c, cfg, r_in, layer, w_carry, lbl);
    let a = attention_tail(c, cfg, &s, beta, lbl);
    layer_tail(c, cfg, &a, beta, norm, &layer.base, lbl)
}

/// Wires passed through a region unchanged (two inverters per bit).
fn retime(c: &mut Circuit, r: RegionId, m: &BundleMat) -> BundleMat {
    m.map(|b| {
        b.iter()
            .map(|&w| {
                let n = c.not(w, r);
                c.not(n, r)
            })
            .collect()
    })
}

/// Value-identity buffer in one component stage. Besides the state it
/// retimes the `carry` matrices (the next block's first-stage weights), so
/// everything the following block consumes leaves this stage together.
fn buffer_component(
    c: &mut Circuit,
    z: &BundleMat,
    carry: &[&BundleMat],
    lbl: &str,
) -> (BundleMat, Vec<BundleMat>) {
    let r = c.add_region(DepthExpr::f(1), lbl.to_string());
    let state = retime(c, r, z);
    let carried = carry.iter().map(|m| retime(c, r, m)).collect();
    (state, carried)
}

/// The seven feed-forward stages; the caller picks the regions, so the
/// same body serves the standalone construct (one region per stage) and
/// the component map inside a stack (a single overriding region).
struct FnnRegions {
    prod1: RegionId,
    sum1: RegionId,
    bias1: RegionId,
    relu: RegionId,
    prod2: RegionId,
    sum2: RegionId,
    bias2: RegionId,
}

impl FnnRegions {
    fn staged(c: &mut Circuit, lbl: &str) -> Self {
        FnnRegions {
            prod1: c.add_region(DepthExpr::std(1), format!("{lbl} W1 products")),
            sum1: c.add_region(DepthExpr::oplus(1), format!("{lbl} W1 sums")),
            bias1: c.add_region(DepthExpr::oplus(1), format!("{lbl} b1 add")),
            relu: c.add_region(DepthExpr::std(1), format!("{lbl} relu")),
            prod2: c.add_region(DepthExpr::std(1), format!("{lbl} W2 products")),
            sum2: c.add_region(DepthExpr::oplus(1), format!("{lbl} W2 sums")),
            bias2: c.add_region(DepthExpr::std(1), format!("{lbl} b2 add")),
        }
    }

    fn single(r: RegionId) -> Self {
        FnnRegions {
            prod1: r,
            sum1: r,
            bias1: r,
            relu: r,
            prod2: r,
            sum2: r,
            bias2: r,
        }
    }
}

/// W₂·relu(W₁·x + b₁) + b₂ on column vectors (x is d×c).
///
/// The first bias lands in an iterated-addition stage — a two-term
/// iterated add is the same rounded value as the scalar add — while the
/// second is a plain scalar-add stage; that split realizes the intended
/// stage accounting of the block.
fn fnn_stages(
    c: &mut Circuit,
    cfg: &LowerConfig,
    x: &BundleMat,
    f: &FnnParams,
    rg: &FnnRegions,
) -> BundleMat {
    assert_eq!(x.rows, f.in_dim(), "lowered FNN input dimension mismatch");
    let w1 = BundleMat::consts(c, &f.w1);
    let pre = matmul_into(c, cfg, rg.prod1, rg.sum1, &w1, x);
    let b1 = BundleMat::consts(c, &f.b1);
    let mut biased = Vec::with_capacity(pre.bundles.len());
    for i in 0..pre.rows {
        for j in 0..pre.cols {
            let terms = vec![pre.get(i, j).to_vec(), b1.get(i, 0).to_vec()];
            biased.push(scalar::emit_iter_add(c, cfg, rg.bias1, &terms));
        }
    }
    let pre_b = BundleMat { rows: pre.rows, cols: pre.cols, bundles: biased };
    let hidden = pre_b.map(|b| scalar::emit_relu(c, rg.relu, b));
    let w2 = BundleMat::consts(c, &f.w2);
    let out = matmul_into(c, cfg, rg.prod2, rg.sum2, &w2, &hidden);
    let b2 = BundleMat::consts(c, &f.b2);
    let mut bundles = Vec::with_capacity(out.bundles.len());
    for i in 0..out.rows {
        for j in 0..out.cols {
            bundles.push(scalar::emit_add(c, cfg, rg.bias2, out.get(i, j), b2.get(i, 0)));
        }
    }
    BundleMat { rows: out.rows, cols: out.cols, bundles }
}

/// Per-block component map: identity buffers, or a whole FNN applied to
/// each state row inside a single component stage. Like
/// [`buffer_component`], the stage also retimes the `carry` matrices for
/// the block that follows.
fn component_stages(
    c: &mut Circuit,
    cfg: &LowerConfig,
    z: &BundleMat,
    comp: &Component,
    carry: &[&BundleMat],
    lbl: &str,
) -> (BundleMat, Vec<BundleMat>) {
    match comp {
        Component::Identity => buffer_component(c, z, carry, lbl),
        Component::Fnn(f) => {
            let r = c.add_region(DepthExpr::f(1), lbl.to_string());
            let rg = FnnRegions::single(r);
            let zt = z.transpose();
            let out = fnn_stages(c, cfg, &zt, f, &rg);
            let carried = carry.iter().map(|m| retime(c, r, m)).collect();
            (out.transpose(), carried)
        }
    }
}

/// A compiled construct: the circuit plus its value-level interface.
#[derive(Debug, Clone)]
pub struct Lowered {
    pub circuit: Circuit,
    /// Shapes of the input matrices, in input-wire order (entries row-major).
    pub input_shapes: Vec<(usize, usize)>,
    /// Shape of the output matrix.
    pub output_shape: (usize, usize),
}

fn finish(c: Circuit, input_shapes: Vec<(usize, usize)>, out: &BundleMat) -> Lowered {
    let mut c = c;
    for b in &out.bundles {
        c.mark_outputs(b);
    }
    Lowered {
        circuit: c,
        input_shapes,
        output_shape: (out.rows, out.cols),
    }
}

pub(super) fn lower_matmul(p: Precision, cfg: &LowerConfig, n: usize, d: usize) -> Lowered {
    let mut c = Circuit::new(p);
    let a = BundleMat::inputs(&mut c, n, d);
    let b = BundleMat::inputs(&mut c, d, d);
    let out = matmul_stage(&mut c, cfg, &a, &b, "matmul");
    finish(c, vec![(n, d), (d, d)], &out)
}

pub(super) fn lower_attn(
    cfg: &LowerConfig,
    n: usize,
    beta: &FpNum,
    layer: &HopfieldLayerParams,
) -> Lowered {
    let mut c = Circuit::new(layer.precision());
    let r_in = BundleMat::inputs(&mut c, n, layer.dim());
    let s = scores_stages(&mut c, cfg, &r_in, layer, None, "attn");
    let a = attention_tail(&mut c, cfg, &s, beta, "attn");
    finish(c, vec![(n, layer.dim())], &a)
}

pub(super) fn lower_hop_layer(
    cfg: &LowerConfig,
    n: usize,
    beta: &FpNum,
    norm: Normalization,
    layer: &HopfieldLayerParams,
) -> Lowered {
    let mut c = Circuit::new(layer.precision());
    let r_in = BundleMat::inputs(&mut c, n, layer.dim());
    let z = hop_layer_stages(&mut c, cfg, &r_in, beta, norm, layer, None, "layer");
    finish(c, vec![(n, layer.dim())], &z)
}

pub(super) fn lower_fnn(cfg: &LowerConfig, f: &FnnParams) -> Lowered {
    let mut c = Circuit::new(f.w1.precision());
    let x = BundleMat::inputs(&mut c, f.in_dim(), 1);
    let rg = FnnRegions::staged(&mut c, "fnn");
    let out = fnn_stages(&mut c, cfg, &x, f, &rg);
    finish(c, vec![(f.in_dim(), 1)], &out)
}

pub(super) fn lower_mhn(
    cfg: &LowerConfig,
    n: usize,
    blocks: &[(HopfieldLayerParams, Component)],
    beta: &FpNum,
    norm: Normalization,
) -> Lowered {
    assert!(!blocks.is_empty(), "a stack needs at least one block");
    let d = blocks[0].0.dim();
    let mut c = Circuit::new(blocks[0].0.precision());
    let r_in = BundleMat::inputs(&mut c, n, d);
    let mut weight_mats = Vec::with_capacity(blocks.len());
    for (layer, _) in blocks {
        weight_mats.push((
            BundleMat::consts(&mut c, &layer.w_q),
            BundleMat::consts(&mut c, &layer.w_k),
        ));
    }
    let first = [&weight_mats[0].0, &weight_mats[0].1];
    let (mut state, mut carried) = buffer_component(&mut c, &r_in, &first, "input component");
    for (i, (layer, comp)) in blocks.iter().enumerate() {
        let lbl = format!("block {i}");
        let weights = Some((&carried[0], &carried[1]));
        let z = hop_layer_stages(&mut c, cfg, &state, beta, norm, layer, weights, &lbl);
        let next: Vec<&BundleMat> = match weight_mats.get(i + 1) {
            Some((wq, wk)) => vec![wq, wk],
            None => Vec::new(),
        };
        let (s, cr) =
            component_stages(&mut c, cfg, &z, comp, &next, &format!("{lbl} component"));
        state = s;
        carried = cr;
    }
    finish(c, vec![(n, d)], &state)
}

pub(super) fn lower_kattn(
    cfg: &LowerConfig,
    n: usize,
    beta: &FpNum,
    layer: &KernelLayerParams,
) -> Lowered {
    let mut c = Circuit::new(layer.base.precision());
    let r_in = BundleMat::inputs(&mut c, n, layer.base.dim());
    let s = kernel_scores_stages(&mut c, cfg, &r_in, layer, None, "kattn");
    let a = attention_tail(&mut c, cfg, &s, beta, "kattn");
    finish(c, vec![(n, layer.base.dim())], &a)
}

pub(super) fn lower_khop(
    cfg: &LowerConfig,
    n: usize,
    beta: &FpNum,
    norm: Normalization,
    layer: &KernelLayerParams,
) -> Lowered {
    let mut c = Circuit::new(layer.base.precision());
    let r_in = BundleMat::inputs(&mut c, n, layer.base.dim());
    let z = kernel_layer_stages(&mut c, cfg, &r_in, beta, norm, layer, None, "klayer");
    finish(c, vec![(n, layer.base.dim())], &z)
}

pub(super) fn lower_khn(
    cfg: &LowerConfig,
    n: usize,
    blocks: &[(KernelLayerParams, Component)],
    beta: &FpNum,
    norm: Normalization,
) -> Lowered {
    assert!(!blocks.is_empty(), "a stack needs at least one block");
    let d = blocks[0].0.base.dim();
    let mut c = Circuit::new(blocks[0].0.base.precision());
    let r_in = BundleMat::inputs(&mut c, n, d);
    let mut weight_mats = Vec::with_capacity(blocks.len());
    for (layer, _) in blocks {
        weight_mats.push(BundleMat::consts(&mut c, &layer.w));
    }
    let first = [&weight_mats[0]];
    let (mut state, mut carried) = buffer_component(&mut c, &r_in, &first, "input component");
    for (i, (layer, comp)) in blocks.iter().enumerate() {
        let lbl = format!("block {i}");
        let z =
            kernel_layer_stages(&mut c, cfg, &state, beta, norm, layer, Some(&carried[0]), &lbl);
        let next: Vec<&BundleMat> = match weight_mats.get(i + 1) {
            Some(w) => vec![w],
            None => Vec::new(),
        };
        let (s, cr) =
            component_stages(&mut c, cfg, &z, comp, &next, &format!("{lbl} component"));
        state = s;
        carried = cr;
    }
    finish(c, vec![(n, d)], &state)
}

/// Encode the input matrices, run the circuit, decode the output matrix.
pub fn eval_lowered(low: &Lowered, inputs: &[FpMatrix]) -> Result<FpMatrix, EvalError> {
    assert_eq!(
        inputs.len(),
        low.input_shapes.len(),
        "wrong number of input matrices"
    );
    let mut bits = Vec::new();
    for (m, &(r, k)) in inputs.iter().zip(&low.input_shapes) {
        assert_eq!((m.rows(), m.cols()), (r, k), "input matrix shape mismatch");
        bits.extend(encoding::encode_all(m.entries()));
    }
    let out_bits = low.circuit.evaluate(&bits)?;
    let vals = encoding::decode_all(&out_bits, low.circuit.precision())
        .expect("circuit produced an invalid encoding");
    let (rows, cols) = low.output_shape;
    let mut out = FpMatrix::zero(rows, cols, low.circuit.precision());
    for i in 0..rows {
        for j in 0..cols {
            out.set(i, j, vals[i * cols + j]);
        }
    }
    Ok(out)
}
