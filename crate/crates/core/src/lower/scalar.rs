//! Gate-level realizations of the scalar p-bit operations.
//!
//! Below the configured precision cap every arithmetic op is spelled out in
//! single-bit logic: two's-complement ripple adders with majority carries,
//! barrel shifters for alignment and normalization, and a shared
//! round-to-nearest gadget that reproduces the reference rounding rules bit
//! for bit — including the clamp at the exponent limits and the
//! tie-toward-zero subnormal rule. Above the cap the same entry points fall
//! back to opaque macro gates, so construct lowering works at any
//! precision; the macro gates evaluate through the reference arithmetic.
//!
//! Everything an emitter builds lands in the single region passed by the
//! caller: one scalar op is one depth stage, whatever its internal gate
//! count.

use crate::circuit::{Circuit, GateId, MacroTag, RegionId};
use crate::encoding;
use crate::fp;

use super::LowerConfig;

/// Bits needed to hold the values 0..=max.
fn bits_for(max: usize) -> usize {
    (usize::BITS - max.leading_zeros()).max(1) as usize
}

fn psize(c: &Circuit) -> usize {
    c.precision() as usize
}

/// Significand field of an encoded bundle: (p+1)-bit two's complement.
fn sig_field<'a>(c: &Circuit, v: &'a [GateId]) -> &'a [GateId] {
    &v[..psize(c) + 1]
}

/// Exponent field of an encoded bundle: (p+1)-bit two's complement.
fn exp_field<'a>(c: &Circuit, v: &'a [GateId]) -> &'a [GateId] {
    &v[psize(c) + 1..]
}

/// Constant bundle for a two's-complement integer on `w` wires.
pub(super) fn const_int(c: &mut Circuit, v: i64, w: usize) -> Vec<GateId> {
    encoding::int_to_bits(v, w)
        .into_iter()
        .map(|b| c.constant(b))
        .collect()
}

/// Constant bundle holding an encoded value.
pub(super) fn const_value(c: &mut Circuit, v: &fp::FpNum) -> Vec<GateId> {
    assert_eq!(v.precision(), c.precision(), "constant precision mismatch");
    encoding::encode(v).into_iter().map(|b| c.constant(b)).collect()
}

fn bxor(c: &mut Circuit, r: RegionId, a: GateId, b: GateId) -> GateId {
    let na = c.not(a, r);
    let nb = c.not(b, r);
    let t = c.and(&[a, nb], r);
    let u = c.and(&[na, b], r);
    c.or(&[t, u], r)
}

fn bv_mux(c: &mut Circuit, r: RegionId, sel: GateId, t: &[GateId], f: &[GateId]) -> Vec<GateId> {
    assert_eq!(t.len(), f.len(), "mux arms differ in width");
    let ns = c.not(sel, r);
    t.iter()
        .zip(f)
        .map(|(&ti, &fi)| {
            let x = c.and(&[sel, ti], r);
            let y = c.and(&[ns, fi], r);
            c.or(&[x, y], r)
        })
        .collect()
}

/// Two's-complement ripple adder; wraps at the top. Returns (sum, carry-out).
fn ripple_add(
    c: &mut Circuit,
    r: RegionId,
    a: &[GateId],
    b: &[GateId],
    cin: GateId,
) -> (Vec<GateId>, GateId) {
    assert_eq!(a.len(), b.len(), "adder operands differ in width");
    let mut carry = cin;
    let mut out = Vec::with_capacity(a.len());
    for (&x, &y) in a.iter().zip(b) {
        let xy = bxor(c, r, x, y);
        out.push(bxor(c, r, xy, carry));
        carry = c.maj(&[x, y, carry], r);
    }
    (out, carry)
}

fn add_const(c: &mut Circuit, r: RegionId, a: &[GateId], k: i64) -> Vec<GateId> {
    let kb = const_int(c, k, a.len());
    let zero = c.constant(false);
    ripple_add(c, r, a, &kb, zero).0
}

fn bv_neg(c: &mut Circuit, r: RegionId, a: &[GateId]) -> Vec<GateId> {
    let na: Vec<GateId> = a.iter().map(|&x| c.not(x, r)).collect();
    let zeros = vec![c.constant(false); a.len()];
    let one = c.constant(true);
    ripple_add(c, r, &na, &zeros, one).0
}

/// |a| of a two's-complement vector whose magnitude fits the width.
fn bv_abs(c: &mut Circuit, r: RegionId, a: &[GateId]) -> Vec<GateId> {
    let sign = *a.last().expect("abs of empty vector");
    let neg = bv_neg(c, r, a);
    bv_mux(c, r, sign, &neg, a)
}

fn or_reduce(c: &mut Circuit, r: RegionId, xs: &[GateId]) -> GateId {
    match xs.len() {
        0 => c.constant(false),
        1 => xs[0],
        _ => c.or(xs, r),
    }
}

fn bv_is_zero(c: &mut Circuit, r: RegionId, xs: &[GateId]) -> GateId {
    let any = or_reduce(c, r, xs);
    c.not(any, r)
}

/// Sign extension is pure wiring: replicate the top wire.
fn sign_extend(a: &[GateId], w: usize) -> Vec<GateId> {
    assert!(w >= a.len());
    let mut out = a.to_vec();
    let top = *a.last().expect("extend of empty vector");
    out.resize(w, top);
    out
}

fn zero_extend(c: &mut Circuit, a: &[GateId], w: usize) -> Vec<GateId> {
    assert!(w >= a.len());
    let mut out = a.to_vec();
    let z = c.constant(false);
    out.resize(w, z);
    out
}

/// Left shift with zero fill: lanes · 2^amt, `amt` unsigned LSB-first.
/// Shifted-out lanes drop; callers keep meaningful shifts inside the width.
fn shl_var(c: &mut Circuit, r: RegionId, lanes: &[GateId], amt: &[GateId]) -> Vec<GateId> {
    let mut cur = lanes.to_vec();
    let zero = c.constant(false);
    for (k, &sbit) in amt.iter().enumerate() {
        let step = 1usize << k;
        let ns = c.not(sbit, r);
        cur = (0..cur.len())
            .map(|i| {
                let shifted = if i >= step { cur[i - step] } else { zero };
                let x = c.and(&[sbit, shifted], r);
                let y = c.and(&[ns, cur[i]], r);
                c.or(&[x, y], r)
            })
            .collect();
    }
    cur
}

/// Unsigned comparison, MSB down. Returns (lt, eq, gt).
fn ucmp(c: &mut Circuit, r: RegionId, a: &[GateId], b: &[GateId]) -> (GateId, GateId, GateId) {
    assert_eq!(a.len(), b.len(), "compare operands differ in width");
    assert!(!a.is_empty(), "compare of empty vectors");
    let mut eq_run = c.constant(true);
    let mut lt_terms = Vec::with_capacity(a.len());
    let mut gt_terms = Vec::with_capacity(a.len());
    for i in (0..a.len()).rev() {
        let na = c.not(a[i], r);
        let nb = c.not(b[i], r);
        lt_terms.push(c.and(&[eq_run, na, b[i]], r));
        gt_terms.push(c.and(&[eq_run, a[i], nb], r));
        let both1 = c.and(&[a[i], b[i]], r);
        let both0 = c.and(&[na, nb], r);
        let eq_i = c.or(&[both1, both0], r);
        eq_run = c.and(&[eq_run, eq_i], r);
    }
    let lt = c.or(&lt_terms, r);
    let gt = c.or(&gt_terms, r);
    (lt, eq_run, gt)
}

/// Signed comparison: flip the sign bits, compare unsigned.
fn scmp(c: &mut Circuit, r: RegionId, a: &[GateId], b: &[GateId]) -> (GateId, GateId, GateId) {
    let mut a2 = a.to_vec();
    let mut b2 = b.to_vec();
    let ta = c.not(*a2.last().unwrap(), r);
    *a2.last_mut().unwrap() = ta;
    let tb = c.not(*b2.last().unwrap(), r);
    *b2.last_mut().unwrap() = tb;
    ucmp(c, r, &a2, &b2)
}

fn scmp_const(c: &mut Circuit, r: RegionId, a: &[GateId], k: i64) -> (GateId, GateId, GateId) {
    let kb = const_int(c, k, a.len());
    scmp(c, r, a, &kb)
}

/// One-hot mask of the highest set lane (all zero on a zero vector), plus
/// the OR of every lane.
fn high_one_hot(c: &mut Circuit, r: RegionId, v: &[GateId]) -> (Vec<GateId>, GateId) {
    let w = v.len();
    let mut sfx = vec![0; w];
    sfx[w - 1] = v[w - 1];
    for i in (0..w - 1).rev() {
        sfx[i] = c.or(&[v[i], sfx[i + 1]], r);
    }
    let mut hot = Vec::with_capacity(w);
    for i in 0..w {
        if i + 1 < w {
            let n = c.not(sfx[i + 1], r);
            hot.push(c.and(&[v[i], n], r));
        } else {
            hot.push(v[i]);
        }
    }
    (hot, sfx[0])
}

/// Binary encoding Σ hot_i·f(i) of a one-hot vector.
fn encode_one_hot(
    c: &mut Circuit,
    r: RegionId,
    hot: &[GateId],
    f: impl Fn(usize) -> usize,
    bits: usize,
) -> Vec<GateId> {
    (0..bits)
        .map(|k| {
            let terms: Vec<GateId> = hot
                .iter()
                .enumerate()
                .filter(|(i, _)| f(*i) >> k & 1 == 1)
                .map(|(_, &h)| h)
                .collect();
            or_reduce(c, r, &terms)
        })
        .collect()
}

/// Shared rounding tail. Takes the result sign, an *exact* magnitude on
/// unsigned lanes (LSB first; nothing sticky beyond lane 0), and the grid
/// exponent of lane 0 as a signed vector. Produces the encoded p-bit value
/// under round-to-nearest-even with clamping at the exponent limits and
/// the subnormal rule of the reference arithmetic: below half the minimum
/// positive rounds to zero, the exact midpoint breaks toward zero, above
/// it rounds to ±minpos. A zero magnitude yields canonical zero whatever
/// the grid exponent says.
fn round_from_aligned(
    c: &mut Circuit,
    r: RegionId,
    sign: GateId,
    mag: &[GateId],
    base: &[GateId],
) -> Vec<GateId> {
    let p = psize(c);
    let w = mag.len();
    let ew = base.len();
    assert!(w >= p + 1, "magnitude lanes must cover significand and round bit");
    assert!(ew > bits_for(w - 1), "exponent lanes too narrow for the bit position");
    let emin = fp::exp_min(c.precision());
    let emax = fp::exp_max(c.precision());

    let (hot, any) = high_one_hot(c, r, mag);
    let zero = c.not(any, r);
    let hb = bits_for(w - 1);
    let hp = encode_one_hot(c, r, &hot, |i| i, hb);
    let sa = encode_one_hot(c, r, &hot, |i| w - 1 - i, hb);
    let norm = shl_var(c, r, mag, &sa);

    // Candidate significand = top p lanes; The lane below it rounds,
    // everything further down is sticky.
    let sig: Vec<GateId> = (0..p).map(|j| norm[w - p + j]).collect();
    let rnd = norm[w - p - 1];
    let sticky = or_reduce(c, r, &norm[..w - p - 1]);

    let hp_ext = zero_extend(c, &hp, ew);
    let zero_c = c.constant(false);
    let (binade, _) = ripple_add(c, r, base, &hp_ext, zero_c);
    let f_pre = add_const(c, r, &binade, -(p as i64 - 1));

    let (sub, _, _) = scmp_const(c, r, &f_pre, emin);
    let (_, _, ovf_pre) = scmp_const(c, r, &f_pre, emax);

    // Normal path: round to nearest, ties to even.
    let keep = c.or(&[sticky, sig[0]], r);
    let up = c.and(&[rnd, keep], r);
    let zeros_p = vec![zero_c; p];
    let (sig2, carry) = ripple_add(c, r, &sig, &zeros_p, up);
    // A carry means the significand was all ones; the rounded value is
    // 2^(p-1) one binade up, which is sig2 (all zeros) with its top bit set.
    let mut sigf = sig2;
    sigf[p - 1] = c.or(&[sigf[p - 1], carry], r);
    let carry_ext = zero_extend(c, &[carry], ew);
    let (f, _) = ripple_add(c, r, &f_pre, &carry_ext, zero_c);
    let (_, _, ovf_post) = scmp_const(c, r, &f, emax);
    let ovf = c.or(&[ovf_pre, ovf_post], r);

    // Subnormal path: compare the true binade against emin + p - 2.
    let (b_lt, b_eq, _) = scmp_const(c, r, &binade, emin + p as i64 - 2);
    let below = or_reduce(c, r, &norm[..w - 1]);
    let pow2 = c.not(below, r);
    let half_tie = c.and(&[b_eq, pow2], r);
    let sub_zero = c.or(&[b_lt, half_tie], r);

    // Magnitude selection (p unsigned bits, value < 2^p).
    let one_c = c.constant(true);
    let max_mag = vec![one_c; p];
    let mut sub_mag = vec![zero_c; p];
    sub_mag[p - 1] = c.not(sub_zero, r);
    let inner_mag = bv_mux(c, r, sub, &sub_mag, &sigf);
    let mag_sel = bv_mux(c, r, ovf, &max_mag, &inner_mag);

    // Exponent selection ((p+1)-bit signed).
    let emax_b = const_int(c, emax, p + 1);
    let emin_b = const_int(c, emin, p + 1);
    let zeros_e = vec![zero_c; p + 1];
    let sub_e = bv_mux(c, r, sub_zero, &zeros_e, &emin_b);
    let inner_e = bv_mux(c, r, sub, &sub_e, &f[..p + 1]);
    let e_sel = bv_mux(c, r, ovf, &emax_b, &inner_e);

    // Apply the sign, then let a zero magnitude force canonical zero.
    let mag_ext = zero_extend(c, &mag_sel, p + 1);
    let neg_m = bv_neg(c, r, &mag_ext);
    let m_signed = bv_mux(c, r, sign, &neg_m, &mag_ext);
    let zeros_m = vec![zero_c; p + 1];
    let mut out = bv_mux(c, r, zero, &zeros_m, &m_signed);
    out.extend(bv_mux(c, r, zero, &zeros_e, &e_sel));
    out
}

/// Rounded addition of two encoded values.
pub(super) fn emit_add(
    c: &mut Circuit,
    cfg: &LowerConfig,
    r: RegionId,
    x: &[GateId],
    y: &[GateId],
) -> Vec<GateId> {
    if c.precision() > cfg.max_concrete_p {
        return c.macro_op(MacroTag::Add, &[x, y], r);
    }
    let p = psize(c);
    let (mx, ex) = (sig_field(c, x).to_vec(), exp_field(c, x).to_vec());
    let (my, ey) = (sig_field(c, y).to_vec(), exp_field(c, y).to_vec());
    let zx = bv_is_zero(c, r, &mx);
    let zy = bv_is_zero(c, r, &my);

    // Put the operand with the larger exponent in front.
    let (swap, _, _) = scmp(c, r, &ex, &ey);
    let ma = bv_mux(c, r, swap, &my, &mx);
    let ea = bv_mux(c, r, swap, &ey, &ex);
    let mb = bv_mux(c, r, swap, &mx, &my);
    let eb = bv_mux(c, r, swap, &ex, &ey);

    let ew = p + 4;
    let ea_x = sign_extend(&ea, ew);
    let eb_x = sign_extend(&eb, ew);
    let neb: Vec<GateId> = eb_x.iter().map(|&g| c.not(g, r)).collect();
    let one = c.constant(true);
    let (delta, _) = ripple_add(c, r, &ea_x, &neb, one);

    // Once the exponent gap clears the significand plus guard bits, the
    // smaller operand cannot move the rounded result.
    let (near_gap, _, _) = scmp_const(c, r, &delta, p as i64 + 3);
    let far = c.not(near_gap, r);

    // Near path: exact sum on 2p+6 two's-complement lanes at grid eb.
    let w = 2 * p + 6;
    let sb = bits_for(p + 2);
    let ma_w = sign_extend(&ma, w);
    let a_sh = shl_var(c, r, &ma_w, &delta[..sb]);
    let mb_w = sign_extend(&mb, w);
    let zero_c = c.constant(false);
    let (s, _) = ripple_add(c, r, &a_sh, &mb_w, zero_c);
    let sign = s[w - 1];
    let mag = bv_abs(c, r, &s);
    let eb_ew = sign_extend(&eb, ew);
    let near = round_from_aligned(c, r, sign, &mag, &eb_ew);

    let mut a_full = ma;
    a_full.extend(ea);
    let res_far = bv_mux(c, r, far, &a_full, &near);
    let res_zy = bv_mux(c, r, zy, x, &res_far);
    bv_mux(c, r, zx, y, &res_zy)
}

/// Iterated addition: the exact sum of all operands, rounded once.
pub(super) fn emit_iter_add(
    c: &mut Circuit,
    cfg: &LowerConfig,
    r: RegionId,
    xs: &[Vec<GateId>],
) -> Vec<GateId> {
    if c.precision() > cfg.max_concrete_p {
        let refs: Vec<&[GateId]> = xs.iter().map(|v| v.as_slice()).collect();
        return c.macro_op(MacroTag::IterAdd, &refs, r);
    }
    let p = psize(c);
    if xs.is_empty() {
        let z = fp::FpNum::zero(c.precision());
        return const_value(c, &z);
    }
    let emin = fp::exp_min(c.precision());
    // Everything aligns to the grid emin; the largest aligned magnitude is
    // below 2^(p + emax - emin), with headroom for the sum and a sign.
    let w = (1usize << (p + 1)) + p + bits_for(xs.len()) + 2;
    let zero_c = c.constant(false);
    let mut acc: Option<Vec<GateId>> = None;
    for xbits in xs {
        let m = sig_field(c, xbits).to_vec();
        let e = exp_field(c, xbits).to_vec();
        // Shift amount e - emin = e + 2^p: flip the exponent sign bit.
        let mut sh = e;
        let top = c.not(*sh.last().unwrap(), r);
        *sh.last_mut().unwrap() = top;
        let m_w = sign_extend(&m, w);
        let aligned = shl_var(c, r, &m_w, &sh);
        acc = Some(match acc {
            None => aligned,
            Some(prev) => ripple_add(c, r, &prev, &aligned, zero_c).0,
        });
    }
    let s = acc.unwrap();
    let sign = s[w - 1];
    let mag = bv_abs(c, r, &s);
    let base = const_int(c, emin, p + 4);
    round_from_aligned(c, r, sign, &mag, &base)
}

/// Rounded multiplication of two encoded values.
pub(super) fn emit_mul(
    c: &mut Circuit,
    cfg: &LowerConfig,
    r: RegionId,
    x: &[GateId],
    y: &[GateId],
) -> Vec<GateId> {
    if c.precision() > cfg.max_concrete_p {
        return c.macro_op(MacroTag::Mul, &[x, y], r);
    }
    let p = psize(c);
    let (mx, ex) = (sig_field(c, x).to_vec(), exp_field(c, x).to_vec());
    let (my, ey) = (sig_field(c, y).to_vec(), exp_field(c, y).to_vec());
    let sx = mx[p];
    let sy = my[p];
    let sign = bxor(c, r, sx, sy);
    let ax = bv_abs(c, r, &mx);
    let ay = bv_abs(c, r, &my);

    // Schoolbook product of the p-bit magnitudes on 2p lanes.
    let w = 2 * p;
    let zero_c = c.constant(false);
    let mut acc: Option<Vec<GateId>> = None;
    for j in 0..p {
        let row: Vec<GateId> = (0..w)
            .map(|i| {
                if i >= j && i < j + p {
                    c.and(&[ax[i - j], ay[j]], r)
                } else {
                    zero_c
                }
            })
            .collect();
        acc = Some(match acc {
            None => row,
            Some(prev) => ripple_add(c, r, &prev, &row, zero_c).0,
        });
    }
    let prod = acc.unwrap();

    let ew = p + 4;
    let ex_x = sign_extend(&ex, ew);
    let ey_x = sign_extend(&ey, ew);
    let (base, _) = ripple_add(c, r, &ex_x, &ey_x, zero_c);
    round_from_aligned(c, r, sign, &prod, &base)
}

/// Order predicate: two wires [less, greater].
pub(super) fn emit_cmp(
    c: &mut Circuit,
    cfg: &LowerConfig,
    r: RegionId,
    x: &[GateId],
    y: &[GateId],
) -> Vec<GateId> {
    if c.precision() > cfg.max_concrete_p {
        return c.macro_op(MacroTag::Cmp, &[x, y], r);
    }
    let p = psize(c);
    let (mx, ex) = (sig_field(c, x).to_vec(), exp_field(c, x).to_vec());
    let (my, ey) = (sig_field(c, y).to_vec(), exp_field(c, y).to_vec());
    let zx = bv_is_zero(c, r, &mx);
    let zy = bv_is_zero(c, r, &my);
    let xneg = mx[p];
    let yneg = my[p];
    let nxneg = c.not(xneg, r);
    let nyneg = c.not(yneg, r);
    let nzx = c.not(zx, r);
    let nzy = c.not(zy, r);
    let xpos = c.and(&[nxneg, nzx], r);
    let ypos = c.and(&[nyneg, nzy], r);

    // Sign classes decide unless both operands share one.
    let t1 = c.and(&[xneg, nyneg], r);
    let t2 = c.and(&[zx, ypos], r);
    let cls_lt = c.or(&[t1, t2], r);
    let t3 = c.and(&[yneg, nxneg], r);
    let t4 = c.and(&[zy, xpos], r);
    let cls_gt = c.or(&[t3, t4], r);
    let bothpos = c.and(&[xpos, ypos], r);
    let bothneg = c.and(&[xneg, yneg], r);

    // Same class: normalized values order lexicographically on
    // (exponent, significand), reversed on exponents when negative.
    let (elt, eeq, egt) = scmp(c, r, &ex, &ey);
    let (mlt, _, mgt) = scmp(c, r, &mx, &my);
    let em_lt = c.and(&[eeq, mlt], r);
    let em_gt = c.and(&[eeq, mgt], r);
    let pp_lt = c.or(&[elt, em_lt], r);
    let pp_gt = c.or(&[egt, em_gt], r);
    let nn_lt = c.or(&[egt, em_lt], r);
    let nn_gt = c.or(&[elt, em_gt], r);

    let u1 = c.and(&[bothpos, pp_lt], r);
    let u2 = c.and(&[bothneg, nn_lt], r);
    let lt = c.or(&[cls_lt, u1, u2], r);
    let v1 = c.and(&[bothpos, pp_gt], r);
    let v2 = c.and(&[bothneg, nn_gt], r);
    let gt = c.or(&[cls_gt, v1, v2], r);
    vec![lt, gt]
}

/// max(0, x): a negative significand clamps every field bit to zero.
/// Exact at any precision, so this never falls back to a macro.
pub(super) fn emit_relu(c: &mut Circuit, r: RegionId, x: &[GateId]) -> Vec<GateId> {
    let p = psize(c);
    let keep = c.not(x[p], r);
    x.iter().map(|&b| c.and(&[b, keep], r)).collect()
}

/// Rounded division (macro at every precision: the depth model treats it
/// as one standard stage and the value semantics live in the reference op).
pub(super) fn emit_div(
    c: &mut Circuit,
    r: RegionId,
    x: &[GateId],
    y: &[GateId],
) -> Vec<GateId> {
    c.macro_op(MacroTag::Div, &[x, y], r)
}

/// Rounded exponential (macro at every precision).
pub(super) fn emit_exp(c: &mut Circuit, r: RegionId, x: &[GateId]) -> Vec<GateId> {
    c.macro_op(MacroTag::Exp, &[x], r)
}
