use super::*;
use crate::rng::SplitMix64;
use std::cmp::Ordering::{Equal, Greater, Less};

/// Every value of F_p, unsorted. Sizes grow like 2^(2p+1); keep p small.
fn enumerate(p: Precision) -> Vec<FpNum> {
    assert!(p <= 8, "enumerate is for tiny precisions");
    let mut out = vec![FpNum::zero(p)];
    for e in exp_min(p)..=exp_max(p) {
        for a in sig_min(p)..=sig_max(p) {
            out.push(FpNum::new(a, e, p).unwrap());
            out.push(FpNum::new(-a, e, p).unwrap());
        }
    }
    out
}

/// Value-domain reference rounding: scan every representable value for the
/// nearest one; break exact ties toward the even significand, and toward
/// zero when both candidates are even (only 0 vs ±min_positive).
fn oracle_round(x: &Dyadic, all: &[FpNum]) -> FpNum {
    let mut best: Option<(FpNum, Dyadic)> = None;
    for c in all {
        let d = c.to_dyadic().sub(x).abs();
        let replace = match &best {
            None => true,
            Some((bc, bd)) => match d.cmp_value(bd) {
                Less => true,
                Greater => false,
                Equal => {
                    let (ca, ba) = (c.significand().unsigned_abs(), bc.significand().unsigned_abs());
                    match (ca % 2 == 0, ba % 2 == 0) {
                        (true, false) => true,
                        (false, true) => false,
                        _ => ca < ba,
                    }
                }
            },
        };
        if replace {
            best = Some((*c, d));
        }
    }
    best.unwrap().0
}

fn fp(m: i64, e: i64, p: Precision) -> FpNum {
    FpNum::new(m, e, p).unwrap()
}

#[test]
fn f3_has_129_values() {
    assert_eq!(enumerate(3).len(), 129);
}

#[test]
fn construction_validates() {
    assert!(FpNum::new(3, 0, 3).is_err()); // below 2^(p-1)
    assert!(FpNum::new(8, 0, 3).is_err()); // above 2^p - 1
    assert!(FpNum::new(-8, 0, 3).is_err());
    assert!(FpNum::new(0, 1, 3).is_err()); // non-canonical zero
    assert!(FpNum::new(4, 8, 3).is_err()); // e > 2^p - 1
    assert!(FpNum::new(4, -9, 3).is_err()); // e < -2^p
    assert!(FpNum::new(4, 7, 3).is_ok());
    assert!(FpNum::new(4, -8, 3).is_ok());
    assert!(FpNum::new(4, 0, 0).is_err());
    assert!(FpNum::new(4, 0, 61).is_err());
}

#[test]
fn one_and_extremes() {
    assert_eq!(FpNum::one(3), fp(4, -2, 3));
    assert_eq!(FpNum::max_value(3), fp(7, 7, 3));
    assert_eq!(FpNum::min_positive(3), fp(4, -8, 3));
    assert_eq!(FpNum::one(3).to_f64(), 1.0);
}

#[test]
fn literal_round_trip() {
    let x = fp(5, -4, 3);
    assert_eq!(x.to_string(), "fp(p=3, m=5, e=-4)");
    assert_eq!(FpNum::parse_literal("fp(p=3, m=5, e=-4)").unwrap(), x);
    assert_eq!(FpNum::parse_literal(" fp(p=3,m=-7,e=7) ").unwrap(), fp(-7, 7, 3));
    assert!(FpNum::parse_literal("fp(p=3, m=1, e=0)").is_err()); // denormalized
    assert!(FpNum::parse_literal("fp(3, 5, -4)").is_err());
    assert!(FpNum::parse_literal("(p=3, m=5, e=-4)").is_err());
}

#[test]
fn rounding_frozen_examples_p3() {
    let mut fl = FpFlags::new();
    // 1 → ⟨4, -2⟩
    assert_eq!(round_dyadic(&Dyadic::from_int(1), 3, &mut fl), fp(4, -2, 3));
    // 0.3 → 0.3125 = ⟨5, -4⟩
    let three_tenths = round_ratio(&BigInt::from(3), &BigInt::from(10), 3, &mut fl);
    assert_eq!(three_tenths, fp(5, -4, 3));
    // 0.28125 = 9/32 is exactly midway between 0.25 and 0.3125; the even
    // significand wins: 0.25 = ⟨4, -4⟩.
    let x = Dyadic::new(BigInt::from(9), -5);
    assert_eq!(round_dyadic(&x, 3, &mut fl), fp(4, -4, 3));
    assert!(!fl.any());
}

#[test]
fn add_mul_frozen_examples_p3() {
    let mut fl = FpFlags::new();
    // 7 + 1 = 8
    assert_eq!(fp_add(&fp(7, 0, 3), &fp(4, -2, 3), &mut fl), fp(4, 1, 3));
    // 5 · 5 = 25 → 24
    assert_eq!(fp_mul(&fp(5, 0, 3), &fp(5, 0, 3), &mut fl), fp(6, 2, 3));
    assert!(!fl.any());
}

#[test]
fn div_frozen_examples_p3() {
    let mut fl = FpFlags::new();
    let one = FpNum::one(3);
    let three = fp(6, -1, 3);
    // 1/3 → 0.3125
    assert_eq!(fp_div(&one, &three, &mut fl).unwrap(), fp(5, -4, 3));
    // 1/0.75 = 4/3 → 1.25
    assert_eq!(fp_div(&fp(4, -2, 3), &fp(6, -3, 3), &mut fl).unwrap(), fp(5, -2, 3));
    assert_eq!(
        fp_div(&one, &FpNum::zero(3), &mut fl),
        Err(FpError::DivisionByZero)
    );
    assert_eq!(fp_div(&FpNum::zero(3), &three, &mut fl).unwrap(), FpNum::zero(3));
    assert!(!fl.any());
}

#[test]
fn iterated_ops_round_once() {
    let mut fl = FpFlags::new();
    let one = FpNum::one(3);
    // Nine ones: exact sum 9 sits midway between 8 and 10; even wins → 8.
    assert_eq!(iter_add(3, &vec![one; 9], &mut fl), fp(4, 1, 3));
    // Folding fp_add instead gets stuck at 8 only after reaching it; the
    // classic divergence witness: 7 + 0.25 + 0.25.
    let xs = [fp(7, 0, 3), fp(4, -4, 3), fp(4, -4, 3)];
    let folded = xs[1..]
        .iter()
        .fold(xs[0], |a, b| fp_add(&a, b, &mut fl));
    assert_eq!(folded, fp(7, 0, 3));
    assert_eq!(iter_add(3, &xs, &mut fl), fp(4, 1, 3));

    assert_eq!(iter_add(3, &[], &mut fl), FpNum::zero(3));
    assert_eq!(iter_mul(3, &[], &mut fl), FpNum::one(3));
    // 5 · 5 · 6 = 150 → 160 = ⟨5, 5⟩; pairwise rounds 5·5 to 24 first and
    // 24·6 = 144 ties down to 128.
    let five = fp(5, 0, 3);
    let six = fp(6, 0, 3);
    assert_eq!(iter_mul(3, &[five, five, six], &mut fl), fp(5, 5, 3));
    assert_eq!(
        fp_mul(&fp_mul(&five, &five, &mut fl), &six, &mut fl),
        fp(4, 5, 3)
    );
    assert!(!fl.any());
}

#[test]
fn exp_sqrt_frozen_examples_p3() {
    let mut fl = FpFlags::new();
    assert_eq!(fp_exp(&FpNum::one(3), &mut fl), fp(5, -1, 3)); // e → 2.5
    assert_eq!(fp_exp(&fp(-4, -2, 3), &mut fl), fp(6, -4, 3)); // 1/e → 0.375
    assert_eq!(fp_exp(&FpNum::zero(3), &mut fl), FpNum::one(3));
    assert_eq!(fp_sqrt(&fp(4, -1, 3), &mut fl).unwrap(), fp(6, -2, 3)); // √2 → 1.5
    assert_eq!(fp_sqrt(&FpNum::zero(3), &mut fl).unwrap(), FpNum::zero(3));
    assert_eq!(fp_sqrt(&FpNum::one(3), &mut fl).unwrap(), FpNum::one(3));
    assert_eq!(
        fp_sqrt(&fp(-4, 0, 3), &mut fl),
        Err(FpError::NegativeSqrt)
    );
    assert!(!fl.any());
}

#[test]
fn sqrt_of_perfect_squares_is_exact() {
    let mut fl = FpFlags::new();
    for (sq, root) in [(4i64, 2i64), (16, 4), (64, 8), (256, 16)] {
        let x = FpNum::from_int(sq, 6, &mut fl);
        let r = FpNum::from_int(root, 6, &mut fl);
        assert_eq!(fp_sqrt(&x, &mut fl).unwrap(), r);
    }
    assert!(!fl.any());
}

#[test]
fn overflow_underflow_clamp_and_flag() {
    let p = 3;
    let mut fl = FpFlags::new();
    let max = FpNum::max_value(p);
    assert_eq!(fp_add(&max, &max, &mut fl), max);
    assert!(fl.overflow && !fl.underflow);

    fl.clear();
    let tiny = FpNum::min_positive(p);
    assert_eq!(fp_mul(&tiny, &tiny, &mut fl), FpNum::zero(p));
    assert!(fl.underflow && !fl.overflow);

    // Flags are sticky across merges.
    let mut a = FpFlags::new();
    a.overflow = true;
    let mut b = FpFlags::new();
    b.underflow = true;
    a.merge(b);
    assert!(a.overflow && a.underflow);
}

#[test]
fn subnormal_boundary_rounds_toward_zero_on_tie() {
    let p = 3;
    let mut fl = FpFlags::new();
    // min_positive = 4·2^-8 = 2^-6; the tie point is 2^-7.
    let half_min = Dyadic::new(BigInt::from(1), -7);
    assert_eq!(round_dyadic(&half_min, p, &mut fl), FpNum::zero(p));
    assert!(fl.underflow);

    fl.clear();
    let just_above = Dyadic::new(BigInt::from(3), -8); // 1.5·2^-7
    assert_eq!(round_dyadic(&just_above, p, &mut fl), FpNum::min_positive(p));
    assert!(fl.underflow);

    fl.clear();
    let just_below = Dyadic::new(BigInt::from(1), -8); // 2^-8 < tie point
    assert_eq!(round_dyadic(&just_below, p, &mut fl), FpNum::zero(p));
    assert!(fl.underflow);

    fl.clear();
    let neg = Dyadic::new(BigInt::from(-3), -8);
    assert_eq!(round_dyadic(&neg, p, &mut fl), FpNum::min_positive(p).neg());
    assert!(fl.underflow);
}

#[test]
fn exp_range_shortcuts() {
    let p = 3;
    let mut fl = FpFlags::new();
    // e^32 overflows spectacularly (max_3 = 896).
    assert_eq!(fp_exp(&fp(4, 3, p), &mut fl), FpNum::max_value(p));
    assert!(fl.overflow);
    fl.clear();
    assert_eq!(fp_exp(&fp(-4, 3, p), &mut fl), FpNum::zero(p));
    assert!(fl.underflow);
    fl.clear();
    // e^16 = 8.9e6 also overflows, through the ordinary rounding path.
    assert_eq!(fp_exp(&fp(4, 2, p), &mut fl), FpNum::max_value(p));
    assert!(fl.overflow);
}

#[test]
fn far_apart_add_returns_larger_operand() {
    let p = 3;
    let mut fl = FpFlags::new();
    let big = fp(4, 6, p);
    let small = fp(7, -2, p);
    assert_eq!(fp_add(&big, &small, &mut fl), big);
    assert_eq!(fp_add(&small, &big, &mut fl), big);
    assert_eq!(fp_add(&big.neg(), &small, &mut fl), big.neg());
    assert!(!fl.any());
}

#[test]
fn add_agrees_with_two_term_iter_add() {
    // fp_add (with its far-path shortcut) must be the same function as a
    // two-term exact-sum rounding.
    let p = 4;
    let mut rng = SplitMix64::new(0x5eed_0001);
    let all = enumerate(p);
    let mut fl = FpFlags::new();
    for _ in 0..4000 {
        let x = all[rng.next_below(all.len() as u64) as usize];
        let y = all[rng.next_below(all.len() as u64) as usize];
        let mut f1 = FpFlags::new();
        let mut f2 = FpFlags::new();
        let a = fp_add(&x, &y, &mut f1);
        let b = iter_add(p, &[x, y], &mut f2);
        assert_eq!(a, b, "fp_add vs iter_add on {x} + {y}");
        assert_eq!(f1, f2);
        fl.merge(f1);
    }
}

#[test]
fn rounding_matches_value_scan_randomized() {
    let p = 3;
    let all = enumerate(p);
    let mut rng = SplitMix64::new(0x5eed_0002);
    for _ in 0..2000 {
        let mant = rng.next_range(-2048, 2048);
        let exp = rng.next_range(-12, 4);
        let x = Dyadic::new(BigInt::from(mant), exp);
        let mut fl = FpFlags::new();
        let got = round_dyadic(&x, p, &mut fl);
        let want = oracle_round(&x, &all);
        assert_eq!(got, want, "rounding {mant}·2^{exp}");
    }
}

#[test]
fn every_value_rounds_to_itself() {
    for p in [3, 4] {
        for v in enumerate(p) {
            let mut fl = FpFlags::new();
            assert_eq!(round_dyadic(&v.to_dyadic(), p, &mut fl), v);
            assert!(!fl.any());
        }
    }
}

#[test]
fn add_mul_match_oracle_randomized() {
    let p = 3;
    let all = enumerate(p);
    let mut rng = SplitMix64::new(0x5eed_0003);
    for _ in 0..1500 {
        let x = all[rng.next_below(all.len() as u64) as usize];
        let y = all[rng.next_below(all.len() as u64) as usize];
        let mut fl = FpFlags::new();
        let sum = fp_add(&x, &y, &mut fl);
        assert_eq!(sum, oracle_round(&x.to_dyadic().add(&y.to_dyadic()), &all));
        let prod = fp_mul(&x, &y, &mut fl);
        assert_eq!(prod, oracle_round(&x.to_dyadic().mul(&y.to_dyadic()), &all));
    }
}

#[test]
fn compare_is_the_value_order() {
    let all = enumerate(3);
    for x in &all {
        for y in &all {
            assert_eq!(
                x.compare(y),
                x.to_dyadic().cmp_value(&y.to_dyadic()),
                "compare {x} vs {y}"
            );
        }
    }
}

#[test]
fn neg_is_exact_and_canonical() {
    for v in enumerate(3) {
        let n = v.neg();
        assert_eq!(n.to_dyadic().cmp_value(&v.to_dyadic().neg()), Equal);
        assert_eq!(n.neg(), v);
    }
    assert_eq!(FpNum::zero(3).neg(), FpNum::zero(3));
}

#[test]
fn from_int_rounds() {
    let mut fl = FpFlags::new();
    assert_eq!(FpNum::from_int(9, 3, &mut fl), fp(4, 1, 3)); // ties to even
    assert_eq!(FpNum::from_int(-9, 3, &mut fl), fp(-4, 1, 3));
    assert_eq!(FpNum::from_int(0, 3, &mut fl), FpNum::zero(3));
    assert_eq!(FpNum::from_int(6, 3, &mut fl), fp(6, 0, 3));
    assert!(!fl.any());
}

#[test]
fn from_f64_rounds_exactly() {
    let mut fl = FpFlags::new();
    assert_eq!(FpNum::from_f64(0.75, 3, &mut fl), fp(6, -3, 3));
    assert_eq!(FpNum::from_f64(-1.5, 3, &mut fl), fp(-6, -2, 3));
    assert_eq!(FpNum::from_f64(0.0, 3, &mut fl), FpNum::zero(3));
    assert!(!fl.any());
    // Representable doubles survive a p=24 round trip unchanged.
    for x in [0.1f64, -3.25, 1e-3, 123.456] {
        let v = FpNum::from_f64(x, 24, &mut fl);
        let rel = (v.to_f64() - x).abs() / x.abs();
        assert!(rel <= 2f64.powi(-24), "{x}: relative error {rel}");
    }
    // Far below the smallest positive value: ties-toward-zero gives 0.
    assert_eq!(FpNum::from_f64(f64::MIN_POSITIVE, 3, &mut fl), FpNum::zero(3));
    assert!(fl.underflow);
}

#[test]
#[should_panic(expected = "across precisions")]
fn mixed_precision_add_panics() {
    let mut fl = FpFlags::new();
    fp_add(&FpNum::one(3), &FpNum::one(4), &mut fl);
}

#[test]
fn exp_matches_extended_reference_p10() {
    // Spot the documented p=10 value: rel error bound 2^-10 from the true
    // e^x; stronger, exp must equal the correctly rounded extended value.
    let p = 10;
    let mut fl = FpFlags::new();
    let one = FpNum::one(p);
    let got = fp_exp(&one, &mut fl);
    let want = round_dyadic(&ext::exp(&Dyadic::one(), 200), p, &mut fl);
    assert_eq!(got, want);
    let e = std::f64::consts::E;
    assert!((got.to_f64() - e).abs() / e <= 2f64.powi(-(p as i32)));
}
