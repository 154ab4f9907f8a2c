//! Kernel weights, tails and family reports against closed forms and
//! 40-digit reference values.

use hlp::kernel::{Beta, CriticalSize};
use hlp::{FamilyKind, Kernel, KernelFamily, KernelForm, LatticeParams};
use proptest::prelude::*;

fn p(l: u32, d: u32, n: u32) -> LatticeParams {
    LatticeParams::new(l, d, n).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn loglog_family(a: f64) -> KernelFamily {
    KernelFamily::new(p(2, 1, 20), FamilyKind::LogLogCritical { a }).unwrap()
}

#[test]
fn loglog_vanishes_below_e() {
    let k = loglog_family(3.0).at(1.0).unwrap();
    assert_eq!(k.eval(1).unwrap(), 0.0);
    let k3 = KernelFamily::new(p(3, 1, 5), FamilyKind::LogLogCritical { a: 1.0 })
        .unwrap()
        .at(1.0)
        .unwrap();
    // 3 > e, so the first scale is already positive.
    assert!(k3.eval(1).unwrap() > 0.0);
}

#[test]
fn loglog_reference_value() {
    let k = loglog_family(1.0).at(1.0).unwrap();
    assert!(rel(k.eval(10).unwrap(), 3.692_764_611_077_082e-6) < 1e-14);
    assert!(k.eval(21).is_err());
    assert!(k.eval(0).is_err());
}

#[test]
fn zero_lambda_is_zero_everywhere() {
    let f = KernelFamily::new(
        p(2, 1, 10),
        FamilyKind::Scaled(KernelForm::Power {
            coeff: 5.0,
            exponent: 2.0,
        }),
    )
    .unwrap();
    let k = f.at(0.0).unwrap();
    assert!((1..=10).all(|j| k.eval(j).unwrap() == 0.0 && k.open_probability(j) == 0.0));
}

#[test]
fn open_probabilities() {
    let k = Kernel::from_form(p(2, 1, 3), KernelForm::Table(vec![0.0, 2f64.ln(), 1e-12])).unwrap();
    assert_eq!(k.open_probability(1), 0.0);
    assert!((k.open_probability(2) - 0.5).abs() < 1e-16);
    let tiny = k.open_probability(3);
    assert!(rel(tiny, 9.999_999_999_995e-13) < 1e-15);
    // The naive form loses about four digits here.
    assert!(rel(1.0 - (-1e-12f64).exp(), 9.999999999995e-13) > 1e-6);
}

#[test]
fn geometric_tail() {
    for l in [2u32, 3, 5] {
        let k = Kernel::from_form(
            p(l, 1, 12),
            KernelForm::Power {
                coeff: l as f64,
                exponent: 2.0,
            },
        )
        .unwrap();
        for m in 0..12 {
            let want = (l as f64).powi(-(m as i32));
            assert!(rel(k.tail_sum(m).unwrap(), want) < 1e-14, "L={l} m={m}");
            let f = k.critical_size(m).unwrap();
            assert!(matches!(f, CriticalSize::Finite(x) if rel(x, 1.0 / want) < 1e-14));
        }
    }
}

#[test]
fn finite_table_has_infinite_critical_size() {
    let k = Kernel::from_form(p(2, 1, 6), KernelForm::Table(vec![0.3, 0.2, 0.1])).unwrap();
    assert_eq!(k.tail_sum(3).unwrap(), 0.0);
    assert_eq!(k.critical_size(4).unwrap(), CriticalSize::Infinite);
}

#[test]
fn loglog_tail_reference() {
    let k = loglog_family(1.0).at(1.0).unwrap();
    assert!(rel(k.tail_sum(20).unwrap(), 2.596_491_496_945_601e-6) < 1e-12);
}

#[test]
fn small_scaled_family_is_non_percolative() {
    let f = KernelFamily::new(
        p(2, 1, 10),
        FamilyKind::Scaled(KernelForm::Power {
            coeff: 1.0,
            exponent: 3.0,
        }),
    )
    .unwrap();
    let r = f.property_report(0.01, 20).unwrap();
    assert!(r.non_percolative_at_zero && r.integrable && r.monotone && r.continuous_on_grid);
    assert!(f.at(0.01).unwrap().tail_sum(0).unwrap() < 1.0);
    assert!(r.is_proper());
}

#[test]
fn loglog_regular_constant_is_stable() {
    let f = loglog_family(2.0);
    let a = f.property_report(1.0, 20).unwrap();
    let b = f.property_report(1.0, 40).unwrap();
    assert!(a.integrable && a.regular_constant.is_finite());
    assert!(
        rel(a.regular_constant, b.regular_constant) < 1e-6,
        "{} {}",
        a.regular_constant,
        b.regular_constant
    );
}

#[test]
fn zero_family_report() {
    let f = KernelFamily::new(
        p(2, 1, 5),
        FamilyKind::Scaled(KernelForm::Table(vec![1.0; 5])),
    )
    .unwrap();
    let r = f.property_report(0.0, 5).unwrap();
    assert_eq!(r.degree_at_zero, 0.0);
    assert!(r.non_percolative_at_zero);
}

#[test]
fn beta_values() {
    assert_eq!(
        loglog_family(2.0).at(1.0).unwrap().beta(40),
        Beta {
            value: 2.0,
            exact: true
        }
    );
    let cubic = Kernel::from_form(
        p(2, 1, 5),
        KernelForm::Power {
            coeff: 1.0,
            exponent: 3.0,
        },
    )
    .unwrap();
    assert_eq!(cubic.beta(40).value, 0.0);
    let cut = KernelFamily::new(
        p(2, 1, 10),
        FamilyKind::ShortRangeCutoff {
            base: KernelForm::LogLog { a: 2.0 },
            n1: 8,
        },
    )
    .unwrap();
    for lambda in [0.1, 1.0, 7.0] {
        assert_eq!(cut.at(lambda).unwrap().beta(40).value, 2.0);
    }
    // A table read off a finite horizon is flagged inexact.
    let t: Vec<f64> = (1..=40)
        .map(|k| 3.0 * 2.0 * ((k as f64) * 2f64.ln()).ln().max(0.0) * 4f64.powi(-k))
        .collect();
    let b = Kernel::from_form(p(2, 1, 40), KernelForm::Table(t))
        .unwrap()
        .beta(40);
    assert!(!b.exact && rel(b.value, 3.0) < 1e-12);
}

#[test]
fn integrable_critical_kernel() {
    let r = loglog_family(1.5).property_report(1.0, 30).unwrap();
    assert!(r.integrable && r.regular_constant.is_finite());
}

#[test]
fn monotonicity_grid_must_be_sorted() {
    let f = KernelFamily::new(
        p(2, 1, 6),
        FamilyKind::SiteBondTheorem4 {
            a: 1.0,
            n0: 0.5,
            n1: 8,
        },
    )
    .unwrap();
    assert!(f.check_monotone(&[0.0, 1.0, 2.0], 6).is_ok());
    assert!(f.check_monotone(&[1.0, 0.5], 6).is_err());
}

fn family() -> impl Strategy<Value = KernelFamily> {
    let form = prop_oneof![
        (0.0f64..10.0, 1.1f64..4.0).prop_map(|(c, e)| KernelForm::Power {
            coeff: c,
            exponent: e
        }),
        (0.0f64..10.0).prop_map(|a| KernelForm::LogLog { a }),
        prop::collection::vec(0.0f64..2.0, 1..8).prop_map(KernelForm::Table),
    ];
    let kind = prop_oneof![
        form.clone().prop_map(FamilyKind::Scaled),
        (form, 1u64..64).prop_map(|(base, n1)| FamilyKind::ShortRangeCutoff { base, n1 }),
        (0.0f64..10.0).prop_map(|a| FamilyKind::LogLogCritical { a }),
        (0.0f64..10.0, 0.0f64..3.0, 1u64..64)
            .prop_map(|(a, n0, n1)| FamilyKind::SiteBondTheorem4 { a, n0, n1 }),
    ];
    kind.prop_map(|k| KernelFamily::new(p(2, 1, 8), k).unwrap())
}

proptest! {
    #[test]
    fn open_probability_is_monotone_in_lambda(f in family(), a in 0.0f64..5.0, b in 0.0f64..5.0, k in 1u32..=8) {
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(f.at(lo).unwrap().open_probability(k) <= f.at(hi).unwrap().open_probability(k));
    }

    #[test]
    fn tail_telescopes(f in family(), lambda in 0.0f64..5.0, m in 0u32..30) {
        let k = f.at(lambda).unwrap();
        let (t0, t1) = (k.tail_sum(m).unwrap(), k.tail_sum(m + 1).unwrap());
        let step = k.annulus_sum(m + 1);
        prop_assert!((t0 - (step + t1)).abs() <= 1e-12 * t0.max(1e-300));
    }

    #[test]
    fn descriptor_round_trips(f in family(), lambda in 0.0f64..5.0) {
        let k = f.at(lambda).unwrap();
        prop_assert_eq!(Kernel::from_text(&k.to_text()).unwrap(), k);
    }
}
