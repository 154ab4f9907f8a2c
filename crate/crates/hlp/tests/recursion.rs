//! The bad-block bound recursion.

use hlp::renorm::recursion::bm_recursion;

#[test]
fn induction_target_holds_through_ten_thousand() {
    let m0 = 128u64;
    let r = bm_recursion(2, 401.0, m0, (m0 as f64).powi(-7), 10_000).unwrap();
    assert!(r.verdict);
    assert_eq!(r.first_failure, None);
    assert_eq!(r.values.len(), 10_000 - 128 + 1);
    // Each step obeys the coarser chain b_{m+1} ≤ 2⁴m⁵b_m² + 2m⁵m^{−20}.
    for w in r.values.windows(2) {
        let ((m, b), (_, next)) = (w[0], w[1]);
        let mf = m as f64;
        assert!(
            next <= 16.0 * mf.powi(5) * b * b + 2.0 * mf.powi(5) * mf.powi(-20),
            "m = {m}"
        );
        assert!(b <= mf.powi(-7));
    }
}

#[test]
fn unit_start_fails_at_once() {
    let r = bm_recursion(2, 401.0, 128, 1.0, 200).unwrap();
    assert!(!r.verdict);
    assert_eq!(r.first_failure, Some(128));
}

#[test]
fn zero_exponent_leaves_a_growing_term() {
    let r = bm_recursion(2, 0.0, 128, 0.0, 140).unwrap();
    assert!(!r.verdict);
    // b_{M+1} = (M+1)² L³ exactly.
    assert_eq!(r.values[1].1, 129.0 * 129.0 * 8.0);
    assert_eq!(r.first_failure, Some(129));
}

#[test]
fn weak_kernel_constant_breaks_the_induction() {
    // a/(10L) must beat the m⁵ growth in the additive term.
    let r = bm_recursion(2, 100.0, 128, 128f64.powi(-7), 1000).unwrap();
    assert!(!r.verdict);
}

#[test]
fn csv_lists_every_step() {
    let r = bm_recursion(2, 401.0, 128, 128f64.powi(-7), 130).unwrap();
    let csv = r.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "m,b_m,target,holds");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("128,") && lines[1].ends_with(",true"));
}

#[test]
fn bad_arguments_are_rejected() {
    assert!(bm_recursion(1, 401.0, 128, 0.0, 200).is_err());
    assert!(bm_recursion(2, 401.0, 128, 0.0, 100).is_err());
    assert!(bm_recursion(2, -1.0, 128, 0.0, 200).is_err());
}
