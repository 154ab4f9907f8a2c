//! Interactions between block sets against the brute-force double sum.

use hlp::renorm::interaction::{cross_counts, interaction};
use hlp::{BlockId, Error, Kernel, KernelForm, LatticeParams, Vertex};
use proptest::prelude::*;

fn brute(p: &LatticeParams, k: &Kernel, a: &[BlockId], b: &[BlockId]) -> f64 {
    let mut total = 0.0;
    for x in a {
        for u in p.block_range(*x) {
            for y in b {
                for v in p.block_range(*y) {
                    total += k.weight(p.distance_scale(Vertex(u), Vertex(v)).unwrap());
                }
            }
        }
    }
    total
}

fn overlaps(p: &LatticeParams, x: BlockId, y: BlockId) -> bool {
    let (a, b) = (p.block_range(x), p.block_range(y));
    a.start < b.end && b.start < a.end
}

/// Greedily keeps the blocks that are disjoint from all kept so far.
fn disjoint(p: &LatticeParams, raw: &[(u32, u64)], taken: &mut Vec<BlockId>) -> Vec<BlockId> {
    let mut out = Vec::new();
    for &(level, i) in raw {
        let level = level % (p.n() + 1);
        let b = BlockId {
            level,
            index: i % p.block_count(level),
        };
        if !taken.iter().any(|t| overlaps(p, *t, b)) {
            taken.push(b);
            out.push(b);
        }
    }
    out
}

fn lattice() -> impl Strategy<Value = LatticeParams> {
    prop_oneof![
        (1u32..=7).prop_map(|n| LatticeParams::new(2, 1, n).unwrap()),
        (1u32..=4).prop_map(|n| LatticeParams::new(3, 1, n).unwrap()),
        (1u32..=3).prop_map(|n| LatticeParams::new(2, 2, n).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn closed_form_equals_double_sum(
        p in lattice(),
        coeff in 0.01f64..50.0,
        exponent in 0.5f64..3.0,
        raw_a in prop::collection::vec((0u32..8, 0u64..1000), 0..5),
        raw_b in prop::collection::vec((0u32..8, 0u64..1000), 0..5),
    ) {
        let k = Kernel::from_form(p, KernelForm::Power { coeff, exponent }).unwrap();
        let mut taken = Vec::new();
        let a = disjoint(&p, &raw_a, &mut taken);
        let b = disjoint(&p, &raw_b, &mut taken);
        let got = interaction(&a, &b, &k).unwrap();
        let want = brute(&p, &k, &a, &b);
        prop_assert!((got.value - want).abs() <= 1e-12 * want.abs(), "{} vs {}", got.value, want);
        prop_assert!((got.no_edge_probability - (-want).exp()).abs() <= 1e-12);
        // Symmetric, and the counts add up to |A||B|.
        let back = interaction(&b, &a, &k).unwrap();
        prop_assert_eq!(&back.coefficients, &got.coefficients);
        let size = |s: &[BlockId]| s.iter().map(|x| p.block_volume(x.level) as u128).sum::<u128>();
        let total: u128 = got.coefficients.iter().map(|c| c.1).sum();
        prop_assert_eq!(total, size(&a) * size(&b));
    }
}

#[test]
fn two_single_blocks_share_one_scale() {
    let p = LatticeParams::new(2, 2, 4).unwrap();
    let k = Kernel::from_form(
        p,
        KernelForm::Power {
            coeff: 3.0,
            exponent: 2.0,
        },
    )
    .unwrap();
    // Level-1 blocks 0 and 5 first differ at hierarchical index 2 (base 4).
    let a = [BlockId { level: 1, index: 0 }];
    let b = [BlockId { level: 1, index: 5 }];
    let got = interaction(&a, &b, &k).unwrap();
    assert_eq!(got.coefficients, vec![(3, 16)]);
    assert_eq!(got.value, 16.0 * k.weight(3));
}

#[test]
fn empty_side_has_no_interaction() {
    let p = LatticeParams::new(2, 1, 3).unwrap();
    let k = Kernel::from_form(
        p,
        KernelForm::Power {
            coeff: 3.0,
            exponent: 2.0,
        },
    )
    .unwrap();
    let got = interaction(&[BlockId { level: 1, index: 0 }], &[], &k).unwrap();
    assert_eq!((got.value, got.no_edge_probability), (0.0, 1.0));
    assert!(got.coefficients.is_empty());
}

#[test]
fn overlapping_sets_are_an_error() {
    let p = LatticeParams::new(2, 1, 3).unwrap();
    let k = Kernel::from_form(
        p,
        KernelForm::Power {
            coeff: 3.0,
            exponent: 2.0,
        },
    )
    .unwrap();
    let a = [BlockId { level: 2, index: 0 }];
    let b = [BlockId { level: 1, index: 1 }];
    assert!(matches!(interaction(&a, &b, &k), Err(Error::Overlap)));
    let twice = [
        BlockId { level: 0, index: 3 },
        BlockId { level: 0, index: 3 },
    ];
    assert!(matches!(cross_counts(&p, &twice, &[]), Err(Error::Overlap)));
}

#[test]
fn counts_stay_exact_beyond_f64_integers() {
    // Two 30-blocks of Λ_31: 2^60 cross pairs, exact in u128.
    let p = LatticeParams::new(2, 1, 31).unwrap();
    let c = cross_counts(
        &p,
        &[BlockId {
            level: 30,
            index: 0,
        }],
        &[BlockId {
            level: 30,
            index: 1,
        }],
    )
    .unwrap();
    assert_eq!(c.into_iter().collect::<Vec<_>>(), vec![(31, 1u128 << 60)]);
}
