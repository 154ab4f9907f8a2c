//! The multiset recursion against direct sampling, and its bookkeeping.

mod common;

use common::*;
use hlp::coarse::{
    contract_kernel, contract_to_site_bond, merge_blocks, sample_recursive, split_metavertices,
    BlockState, Truncation,
};
use hlp::estimate::stats::chi_square_two_sample;
use hlp::rng;
use hlp::sampler::{sample_direct, SampleSpec};
use hlp::{FamilyKind, Kernel, KernelFamily, KernelForm};
use proptest::prelude::*;
use std::collections::BTreeMap;

/// Counts of each cluster-size multiset.
fn multiset_counts<I: Iterator<Item = Vec<u64>>>(it: I) -> BTreeMap<Vec<u64>, u64> {
    let mut m = BTreeMap::new();
    for s in it {
        *m.entry(s).or_insert(0) += 1;
    }
    m
}

fn aligned(a: &BTreeMap<Vec<u64>, u64>, b: &BTreeMap<Vec<u64>, u64>) -> (Vec<u64>, Vec<u64>) {
    let keys: std::collections::BTreeSet<_> = a.keys().chain(b.keys()).collect();
    keys.into_iter()
        .map(|k| {
            (
                a.get(k).copied().unwrap_or(0),
                b.get(k).copied().unwrap_or(0),
            )
        })
        .unzip()
}

#[test]
fn recursive_law_matches_direct_on_small_boxes() {
    let trials = 30_000u64;
    for n in [2u32, 3] {
        for c in [0.6, 12.0] {
            let k = power_kernel(params(2, 1, n), c);
            let direct = multiset_counts((0..trials).map(|s| {
                sample_direct(&SampleSpec::bond(k.clone(), s))
                    .unwrap()
                    .cluster_stats(None)
                    .unwrap()
                    .multiset()
            }));
            let rec = multiset_counts(
                (0..trials).map(|s| sample_recursive(&k, 1.0, 1 << 32 | s, None).unwrap().sizes),
            );
            let (a, b) = aligned(&direct, &rec);
            let t = chi_square_two_sample(&a, &b);
            assert!(t.p_value > 0.001, "n={n} c={c}: {t:?}");
        }
    }
}

#[test]
fn site_bond_recursion_matches_direct() {
    let trials = 30_000u64;
    let k = power_kernel(params(2, 1, 3), 6.0);
    let direct = multiset_counts((0..trials).map(|s| {
        let mut spec = SampleSpec::bond(k.clone(), s);
        spec.q = 0.6;
        sample_direct(&spec)
            .unwrap()
            .cluster_stats(None)
            .unwrap()
            .multiset()
    }));
    let rec = multiset_counts(
        (0..trials).map(|s| sample_recursive(&k, 0.6, 1 << 33 | s, None).unwrap().sizes),
    );
    let (a, b) = aligned(&direct, &rec);
    assert!(chi_square_two_sample(&a, &b).p_value > 0.001);
}

#[test]
fn one_merge_matches_direct_k_max() {
    // Two children of Λ_2 sampled directly, then merged, against Λ_3.
    let c = 5.0;
    let big = power_kernel(params(2, 1, 3), c);
    let half = power_kernel(params(2, 1, 2), c);
    let trials = 30_000u64;
    let mut merged = vec![0u64; 9];
    let mut direct = vec![0u64; 9];
    for s in 0..trials {
        let kids: Vec<BlockState> = (0..2)
            .map(|i| {
                let f =
                    sample_direct(&SampleSpec::bond(half.clone(), rng::derive_seed(s, i))).unwrap();
                BlockState::new(2, f.cluster_stats(None).unwrap().multiset())
            })
            .collect();
        let m = merge_blocks(&kids, big.weight(3), &mut rng::stream(s, 99)).unwrap();
        merged[m.k_max() as usize] += 1;
        let f = sample_direct(&SampleSpec::bond(big.clone(), 1 << 40 | s)).unwrap();
        direct[f.cluster_stats(None).unwrap().k_max as usize] += 1;
    }
    assert!(chi_square_two_sample(&merged, &direct).p_value > 0.001);
}

#[test]
fn extreme_kernels() {
    let zero = power_kernel(params(2, 1, 6), 0.0);
    assert_eq!(
        sample_recursive(&zero, 1.0, 0, None).unwrap().sizes,
        vec![1; 64]
    );
    assert!(sample_recursive(&zero, 0.0, 0, None)
        .unwrap()
        .sizes
        .is_empty());
    let huge = Kernel::from_form(params(2, 1, 6), KernelForm::Table(vec![60.0; 6])).unwrap();
    assert_eq!(
        sample_recursive(&huge, 1.0, 3, None).unwrap().sizes,
        vec![64]
    );
    let kids = [BlockState::new(0, vec![1]), BlockState::new(0, vec![1])];
    assert_eq!(
        merge_blocks(&kids, 100.0, &mut rng::stream(0, 0))
            .unwrap()
            .sizes,
        vec![2]
    );
}

#[test]
fn recursion_is_deterministic() {
    let k = power_kernel(params(2, 1, 12), 3.0);
    let a = sample_recursive(&k, 0.8, 42, None).unwrap();
    assert_eq!(a, sample_recursive(&k, 0.8, 42, None).unwrap());
    assert_eq!(BlockState::from_csv(&a.to_csv()).unwrap(), a);
}

#[test]
fn truncation_ledger_balances() {
    let k = power_kernel(params(2, 1, 10), 1.5);
    for seed in 0..50 {
        let t = Truncation {
            threshold: 4,
            from_level: 5,
        };
        let s = sample_recursive(&k, 1.0, seed, Some(t)).unwrap();
        let l = s.ledger.expect("ledger present");
        assert_eq!(s.mass() + l.dropped_mass, 1024);
        assert!(s.sizes.iter().all(|&x| x >= 4));
        assert!(l.dropped_clusters <= l.dropped_mass);
    }
}

#[test]
fn metavertex_examples() {
    let one = split_metavertices(&[10], 1.0, 10.0).unwrap();
    assert_eq!(one.pieces.len(), 1);
    let s = split_metavertices(&[100], 1.0, 10.0).unwrap();
    assert!(s.pieces.iter().all(|p| (10..=20).contains(&p.size)));
    assert!(s.pieces.iter().map(|p| p.size).sum::<u64>() <= 100);
    assert!((5..=10).contains(&s.pieces.len()));
    assert!(split_metavertices(&[3, 2], 1.0, 10.0)
        .unwrap()
        .pieces
        .is_empty());
    assert!(split_metavertices(&[3], 0.01, 5.0).is_err());
    assert!(split_metavertices(&[3], 0.0, 10.0).is_err());
}

#[test]
fn site_bond_contraction_edges() {
    let k = power_kernel(params(2, 1, 8), 4.0);
    let tiny = contract_to_site_bond(&k, 4, 3, 1e-9, 200, 1).unwrap();
    assert_eq!(tiny.q_eff.value, 1.0);
    let zero = power_kernel(params(2, 1, 8), 0.0);
    // K_max = 1 with no edges: dense iff τ ≤ 1/16.
    assert_eq!(
        contract_to_site_bond(&zero, 4, 3, 1.0 / 16.0, 100, 1)
            .unwrap()
            .q_eff
            .value,
        1.0
    );
    assert_eq!(
        contract_to_site_bond(&zero, 4, 3, 0.07, 100, 1)
            .unwrap()
            .q_eff
            .value,
        0.0
    );
    let e = contract_to_site_bond(&k, 3, 2, 0.5, 10, 1).unwrap();
    assert_eq!(e.kernel_table.len(), 2);
    assert!((e.kernel_table[0] - 16.0 * k.weight(4)).abs() < 1e-15);
}

#[test]
fn supercritical_dense_probability_grows_with_n() {
    // Expected sibling edges grow like log k, so density firms up with n.
    let f = KernelFamily::new(params(2, 1, 12), FamilyKind::LogLogCritical { a: 8.0 }).unwrap();
    let k = f.at(1.0).unwrap();
    let q: Vec<f64> = [4u32, 6, 8]
        .iter()
        .map(|&n| {
            contract_to_site_bond(&k, n, 1, 0.5, 2000, 7)
                .unwrap()
                .q_eff
                .value
        })
        .collect();
    assert!(q[0] < q[1] && q[1] < q[2], "{q:?}");
}

#[test]
fn contracted_kernel_scales_by_block_mass() {
    let k = power_kernel(params(3, 2, 2), 2.0);
    let c = contract_kernel(&k, 3, 4, 0.5).unwrap();
    for s in 1..=4 {
        let want = (0.5 * 729.0f64).powi(2) * k.weight(3 + s);
        assert!((c.weight(s) - want).abs() <= 1e-14 * want);
    }
}

proptest! {
    #[test]
    fn merging_conserves_mass(
        kids in prop::collection::vec(prop::collection::vec(1u64..20, 0..6), 2..5),
        w in 0.0f64..2.0,
        seed in any::<u64>(),
    ) {
        let states: Vec<BlockState> = kids.iter().map(|s| BlockState::new(3, s.clone())).collect();
        let m = merge_blocks(&states, w, &mut rng::stream(seed, 0)).unwrap();
        prop_assert_eq!(m.mass(), states.iter().map(BlockState::mass).sum::<u64>());
        prop_assert!(m.sizes.len() <= states.iter().map(|s| s.sizes.len()).sum::<usize>());
        prop_assert!(m.sizes.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn split_pieces_stay_in_range(sizes in prop::collection::vec(1u64..500, 0..10), r in 0.5f64..4.0, f in 1.0f64..30.0) {
        let s = split_metavertices(&sizes, r, f).unwrap();
        for p in &s.pieces {
            prop_assert!(p.size >= s.unit && p.size < 2 * s.unit);
            prop_assert!(sizes[p.parent] as f64 >= r * f);
        }
        let total: u64 = s.pieces.iter().map(|p| p.size).sum();
        prop_assert!(total <= s.qualifying_mass);
    }
}
