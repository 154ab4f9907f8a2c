//! Addressing and counting on small boxes, checked exhaustively.

use hlp::{BlockId, LatticeParams, Vertex};
use proptest::prelude::*;

fn p(l: u32, d: u32, n: u32) -> LatticeParams {
    LatticeParams::new(l, d, n).unwrap()
}

/// `1 +` the highest hierarchical index whose digit tuples differ.
fn digit_scan(q: &LatticeParams, x: u64, y: u64) -> u32 {
    let (a, b) = (
        q.coordinates(Vertex(x)).unwrap(),
        q.coordinates(Vertex(y)).unwrap(),
    );
    (0..q.n())
        .rev()
        .find(|&i| a[i as usize] != b[i as usize])
        .map_or(0, |i| i + 1)
}

#[test]
fn binary_examples() {
    let q = p(2, 1, 3);
    let x = q.from_coordinates(&[vec![0], vec![0], vec![0]]).unwrap();
    let y = q.from_coordinates(&[vec![0], vec![1], vec![0]]).unwrap();
    assert_eq!(q.distance_scale(x, y).unwrap(), 2);
    let z = q.from_coordinates(&[vec![1], vec![0], vec![0]]).unwrap();
    assert_eq!(q.distance_scale(z, x).unwrap(), 1);
}

#[test]
fn equal_points_have_no_distance() {
    let q = p(2, 1, 3);
    let e = q.distance_scale(Vertex(5), Vertex(5)).unwrap_err();
    assert!(e
        .to_string()
        .contains("distance undefined for equal points"));
    assert!(q.distance(Vertex(5), Vertex(5)).is_err());
}

#[test]
fn distance_matches_digit_scan_on_l3_d2() {
    let q = p(3, 2, 2);
    for x in 0..q.volume() {
        for y in 0..q.volume() {
            if x != y {
                assert_eq!(
                    q.distance_scale(Vertex(x), Vertex(y)).unwrap(),
                    digit_scan(&q, x, y)
                );
            }
        }
    }
}

#[test]
fn pair_count_examples() {
    let q = p(2, 1, 2);
    assert_eq!(q.pair_count(1).unwrap(), 2);
    assert_eq!(q.pair_count(2).unwrap(), 4);
}

#[test]
fn pair_count_matches_enumeration_up_to_4096_vertices() {
    for l in 2..=16u32 {
        for d in 1..=12u32 {
            for n in 1..=12u32 {
                let Ok(q) = LatticeParams::new(l, d, n) else {
                    continue;
                };
                if q.volume() > 4096 {
                    continue;
                }
                let mut counts = vec![0u128; n as usize + 1];
                for x in 0..q.volume() {
                    for y in x + 1..q.volume() {
                        counts[q.distance_scale(Vertex(x), Vertex(y)).unwrap() as usize] += 1;
                    }
                }
                for k in 1..=n {
                    assert_eq!(
                        q.pair_count(k).unwrap(),
                        counts[k as usize],
                        "L={l} d={d} n={n} k={k}"
                    );
                }
                let v = q.volume() as u128;
                assert_eq!(counts.iter().sum::<u128>(), v * (v - 1) / 2);
            }
        }
    }
}

#[test]
fn flattening_raises_distances_to_the_power_d() {
    let q = p(2, 2, 3);
    let f = q.flatten().unwrap();
    assert_eq!((f.l(), f.d(), f.n()), (4, 1, 3));
    // Points differing only in the second coordinate of index 1.
    let x = q
        .from_coordinates(&[vec![0, 0], vec![0, 0], vec![0, 0]])
        .unwrap();
    let y = q
        .from_coordinates(&[vec![0, 1], vec![0, 0], vec![0, 0]])
        .unwrap();
    assert_eq!(q.distance(x, y).unwrap(), 2);
    let (fx, fy) = (q.flatten_vertex(x).unwrap(), q.flatten_vertex(y).unwrap());
    assert_eq!(f.distance(fx, fy).unwrap(), 4);
    for a in 0..q.volume() {
        for b in a + 1..q.volume() {
            let (a, b) = (Vertex(a), Vertex(b));
            let (fa, fb) = (q.flatten_vertex(a).unwrap(), q.flatten_vertex(b).unwrap());
            assert_eq!(
                f.distance(fa, fb).unwrap(),
                q.distance(a, b).unwrap().pow(2)
            );
        }
    }
}

#[test]
fn flattening_is_the_identity_for_d1() {
    let q = p(3, 1, 4);
    assert_eq!(q.flatten().unwrap(), q);
    assert!((0..q.volume()).all(|x| q.flatten_vertex(Vertex(x)).unwrap() == Vertex(x)));
}

fn lattice() -> impl Strategy<Value = LatticeParams> {
    (2u32..=5, 1u32..=3, 1u32..=5).prop_filter_map("volume", |(l, d, n)| {
        LatticeParams::new(l, d, n)
            .ok()
            .filter(|q| q.volume() <= 1 << 20)
    })
}

proptest! {
    #[test]
    fn ultrametric(q in lattice(), a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let v = q.volume();
        let (x, y, z) = (Vertex(a % v), Vertex(b % v), Vertex(c % v));
        prop_assume!(x != y && y != z && x != z);
        let d = |s, t| q.distance_scale(s, t).unwrap();
        prop_assert!(d(x, z) <= d(x, y).max(d(y, z)));
        prop_assert_eq!(d(x, y), d(y, x));
    }

    #[test]
    fn close_iff_same_block(q in lattice(), a in any::<u64>(), b in any::<u64>(), k in 0u32..6) {
        let v = q.volume();
        let (x, y) = (Vertex(a % v), Vertex(b % v));
        prop_assume!(x != y && k <= q.n());
        let same = q.block_of(x, k).unwrap() == q.block_of(y, k).unwrap();
        prop_assert_eq!(q.distance_scale(x, y).unwrap() <= k, same);
    }

    #[test]
    fn coordinates_round_trip(q in lattice(), a in any::<u64>()) {
        let x = Vertex(a % q.volume());
        let c = q.coordinates(x).unwrap();
        prop_assert_eq!(c.len(), q.n() as usize);
        prop_assert!(c.iter().all(|t| t.len() == q.d() as usize && t.iter().all(|&g| g < q.l())));
        prop_assert_eq!(q.from_coordinates(&c).unwrap(), x);
    }

    #[test]
    fn blocks_tile_the_box(q in lattice(), level in 0u32..6) {
        prop_assume!(level <= q.n());
        let mut next = 0;
        for b in q.blocks(level) {
            let r = q.block_range(b);
            prop_assert_eq!(r.start, next);
            prop_assert_eq!(r.end - r.start, q.block_volume(level));
            prop_assert_eq!(q.block_of(Vertex(r.start), level).unwrap(), BlockId { level, index: b.index });
            next = r.end;
        }
        prop_assert_eq!(next, q.volume());
    }
}
