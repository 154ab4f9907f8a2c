//! Geometry of the box `Λ_n ⊂ H_L^d`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// `(L, d, n)` with `L ≥ 2`, `d ≥ 1` and `L^{nd}` representable in `u64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeParams {
    l: u32,
    d: u32,
    n: u32,
}

/// A vertex of `Λ_n`, as its mixed-radix index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Vertex(pub u64);

/// The `index`-th block of level `level`; it covers the index range
/// `index·L^{ℓd} .. (index+1)·L^{ℓd}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockId {
    pub level: u32,
    pub index: u64,
}

impl LatticeParams {
    pub fn new(l: u32, d: u32, n: u32) -> Result<Self> {
        if l < 2 {
            return Err(invalid(format!("L must be at least 2, got {l}")));
        }
        if d < 1 {
            return Err(invalid("d must be at least 1"));
        }
        let base = (l as u64)
            .checked_pow(d)
            .ok_or(Error::Overflow("L^d exceeds u64"))?;
        base.checked_pow(n)
            .ok_or(Error::Overflow("L^{nd} exceeds u64"))?;
        Ok(Self { l, d, n })
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// `L^d`, the number of children of every block.
    pub fn base(&self) -> u64 {
        (self.l as u64).pow(self.d)
    }

    /// `L^{ℓd}` for `ℓ ≤ n`.
    pub fn block_volume(&self, level: u32) -> u64 {
        debug_assert!(level <= self.n);
        self.base().pow(level)
    }

    pub fn volume(&self) -> u64 {
        self.block_volume(self.n)
    }

    /// Same `(L, d)` with a different box level.
    pub fn with_n(&self, n: u32) -> Result<Self> {
        Self::new(self.l, self.d, n)
    }

    fn check(&self, v: Vertex) -> Result<()> {
        if v.0 >= self.volume() {
            return Err(Error::VertexOutOfRange {
                vertex: v.0,
                volume: self.volume(),
            });
        }
        Ok(())
    }

    /// Scale `k` of a pair of distinct points: `‖x − y‖ = L^k`.
    pub fn distance_scale(&self, x: Vertex, y: Vertex) -> Result<u32> {
        self.check(x)?;
        self.check(y)?;
        if x == y {
            return Err(invalid("distance undefined for equal points"));
        }
        Ok(scale_unchecked(self.base(), x.0, y.0))
    }

    /// `‖x − y‖` itself, for distinct points.
    pub fn distance(&self, x: Vertex, y: Vertex) -> Result<u128> {
        Ok((self.l as u128).pow(self.distance_scale(x, y)?))
    }

    pub fn block_of(&self, x: Vertex, level: u32) -> Result<BlockId> {
        self.check(x)?;
        if level > self.n {
            return Err(Error::ScaleOutOfRange {
                scale: level,
                max: self.n,
            });
        }
        Ok(BlockId {
            level,
            index: x.0 / self.block_volume(level),
        })
    }

    /// Number of blocks of level `level` in the box.
    pub fn block_count(&self, level: u32) -> u64 {
        self.base().pow(self.n - level)
    }

    pub fn blocks(&self, level: u32) -> impl Iterator<Item = BlockId> {
        (0..self.block_count(level)).map(move |index| BlockId { level, index })
    }

    pub fn block_range(&self, b: BlockId) -> Range<u64> {
        let v = self.block_volume(b.level);
        b.index * v..(b.index + 1) * v
    }

    /// Number of unordered pairs in `Λ_n` at scale `k`:
    /// `L^{nd}(L^{kd} − L^{(k−1)d}) / 2`.
    pub fn pair_count(&self, k: u32) -> Result<u128> {
        if k < 1 || k > self.n {
            return Err(Error::ScaleOutOfRange {
                scale: k,
                max: self.n,
            });
        }
        let b = self.base() as u128;
        let shell = b.pow(k) - b.pow(k - 1);
        (self.volume() as u128)
            .checked_mul(shell)
            .map(|p| p / 2)
            .ok_or(Error::Overflow("pair count"))
    }

    /// Per-index digit tuples of `x`, lowest hierarchical index first;
    /// tuple `i` holds the `d` base-`L` coordinates of that index.
    pub fn coordinates(&self, x: Vertex) -> Result<Vec<Vec<u32>>> {
        self.check(x)?;
        let (b, l) = (self.base(), self.l as u64);
        let mut rest = x.0;
        let mut out = Vec::with_capacity(self.n as usize);
        for _ in 0..self.n {
            let mut t = rest % b;
            rest /= b;
            let mut tuple = Vec::with_capacity(self.d as usize);
            for _ in 0..self.d {
                tuple.push((t % l) as u32);
                t /= l;
            }
            out.push(tuple);
        }
        Ok(out)
    }

    pub fn from_coordinates(&self, coords: &[Vec<u32>]) -> Result<Vertex> {
        if coords.len() != self.n as usize {
            return Err(invalid("coordinate count differs from n"));
        }
        let (b, l) = (self.base(), self.l as u64);
        let mut x = 0u64;
        for tuple in coords.iter().rev() {
            if tuple.len() != self.d as usize || tuple.iter().any(|&c| c >= self.l) {
                return Err(invalid("malformed coordinate tuple"));
            }
            let t = tuple.iter().rev().fold(0u64, |acc, &c| acc * l + c as u64);
            x = x * b + t;
        }
        Ok(Vertex(x))
    }

    /// Parameters of the flattened lattice `H_{L^d}^1` with the same `n`.
    pub fn flatten(&self) -> Result<LatticeParams> {
        let b = u32::try_from(self.base()).map_err(|_| Error::Overflow("L^d exceeds u32"))?;
        LatticeParams::new(b, 1, self.n)
    }

    /// The isometry-up-to-power `φ : H_L^d → H_{L^d}^1`. Each digit tuple
    /// becomes one base-`L^d` digit, so the index is unchanged.
    pub fn flatten_vertex(&self, x: Vertex) -> Result<Vertex> {
        self.check(x)?;
        Ok(x)
    }
}

/// Scale of a pair of in-range indices for a lattice with `base = L^d`.
#[inline]
pub(crate) fn scale_unchecked(base: u64, x: u64, y: u64) -> u32 {
    if x == y {
        return 0;
    }
    if base.is_power_of_two() {
        let bits = base.trailing_zeros();
        let top = 64 - (x ^ y).leading_zeros();
        return top.div_ceil(bits);
    }
    let (mut a, mut b, mut k) = (x, y, 0);
    while a != b {
        a /= base;
        b /= base;
        k += 1;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(LatticeParams::new(1, 1, 3).is_err());
        assert!(LatticeParams::new(2, 0, 3).is_err());
        assert!(LatticeParams::new(2, 1, 64).is_err());
        assert!(LatticeParams::new(2, 1, 63).is_ok());
    }

    #[test]
    fn small_distances() {
        let p = LatticeParams::new(2, 1, 3).unwrap();
        assert_eq!(p.distance_scale(Vertex(0), Vertex(1)).unwrap(), 1);
        assert_eq!(p.distance_scale(Vertex(0), Vertex(2)).unwrap(), 2);
        assert_eq!(p.distance_scale(Vertex(3), Vertex(4)).unwrap(), 3);
        assert_eq!(p.distance(Vertex(3), Vertex(4)).unwrap(), 8);
        assert!(p.distance_scale(Vertex(0), Vertex(8)).is_err());
    }

    #[test]
    fn non_power_of_two_base() {
        let p = LatticeParams::new(3, 1, 4).unwrap();
        assert_eq!(p.distance_scale(Vertex(0), Vertex(2)).unwrap(), 1);
        assert_eq!(p.distance_scale(Vertex(2), Vertex(3)).unwrap(), 2);
        assert_eq!(p.distance_scale(Vertex(8), Vertex(9)).unwrap(), 3);
    }

    #[test]
    fn pair_count_l2_d1() {
        let p = LatticeParams::new(2, 1, 3).unwrap();
        let counts: Vec<u128> = (1..=3).map(|k| p.pair_count(k).unwrap()).collect();
        assert_eq!(counts, vec![4, 8, 16]);
        assert!(p.pair_count(0).is_err());
        assert!(p.pair_count(4).is_err());
    }

    #[test]
    fn block_ranges_are_contiguous() {
        let p = LatticeParams::new(3, 2, 2).unwrap();
        let b = p.block_of(Vertex(40), 1).unwrap();
        assert_eq!(b, BlockId { level: 1, index: 4 });
        assert_eq!(p.block_range(b), 36..45);
        assert_eq!(p.blocks(1).count(), 9);
    }
}
