//! Interaction `J(A, B)` between disjoint unions of blocks.
//!
//! Two disjoint blocks `α ⊂ Λ_{ℓ₁}`, `β ⊂ Λ_{ℓ₂}` see each other at one
//! distance scale only, so `J(A, B) = Σ_k c_k J(L^k)` with exact integer
//! cross-pair counts `c_k`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::kernel::Kernel;
use crate::lattice::{scale_unchecked, BlockId, LatticeParams};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Interaction {
    /// `(k, c_k)` with `c_k > 0`, ascending in `k`.
    pub coefficients: Vec<(u32, u128)>,
    pub value: f64,
    /// `exp(−J(A, B))`.
    pub no_edge_probability: f64,
}

fn ancestor(b: BlockId, level: u32, base: u64) -> u64 {
    b.index / base.pow(level - b.level)
}

/// Scale of every cross pair of two blocks, or `None` if they intersect.
fn block_scale(x: BlockId, y: BlockId, base: u64) -> Option<u32> {
    let top = x.level.max(y.level);
    let (a, b) = (ancestor(x, top, base), ancestor(y, top, base));
    (a != b).then(|| top + scale_unchecked(base, a, b))
}

fn check_blocks(params: &LatticeParams, set: &[BlockId]) -> Result<()> {
    for b in set {
        if b.level > params.n() || b.index >= params.block_count(b.level) {
            return Err(invalid(format!("block {b:?} outside the box")));
        }
    }
    let base = params.base();
    for (i, x) in set.iter().enumerate() {
        if set[i + 1..]
            .iter()
            .any(|y| block_scale(*x, *y, base).is_none())
        {
            return Err(Error::Overlap);
        }
    }
    Ok(())
}

/// Exact cross-pair counts per scale between two block sets.
pub fn cross_counts(
    params: &LatticeParams,
    a: &[BlockId],
    b: &[BlockId],
) -> Result<BTreeMap<u32, u128>> {
    check_blocks(params, a)?;
    check_blocks(params, b)?;
    let base = params.base();
    let mut c = BTreeMap::new();
    for x in a {
        for y in b {
            let k = block_scale(*x, *y, base).ok_or(Error::Overlap)?;
            let pairs = (params.block_volume(x.level) as u128)
                .checked_mul(params.block_volume(y.level) as u128)
                .ok_or(Error::Overflow("cross-pair count"))?;
            let e = c.entry(k).or_insert(0u128);
            *e = e
                .checked_add(pairs)
                .ok_or(Error::Overflow("cross-pair count"))?;
        }
    }
    Ok(c)
}

/// `J(A, B)` and the probability that no open edge joins `A` and `B`.
pub fn interaction(a: &[BlockId], b: &[BlockId], kernel: &Kernel) -> Result<Interaction> {
    let c = cross_counts(kernel.params(), a, b)?;
    let value = c
        .iter()
        .map(|(&k, &n)| n as f64 * kernel.weight(k))
        .sum::<f64>();
    Ok(Interaction {
        coefficients: c.into_iter().collect(),
        value,
        no_edge_probability: (-value).exp(),
    })
}
