//! Restricted largest clusters of every block at selected levels.
//!
//! Edges are stored sorted by scale, so sweeping one union-find upwards
//! through the scales yields, after all edges of scale `≤ ℓ` are in,
//! exactly the restricted clusters of every `ℓ`-block at once.

use crate::sampler::ClusterForest;
use crate::unionfind::UnionFind;

#[derive(Debug, Clone)]
pub struct LevelData {
    pub level: u32,
    /// `|K_max|` per block.
    pub k_max: Vec<u64>,
    /// Per vertex: lies in the `K_max` of its block at this level.
    pub in_k_max: Vec<bool>,
}

/// `LevelData` at each requested level (ascending, deduplicated).
pub fn sweep(forest: &ClusterForest, levels: &[u32]) -> Vec<LevelData> {
    let p = *forest.params();
    let volume = p.volume() as usize;
    let mut uf = UnionFind::new(volume);
    let edges = forest.edges();
    let mut next = 0;
    let mut out = Vec::with_capacity(levels.len());
    for &level in levels {
        while next < edges.len() && edges[next].k <= level {
            uf.union(edges[next].u, edges[next].v);
            next += 1;
        }
        let bv = p.block_volume(level) as usize;
        let blocks = volume / bv;
        let mut k_max = vec![0u64; blocks];
        let mut best_root = vec![u32::MAX; blocks];
        for v in 0..volume as u32 {
            if !forest.is_open(v) {
                continue;
            }
            let r = uf.find(v);
            if uf.min_of_root(r) != v {
                continue;
            }
            let b = v as usize / bv;
            let size = uf.size_of_root(r) as u64;
            // Visiting minima in increasing order keeps the smallest on ties.
            if size > k_max[b] {
                k_max[b] = size;
                best_root[b] = r;
            }
        }
        let in_k_max = (0..volume as u32)
            .map(|v| forest.is_open(v) && uf.find(v) == best_root[v as usize / bv])
            .collect();
        out.push(LevelData {
            level,
            k_max,
            in_k_max,
        });
    }
    out
}

/// Components of a graph on `n` nodes given as an edge list; returns a
/// component label per node (labels are smallest member indices).
pub fn components(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Vec<usize> {
    let mut uf = UnionFind::new(n);
    for (a, b) in edges {
        uf.union(a as u32, b as u32);
    }
    (0..n as u32)
        .map(|i| {
            let r = uf.find(i);
            uf.min_of_root(r) as usize
        })
        .collect()
}
