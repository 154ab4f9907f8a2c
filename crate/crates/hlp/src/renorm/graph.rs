//! Block graphs `G^bl` and `G^mx` on the `ℓ`-blocks of one `k`-block.

use serde::Serialize;

use super::levels::{components, sweep};
use crate::error::{invalid, Result};
use crate::lattice::BlockId;
use crate::sampler::ClusterForest;

/// Largest node count accepted by [`block_graph`].
pub const MAX_NODES: u64 = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GraphVariant {
    /// Adjacent iff some open edge joins the two blocks.
    Bl,
    /// Adjacent iff some open edge joins their restricted largest clusters.
    Mx,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockGraph {
    pub level: u32,
    pub container: BlockId,
    pub variant: GraphVariant,
    /// Level-`ℓ` block indices of the nodes, ascending.
    pub nodes: Vec<u64>,
    /// Symmetric adjacency over `nodes`.
    pub adjacency: Vec<Vec<bool>>,
}

impl BlockGraph {
    pub fn edge_count(&self) -> usize {
        self.adjacency
            .iter()
            .enumerate()
            .map(|(i, row)| row[i + 1..].iter().filter(|&&x| x).count())
            .sum()
    }

    pub fn component_labels(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let edges = (0..n).flat_map(|i| {
            (i + 1..n)
                .filter(move |&j| self.adjacency[i][j])
                .map(move |j| (i, j))
        });
        components(n, edges.collect::<Vec<_>>())
    }

    /// Connected, counting the empty graph as connected.
    pub fn is_connected(&self) -> bool {
        self.component_labels().iter().all(|&c| c == 0)
    }

    /// Every edge of `self` is an edge of `other` (same node set).
    pub fn is_subgraph_of(&self, other: &BlockGraph) -> bool {
        self.nodes == other.nodes
            && self
                .adjacency
                .iter()
                .zip(&other.adjacency)
                .all(|(a, b)| a.iter().zip(b).all(|(&x, &y)| !x || y))
    }
}

/// Graph on the `ℓ`-blocks inside `container` (a block of level `k > ℓ`),
/// optionally with one `ℓ`-block removed.
pub fn block_graph(
    forest: &ClusterForest,
    ell: u32,
    container: BlockId,
    variant: GraphVariant,
    removed: Option<u64>,
) -> Result<BlockGraph> {
    let p = *forest.params();
    let k = container.level;
    if ell >= k || k > p.n() || container.index >= p.block_count(k) {
        return Err(invalid("need ℓ < k ≤ n and a container inside the box"));
    }
    let span = p.base().pow(k - ell);
    if span > MAX_NODES {
        return Err(invalid(format!(
            "block graph with {span} nodes exceeds {MAX_NODES}"
        )));
    }
    let first = container.index * span;
    let nodes: Vec<u64> = (first..first + span)
        .filter(|&b| Some(b) != removed)
        .collect();
    if let Some(r) = removed {
        if !(first..first + span).contains(&r) {
            return Err(invalid("removed block is not inside the container"));
        }
    }
    let pos = |b: u64| nodes.binary_search(&b).ok();
    let flags = match variant {
        GraphVariant::Mx => Some(sweep(forest, &[ell]).pop().expect("one level").in_k_max),
        GraphVariant::Bl => None,
    };
    let bv = p.block_volume(ell);
    let range = p.block_range(container);
    let mut adjacency = vec![vec![false; nodes.len()]; nodes.len()];
    for e in forest.edges() {
        if e.k <= ell || e.k > k || !range.contains(&(e.u as u64)) {
            continue;
        }
        if let Some(f) = &flags {
            if !f[e.u as usize] || !f[e.v as usize] {
                continue;
            }
        }
        if let (Some(a), Some(b)) = (pos(e.u as u64 / bv), pos(e.v as u64 / bv)) {
            adjacency[a][b] = true;
            adjacency[b][a] = true;
        }
    }
    Ok(BlockGraph {
        level: ell,
        container,
        variant,
        nodes,
        adjacency,
    })
}
