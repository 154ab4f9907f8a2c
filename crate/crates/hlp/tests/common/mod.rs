#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use hlp::renorm::schedule::{FullParams, ScheduleFull};
use hlp::sampler::{sample_direct, ClusterForest, Edge, EdgeList, SampleSpec};
use hlp::{Kernel, KernelForm, LatticeParams};

pub fn params(l: u32, d: u32, n: u32) -> LatticeParams {
    LatticeParams::new(l, d, n).unwrap()
}

/// Every pair joined.
pub fn complete_forest(p: LatticeParams) -> ClusterForest {
    let v = p.volume() as u32;
    let mut edges = Vec::new();
    for x in 0..v {
        for y in x + 1..v {
            edges.push(Edge {
                k: p.distance_scale(hlp::Vertex(x as u64), hlp::Vertex(y as u64))
                    .unwrap(),
                u: x,
                v: y,
            });
        }
    }
    ClusterForest::from_edges(
        EdgeList {
            params: p,
            seed: 0,
            edges,
        },
        None,
    )
    .unwrap()
}

pub fn empty_forest(p: LatticeParams) -> ClusterForest {
    ClusterForest::from_edges(
        EdgeList {
            params: p,
            seed: 0,
            edges: Vec::new(),
        },
        None,
    )
    .unwrap()
}

/// `J(L^k) = c L^{−2k}`: the same expected number of edges between
/// sibling blocks at every level, so `c` tunes sub- to supercritical.
pub fn power_kernel(p: LatticeParams, c: f64) -> Kernel {
    Kernel::from_form(
        p,
        KernelForm::Power {
            coeff: c,
            exponent: 2.0,
        },
    )
    .unwrap()
}

pub fn power_forest(p: LatticeParams, c: f64, seed: u64) -> ClusterForest {
    sample_direct(&SampleSpec::bond(power_kernel(p, c), seed)).unwrap()
}

/// Coefficients spread log-uniformly over sub-, near- and supercritical.
pub fn fuzz_coeff(i: u64, count: u64) -> f64 {
    let t = (i as f64 + 0.5) / count as f64;
    (0.5f64.ln() + t * (80.0f64.ln() - 0.5f64.ln())).exp()
}

/// Desk-scale full schedule on `L = 2`, `r = 3`: levels 3, 6, 12.
pub fn desk_schedule() -> ScheduleFull {
    let p = FullParams {
        l: 2,
        a: 4.0,
        n_cap: 1,
        eps: 2.0,
        zeta: 0.4,
        theta: 0.7,
        r: 3,
    };
    ScheduleFull::with_overrides(p, 2, 3, &[3, 6]).unwrap()
}

/// Clusters of one block by BFS over the edges inside it with scale at
/// most the block level; open vertices only.
pub fn bfs_clusters(f: &ClusterForest, level: u32, index: u64) -> Vec<Vec<u32>> {
    let p = f.params();
    let range = p.block_range(hlp::BlockId { level, index });
    let lo = range.start as u32;
    let n = (range.end - range.start) as usize;
    let mut adj = vec![Vec::new(); n];
    let edges = f.edges();
    for k in 1..=level {
        // Edges are sorted by (k, u, v); those of scale k starting inside
        // the block form one run and stay inside it.
        let a = edges.partition_point(|e| (e.k, e.u as u64) < (k, range.start));
        let b = edges.partition_point(|e| (e.k, e.u as u64) < (k, range.end));
        for e in &edges[a..b] {
            adj[(e.u - lo) as usize].push((e.v - lo) as usize);
            adj[(e.v - lo) as usize].push((e.u - lo) as usize);
        }
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] || !f.is_open(lo + s as u32) {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![lo + s as u32];
        let mut q = VecDeque::from([s]);
        while let Some(x) = q.pop_front() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    comp.push(lo + y as u32);
                    q.push_back(y);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Largest restricted cluster, ties to the smallest minimal vertex.
pub fn bfs_k_max(f: &ClusterForest, level: u32, index: u64) -> BTreeSet<u32> {
    bfs_clusters(f, level, index)
        .into_iter()
        .max_by(|a, b| a.len().cmp(&b.len()).then(b[0].cmp(&a[0])))
        .map(|c| c.into_iter().collect())
        .unwrap_or_default()
}
