//! Exact sampling of `ω_n` on `Λ_n` and its cluster structure.
//!
//! Direct mode superposes, for each scale `k`, a Poisson number of
//! arrivals with mean `J(L^k) · pair_count(k)`, each landing on a uniform
//! pair at that scale. A pair is open iff it received at least one
//! arrival, which happens with probability `1 − exp(−J(L^k))`
//! independently over pairs.

use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::kernel::{Kernel, KernelFamily};
use crate::lattice::{scale_unchecked, BlockId, LatticeParams, Vertex};
use crate::rng;
use crate::unionfind::UnionFind;

/// Expected arrivals per scale above which direct mode refuses to run.
pub const MAX_ARRIVALS: f64 = 1e9;
/// Largest box accepted by the per-edge sampler.
pub const MAX_PER_EDGE_VOLUME: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SampleMode {
    PoissonPerScale,
    PerEdge,
}

#[derive(Debug, Clone)]
pub struct SampleSpec {
    pub kernel: Kernel,
    /// Site-open probability; `1` is pure bond percolation.
    pub q: f64,
    pub seed: u64,
    pub mode: SampleMode,
}

impl SampleSpec {
    pub fn bond(kernel: Kernel, seed: u64) -> Self {
        Self {
            kernel,
            q: 1.0,
            seed,
            mode: SampleMode::PoissonPerScale,
        }
    }
}

/// An open edge `u < v` at scale `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Edge {
    pub k: u32,
    pub u: u32,
    pub v: u32,
}

/// Open edges sorted by `(k, u, v)`, without repeats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeList {
    pub params: LatticeParams,
    pub seed: u64,
    pub edges: Vec<Edge>,
}

impl EdgeList {
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = format!("hlp-edges v1 {} {} {} {}\n", p.l(), p.d(), p.n(), self.seed);
        for e in &self.edges {
            let _ = writeln!(s, "{} {} {}", e.k, e.u, e.v);
        }
        s
    }

    /// Parses the dump format; `#` lines after the header are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let bad = |line: usize, msg: &str| Error::Parse {
            line: line + 1,
            msg: msg.to_string(),
        };
        let (_, head) = lines.next().ok_or_else(|| bad(0, "empty edge list"))?;
        let h: Vec<&str> = head.split_whitespace().collect();
        if h.len() != 6 || h[0] != "hlp-edges" || h[1] != "v1" {
            return Err(bad(0, "expected `hlp-edges v1 L d n seed`"));
        }
        let num = |s: &str| s.parse::<u64>().map_err(|_| bad(0, "malformed header"));
        let params = LatticeParams::new(num(h[2])? as u32, num(h[3])? as u32, num(h[4])? as u32)?;
        let seed = num(h[5])?;
        let mut edges = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<u64> = line
                .split_whitespace()
                .map(|t| t.parse::<u64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(i, "expected `k u v`"))?;
            if f.len() != 3 {
                return Err(bad(i, "expected `k u v`"));
            }
            let (u, v) = (Vertex(f[1].min(f[2])), Vertex(f[1].max(f[2])));
            let k = params
                .distance_scale(u, v)
                .map_err(|_| bad(i, "endpoints must be distinct and inside the box"))?;
            if k as u64 != f[0] {
                return Err(bad(i, "scale does not match endpoints"));
            }
            edges.push(Edge {
                k,
                u: u.0 as u32,
                v: v.0 as u32,
            });
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Self {
            params,
            seed,
            edges,
        })
    }
}

/// Cluster-size histogram of a configuration (or of one block of it,
/// counting only edges inside the block).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterStats {
    /// `(cluster_size, count)`, ascending by size.
    pub sizes: Vec<(u64, u64)>,
    /// `|K_max|`; zero when no vertex is open.
    pub k_max: u64,
    /// Minimal vertex of `K_max`; among equal sizes the smallest such vertex wins.
    pub k_max_min_vertex: Option<Vertex>,
    pub open_vertices: u64,
}

impl ClusterStats {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("cluster_size,count\n");
        for (size, count) in &self.sizes {
            let _ = writeln!(s, "{size},{count}");
        }
        s
    }

    /// Flat multiset of sizes, descending.
    pub fn multiset(&self) -> Vec<u64> {
        let mut out = Vec::new();
        for &(size, count) in self.sizes.iter().rev() {
            out.extend(std::iter::repeat_n(size, count as usize));
        }
        out
    }
}

/// A sampled configuration: its open edges, site states and components.
#[derive(Debug, Clone)]
pub struct ClusterForest {
    edges: EdgeList,
    open: Option<Vec<bool>>,
    uf: UnionFind,
}

impl ClusterForest {
    /// Builds components from an edge list; `open = None` means every site is open.
    /// Edges are put in `(k, u, v)` order and deduplicated; each must join
    /// `u < v` at its true scale.
    pub fn from_edges(mut edges: EdgeList, open: Option<Vec<bool>>) -> Result<Self> {
        edges.edges.sort_unstable();
        edges.edges.dedup();
        let volume = edges.params.volume();
        let base = edges.params.base();
        if volume > u32::MAX as u64 {
            return Err(invalid("box too large to index with u32"));
        }
        if let Some(o) = &open {
            if o.len() as u64 != volume {
                return Err(invalid("site vector length differs from box volume"));
            }
        }
        let mut uf = UnionFind::new(volume as usize);
        for e in &edges.edges {
            if e.u as u64 >= volume || e.v as u64 >= volume {
                return Err(Error::VertexOutOfRange {
                    vertex: e.v as u64,
                    volume,
                });
            }
            if e.u >= e.v || scale_unchecked(base, e.u as u64, e.v as u64) != e.k {
                return Err(invalid(format!(
                    "edge {e:?} is not an ordered pair at its scale"
                )));
            }
            uf.union(e.u, e.v);
        }
        Ok(Self { edges, open, uf })
    }

    pub fn params(&self) -> &LatticeParams {
        &self.edges.params
    }

    pub fn seed(&self) -> u64 {
        self.edges.seed
    }

    pub fn edge_list(&self) -> &EdgeList {
        &self.edges
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges.edges
    }

    pub fn is_open(&self, v: u32) -> bool {
        self.open.as_ref().is_none_or(|o| o[v as usize])
    }

    pub fn site_states(&self) -> Option<&[bool]> {
        self.open.as_deref()
    }

    /// Whether `u` and `v` share a cluster of the whole box.
    pub fn connected(&mut self, u: u32, v: u32) -> bool {
        self.uf.find(u) == self.uf.find(v)
    }

    /// Statistics of the whole box (`None`) or of a block, using only the
    /// edges with both endpoints in that block.
    pub fn cluster_stats(&self, restriction: Option<BlockId>) -> Result<ClusterStats> {
        let p = self.params();
        match restriction {
            None => Ok(self.stats_with(&mut self.uf.clone(), 0..p.volume())),
            Some(b) if b.level == p.n() && b.index == 0 => self.cluster_stats(None),
            Some(b) => {
                if b.level > p.n() || b.index >= p.block_count(b.level) {
                    return Err(invalid(format!("block {b:?} is outside the box")));
                }
                let range = p.block_range(b);
                let mut uf = UnionFind::new(p.volume() as usize);
                for e in self.edges().iter().take_while(|e| e.k <= b.level) {
                    if range.contains(&(e.u as u64)) {
                        uf.union(e.u, e.v);
                    }
                }
                Ok(self.stats_with(&mut uf, range))
            }
        }
    }

    fn stats_with(&self, uf: &mut UnionFind, range: std::ops::Range<u64>) -> ClusterStats {
        let mut hist = std::collections::BTreeMap::<u64, u64>::new();
        let mut best: Option<(u64, u32)> = None;
        let mut open_vertices = 0;
        for v in range.map(|v| v as u32) {
            if !self.is_open(v) {
                continue;
            }
            open_vertices += 1;
            let r = uf.find(v);
            if uf.min_of_root(r) != v {
                continue;
            }
            let size = uf.size_of_root(r) as u64;
            *hist.entry(size).or_default() += 1;
            if best.is_none_or(|(s, m)| size > s || (size == s && v < m)) {
                best = Some((size, v));
            }
        }
        ClusterStats {
            sizes: hist.into_iter().collect(),
            k_max: best.map_or(0, |b| b.0),
            k_max_min_vertex: best.map(|b| Vertex(b.1 as u64)),
            open_vertices,
        }
    }
}

fn site_states(volume: u64, q: f64, seed: u64) -> Option<Vec<bool>> {
    if q >= 1.0 {
        return None;
    }
    let mut r = rng::stream(seed, rng::SITE_STREAM);
    Some((0..volume).map(|_| r.random::<f64>() < q).collect())
}

fn check_spec(spec: &SampleSpec) -> Result<()> {
    if !(0.0..=1.0).contains(&spec.q) {
        return Err(invalid(format!("q must lie in [0, 1], got {}", spec.q)));
    }
    if spec.kernel.params().volume() > u32::MAX as u64 {
        return Err(invalid("box too large to index with u32"));
    }
    Ok(())
}

pub fn sample(spec: &SampleSpec) -> Result<ClusterForest> {
    match spec.mode {
        SampleMode::PoissonPerScale => sample_direct(spec),
        SampleMode::PerEdge => sample_per_edge(spec),
    }
}

/// Poisson-per-scale sampler; O(L^{nd} + arrivals).
pub fn sample_direct(spec: &SampleSpec) -> Result<ClusterForest> {
    check_spec(spec)?;
    let p = *spec.kernel.params();
    let open = site_states(p.volume(), spec.q, spec.seed);
    let base = p.base();
    let volume = p.volume();
    let mut edges = Vec::new();
    for k in 1..=p.n() {
        let w = spec.kernel.weight(k);
        if w == 0.0 {
            continue;
        }
        let expected = w * p.pair_count(k)? as f64;
        if expected > MAX_ARRIVALS {
            return Err(Error::BoxTooLarge { scale: k, expected });
        }
        let mut r = rng::stream(spec.seed, k as u64);
        let arrivals = rng::poisson(&mut r, expected);
        let below = base.pow(k - 1);
        let block = below * base;
        let start = edges.len();
        for _ in 0..arrivals {
            let u = r.random_range(0..volume);
            // v shares u's k-block but not its (k−1)-block.
            let s = r.random_range(0..(base - 1) * below);
            let mut t = s / below;
            let own = (u / below) % base;
            if t >= own {
                t += 1;
            }
            let v = (u / block) * block + t * below + s % below;
            let (a, b) = (u.min(v) as u32, u.max(v) as u32);
            if let Some(o) = &open {
                if !o[a as usize] || !o[b as usize] {
                    continue;
                }
            }
            edges.push(Edge { k, u: a, v: b });
        }
        edges[start..].sort_unstable();
        let mut kept = start;
        for i in start..edges.len() {
            if i == start || edges[i] != edges[kept - 1] {
                edges[kept] = edges[i];
                kept += 1;
            }
        }
        edges.truncate(kept);
    }
    ClusterForest::from_edges(
        EdgeList {
            params: p,
            seed: spec.seed,
            edges,
        },
        open,
    )
}

/// One `Exp(1)` threshold per pair, in `(u, v)` lexicographic order.
fn thresholds(p: &LatticeParams, seed: u64) -> Vec<f64> {
    let v = p.volume() as usize;
    let mut r = rng::stream(seed, rng::THRESHOLD_STREAM);
    (0..v * (v - 1) / 2)
        .map(|_| rng::exponential(&mut r))
        .collect()
}

fn forest_from_thresholds(
    p: LatticeParams,
    seed: u64,
    weights: &[f64],
    th: &[f64],
    open: Option<Vec<bool>>,
) -> Result<ClusterForest> {
    let volume = p.volume() as u32;
    let mut edges = Vec::new();
    let mut i = 0;
    for u in 0..volume {
        for v in u + 1..volume {
            let k = scale_unchecked(p.base(), u as u64, v as u64);
            let ok = open.as_ref().is_none_or(|o| o[u as usize] && o[v as usize]);
            if ok && th[i] < weights[k as usize] {
                edges.push(Edge { k, u, v });
            }
            i += 1;
        }
    }
    edges.sort_unstable();
    ClusterForest::from_edges(
        EdgeList {
            params: p,
            seed,
            edges,
        },
        open,
    )
}

fn check_per_edge(p: &LatticeParams) -> Result<()> {
    if p.volume() > MAX_PER_EDGE_VOLUME {
        return Err(invalid(format!(
            "per-edge mode needs L^(nd) <= {MAX_PER_EDGE_VOLUME}, got {}",
            p.volume()
        )));
    }
    Ok(())
}

/// Per-pair sampler: pair `{u, v}` is open iff its threshold is below
/// `J(‖u − v‖)`. Same law as [`sample_direct`], different randomness.
pub fn sample_per_edge(spec: &SampleSpec) -> Result<ClusterForest> {
    check_spec(spec)?;
    let p = *spec.kernel.params();
    check_per_edge(&p)?;
    let weights: Vec<f64> = (0..=p.n())
        .map(|k| if k == 0 { 0.0 } else { spec.kernel.weight(k) })
        .collect();
    let th = thresholds(&p, spec.seed);
    forest_from_thresholds(
        p,
        spec.seed,
        &weights,
        &th,
        site_states(p.volume(), spec.q, spec.seed),
    )
}

/// Configurations at every `λ` of a sorted grid sharing one threshold per
/// pair, so edge sets and cluster partitions are nested along the grid.
pub fn harris_refinement(
    family: &KernelFamily,
    grid: &[f64],
    seed: u64,
    q: f64,
) -> Result<Vec<ClusterForest>> {
    let p = *family.params();
    check_per_edge(&p)?;
    if !(0.0..=1.0).contains(&q) {
        return Err(invalid("q must lie in [0, 1]"));
    }
    family.check_monotone(grid, p.n())?;
    let th = thresholds(&p, seed);
    let open = site_states(p.volume(), q, seed);
    grid.iter()
        .map(|&lambda| {
            let kernel = family.at(lambda)?;
            let weights: Vec<f64> = (0..=p.n())
                .map(|k| if k == 0 { 0.0 } else { kernel.weight(k) })
                .collect();
            forest_from_thresholds(p, seed, &weights, &th, open.clone())
        })
        .collect()
}
