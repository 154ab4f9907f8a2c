//! Connection-probability bounds for the `n`-blocks of one `(n+k)`-block.
//!
//! Every `n`-block is contracted to a vertex of the lattice of level `k`
//! (or `2k`) with weights `w_s = L^{2nd} J(L^{n+s})`. Exact union bounds
//! are sums of `exp(−J(A, Ā))` over an enumerated family of sets; the
//! asymptotic bound expressions are evaluated beside them.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::coarse::{contract_kernel, merge_up, BlockState};
use crate::error::{invalid, Error, Result};
use crate::estimate::stats::{wilson, Estimate};
use crate::kernel::Kernel;
use crate::kv::fmt_f64;
use crate::lattice::scale_unchecked;
use crate::rng;

/// Largest block count enumerated exactly (`2^16` subsets).
pub const MAX_ENUMERATED_BLOCKS: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// Blocks other than block 0 not connected off block 0; `n^{−a/2}`.
    AllButOne,
    /// The single cut between the rest of the first sub-block and the
    /// remaining blocks; a lower value, compared with `(n+k)^{−a/2}`.
    AllButOneCut,
    /// All blocks not connected; `n^{−a/2}`.
    NotConnected,
    /// Some cluster of exactly `γ L^{kd}` blocks; `n^{−a(1−γ)}`.
    ClusterDensity,
    /// A set of `size` blocks has no edge to the next annulus; `n^{−γa}`.
    ToNextBlock,
    /// As `AllButOne`, against `n^{−1/2−ε}`.
    BlockRemoved,
    /// As `NotConnected`, against `n^{−1/2−ε}`.
    BlockNotConnected,
    /// Some cluster of at most `γ L^{kd}` blocks; `n^{−(1−γ)−2ε}`.
    BlockSmallCluster,
    /// As `ToNextBlock`, against `n^{−L^{−k}|A|}`.
    BlockToNext,
}

impl BoundKind {
    pub const ALL: [BoundKind; 9] = [
        BoundKind::AllButOne,
        BoundKind::AllButOneCut,
        BoundKind::NotConnected,
        BoundKind::ClusterDensity,
        BoundKind::ToNextBlock,
        BoundKind::BlockRemoved,
        BoundKind::BlockNotConnected,
        BoundKind::BlockSmallCluster,
        BoundKind::BlockToNext,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::AllButOne => "all-but-one",
            BoundKind::AllButOneCut => "all-but-one-cut",
            BoundKind::NotConnected => "not-connected",
            BoundKind::ClusterDensity => "cluster-density",
            BoundKind::ToNextBlock => "to-next-block",
            BoundKind::BlockRemoved => "block-removed",
            BoundKind::BlockNotConnected => "block-not-connected",
            BoundKind::BlockSmallCluster => "block-small-cluster",
            BoundKind::BlockToNext => "block-to-next",
        }
    }

    /// Whether [`monte_carlo`] can sample the event directly.
    pub fn has_event(self) -> bool {
        !matches!(
            self,
            BoundKind::ToNextBlock | BoundKind::BlockToNext | BoundKind::AllButOneCut
        )
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid(format!("unknown bound kind {s:?}")))
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundParams {
    pub n: u32,
    pub k: u32,
    pub a: f64,
    pub delta: f64,
    pub eps: f64,
    pub gamma: f64,
    /// `|A|` for the annulus kinds.
    pub size: u64,
    /// Estimate the union sum from this many random sets instead of
    /// enumerating; seeded by `sample_seed`.
    pub sample: Option<u64>,
    pub sample_seed: u64,
}

impl BoundParams {
    pub fn new(n: u32, k: u32, a: f64) -> Self {
        Self {
            n,
            k,
            a,
            delta: 0.0,
            eps: 0.0,
            gamma: 0.5,
            size: 1,
            sample: None,
            sample_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundResult {
    pub kind: BoundKind,
    pub params: BoundParams,
    pub exact_value: f64,
    pub paper_bound: f64,
    pub regime_ok: bool,
    /// `exact_value` bounds the probability from below rather than above.
    pub lower: bool,
    /// `enumerated`, `sampled` or `closed-form`.
    pub method: &'static str,
}

pub const CSV_HEADER: &str =
    "kind,n,k,a,delta,eps,gamma,size,exact_value,paper_bound,regime_ok,lower,method\n";

impl BoundResult {
    pub fn csv_row(&self) -> String {
        let p = &self.params;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            self.kind,
            p.n,
            p.k,
            fmt_f64(p.a),
            fmt_f64(p.delta),
            fmt_f64(p.eps),
            fmt_f64(p.gamma),
            p.size,
            fmt_f64(self.exact_value),
            fmt_f64(self.paper_bound),
            self.regime_ok,
            self.lower,
            self.method
        )
    }
}

/// Contracted weights `w_s`, `s = 1..=horizon`, and the block count `L^{kd}`.
struct Contracted {
    blocks: u64,
    base: u64,
    w: Vec<f64>,
}

impl Contracted {
    fn new(kernel: &Kernel, n: u32, k: u32, horizon: u32) -> Result<Self> {
        let base = kernel.params().base();
        let blocks = base.checked_pow(k).ok_or(Error::Overflow("block count"))?;
        let c = contract_kernel(kernel, n, horizon, 1.0)?;
        Ok(Self {
            blocks,
            base,
            w: (1..=horizon).map(|s| c.weight(s)).collect(),
        })
    }

    fn weight(&self, x: u64, y: u64) -> f64 {
        self.w[scale_unchecked(self.base, x, y) as usize - 1]
    }

    /// `J(A, V∖A)` for a bit set `a` over `nodes`.
    fn cut(&self, nodes: &[u64], a: u64) -> f64 {
        let mut j = 0.0;
        for (i, &x) in nodes.iter().enumerate() {
            if a >> i & 1 == 0 {
                continue;
            }
            for (t, &y) in nodes.iter().enumerate() {
                if a >> t & 1 == 0 {
                    j += self.weight(x, y);
                }
            }
        }
        j
    }
}

/// Which sets of nodes a union bound ranges over.
#[derive(Clone, Copy)]
enum Family {
    /// Unordered cuts: sets holding node 0, excluding the full set.
    Cuts,
    /// Sets of exactly this size.
    Size(u32),
    /// Non-empty sets of at most this size (and not full).
    AtMost(u32),
}

impl Family {
    fn contains(self, a: u64, m: u32) -> bool {
        let full = (1u64 << m) - 1;
        let c = a.count_ones();
        match self {
            Family::Cuts => a & 1 == 1 && a != full,
            Family::Size(s) => c == s && a != full,
            Family::AtMost(s) => c >= 1 && c <= s && a != full,
        }
    }
}

fn union_sum(
    c: &Contracted,
    nodes: &[u64],
    fam: Family,
    p: &BoundParams,
) -> Result<(f64, &'static str)> {
    let m = nodes.len() as u32;
    if m <= 1 {
        return Ok((0.0, "enumerated"));
    }
    match p.sample {
        None => {
            if nodes.len() as u64 > MAX_ENUMERATED_BLOCKS {
                return Err(Error::EnumerationLimit(1u128 << m.min(127)));
            }
            // Sequential so the float sum is reproducible.
            let sum = (1..(1u64 << m))
                .filter(|&a| fam.contains(a, m))
                .map(|a| (-c.cut(nodes, a)).exp())
                .sum::<f64>();
            Ok((sum, "enumerated"))
        }
        Some(draws) => {
            if m > 63 || draws == 0 {
                return Err(invalid("sampling needs 1 ≤ draws and at most 63 blocks"));
            }
            // Uniform members of the family by rejection; the family size
            // is exact, so the scaled mean is unbiased.
            let size = family_size(fam, m);
            let mut r = rng::stream(p.sample_seed, 0);
            let mut acc = 0.0;
            let mut got = 0u64;
            while got < draws {
                let a = r.random::<u64>() & ((1u64 << m) - 1);
                if fam.contains(a, m) {
                    acc += (-c.cut(nodes, a)).exp();
                    got += 1;
                }
            }
            Ok((size * acc / draws as f64, "sampled"))
        }
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn family_size(fam: Family, m: u32) -> f64 {
    match fam {
        Family::Cuts => 2f64.powi(m as i32 - 1) - 1.0,
        Family::Size(s) if s >= m => 0.0,
        Family::Size(s) => binomial(m, s),
        Family::AtMost(s) => (1..=s.min(m - 1)).map(|i| binomial(m, i)).sum(),
    }
}

/// `J(L^j) ≥ c · B · log(j) · B^{−2j}` for `j` in `range`.
fn kernel_at_least(kernel: &Kernel, c: f64, range: std::ops::RangeInclusive<u32>) -> bool {
    let b = kernel.params().base() as f64;
    range
        .into_iter()
        .all(|j| kernel.weight(j) >= c * b * (j as f64).ln() * b.powi(-2 * j as i32))
}

/// Exact union value (or exact probability) next to the asymptotic bound.
pub fn bound_evaluators(kind: BoundKind, kernel: &Kernel, p: &BoundParams) -> Result<BoundResult> {
    if p.n < 1 || p.k < 1 || !(p.a >= 0.0) {
        return Err(invalid("need n ≥ 1, k ≥ 1 and a ≥ 0"));
    }
    let nf = p.n as f64;
    let b = kernel.params().base();
    let bk = (b as f64).powi(p.k as i32);
    let window = p.n + 1..=p.n + p.k;
    let gamma_count = || -> Result<u32> {
        let m = (p.gamma * bk).round();
        if !(p.gamma > 0.0 && p.gamma <= 1.0) || (m - p.gamma * bk).abs() > 1e-9 {
            return Err(invalid(format!(
                "γ must be a multiple of L^-kd = {}",
                1.0 / bk
            )));
        }
        Ok(m as u32)
    };
    let block_regime =
        p.a > 1.0 && p.eps > 0.0 && p.eps < 1.0 && kernel_at_least(kernel, p.a, window.clone());
    let (exact_value, method, paper_bound, regime_ok, lower) = match kind {
        BoundKind::AllButOne
        | BoundKind::BlockRemoved
        | BoundKind::NotConnected
        | BoundKind::BlockNotConnected => {
            let c = Contracted::new(kernel, p.n, p.k, p.k)?;
            let removed = matches!(kind, BoundKind::AllButOne | BoundKind::BlockRemoved);
            let nodes: Vec<u64> = (removed as u64..c.blocks).collect();
            let (v, m) = union_sum(&c, &nodes, Family::Cuts, p)?;
            let (bound, ok) = match kind {
                BoundKind::AllButOne => (
                    nf.powf(-p.a / 2.0),
                    kernel_at_least(kernel, p.a + p.delta, window.clone()),
                ),
                BoundKind::NotConnected => (
                    nf.powf(-p.a / 2.0),
                    kernel_at_least(kernel, p.a, window.clone()),
                ),
                _ => (nf.powf(-0.5 - p.eps), block_regime),
            };
            (v, m, bound, ok, false)
        }
        BoundKind::AllButOneCut => {
            let c = Contracted::new(kernel, p.n, p.k, p.k)?;
            let half = c.blocks / b;
            let nodes: Vec<u64> = (1..c.blocks).collect();
            // Bits for blocks 1..half: the rest of the first sub-block.
            let a = if half > 1 {
                (1u64 << (half - 1)) - 1
            } else {
                0
            };
            let v = if a == 0 {
                1.0
            } else {
                (-c.cut(&nodes, a)).exp()
            };
            let ok = b == 2
                && window.clone().all(|j| {
                    kernel.weight(j) <= p.a * 2.0 * (j as f64).ln() * 2f64.powi(-2 * j as i32)
                });
            (
                v,
                "closed-form",
                (nf + p.k as f64).powf(-p.a / 2.0),
                ok,
                true,
            )
        }
        BoundKind::ClusterDensity | BoundKind::BlockSmallCluster => {
            let c = Contracted::new(kernel, p.n, p.k, p.k)?;
            let m = gamma_count()?;
            let nodes: Vec<u64> = (0..c.blocks).collect();
            let (v, method) = if kind == BoundKind::ClusterDensity {
                if m as u64 == c.blocks {
                    (1.0, "closed-form")
                } else {
                    union_sum(&c, &nodes, Family::Size(m), p)?
                }
            } else {
                union_sum(&c, &nodes, Family::AtMost(m), p)?
            };
            let (bound, ok) = if kind == BoundKind::ClusterDensity {
                (
                    nf.powf(-p.a * (1.0 - p.gamma)),
                    kernel_at_least(kernel, p.a, window.clone()),
                )
            } else {
                (nf.powf(-(1.0 - p.gamma) - 2.0 * p.eps), block_regime)
            };
            (v.min(f64::MAX), method, bound, ok, false)
        }
        BoundKind::ToNextBlock | BoundKind::BlockToNext => {
            if p.size == 0 || p.size as f64 > bk {
                return Err(invalid("need 1 ≤ |A| ≤ L^kd"));
            }
            let c = Contracted::new(kernel, p.n, p.k, 2 * p.k)?;
            let bf = b as f64;
            // Each block of A sees (B^s − B^{s−1}) blocks at scale s ∈ (k, 2k].
            let per_block: f64 = (p.k + 1..=2 * p.k)
                .map(|s| (bf.powi(s as i32) - bf.powi(s as i32 - 1)) * c.w[s as usize - 1])
                .sum();
            let v = (-(p.size as f64) * per_block).exp();
            let gamma = p.size as f64 / bk;
            if kind == BoundKind::ToNextBlock {
                let ok = (p.a + p.delta) * (1.0 - 1.0 / bk) >= p.a
                    && kernel_at_least(kernel, p.a + p.delta, p.n..=p.n + 2 * p.k);
                (v, "closed-form", nf.powf(-gamma * p.a), ok, false)
            } else {
                (
                    v,
                    "closed-form",
                    nf.powf(-(p.size as f64) / bk),
                    block_regime,
                    false,
                )
            }
        }
    };
    Ok(BoundResult {
        kind,
        params: *p,
        exact_value,
        paper_bound,
        regime_ok,
        lower,
        method,
    })
}

/// Monte Carlo frequency of the event behind `kind` on the contracted
/// `(n+k)`-block, sampled with the coarse merger.
pub fn monte_carlo(
    kind: BoundKind,
    kernel: &Kernel,
    p: &BoundParams,
    trials: u64,
    seed: u64,
) -> Result<Estimate> {
    let c = contract_kernel(kernel, p.n, p.k, 1.0)?;
    let base = c.params().base();
    let blocks = base.pow(p.k);
    let bk = blocks as f64;
    let m = (p.gamma * bk).round() as u64;
    let removed = matches!(
        kind,
        BoundKind::AllButOne | BoundKind::BlockRemoved | BoundKind::AllButOneCut
    );
    let event = |s: &BlockState| -> bool {
        match kind {
            BoundKind::AllButOne
            | BoundKind::BlockRemoved
            | BoundKind::NotConnected
            | BoundKind::BlockNotConnected => s.sizes.len() > 1,
            BoundKind::ClusterDensity => s.sizes.contains(&m),
            BoundKind::BlockSmallCluster => s.sizes.iter().any(|&x| x <= m),
            _ => unreachable!(),
        }
    };
    if !kind.has_event() {
        return Err(invalid(format!("no Monte Carlo event for {kind}")));
    }
    let hits = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<u64> {
            let leaves = (0..blocks)
                .map(|i| BlockState::new(0, if removed && i == 0 { vec![] } else { vec![1] }))
                .collect();
            let s = merge_up(leaves, base, &c, rng::derive_seed(seed, t), None)?;
            Ok(event(&s) as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(wilson(hits, trials))
}
