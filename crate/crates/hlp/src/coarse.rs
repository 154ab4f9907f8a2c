//! Block-level recursion on cluster-size multisets.
//!
//! A [`BlockState`] keeps only the sizes of the restricted clusters of
//! one block. Merging the `L^d` children of a level-`ℓ+1` block needs
//! nothing else: two clusters `A`, `B` from distinct children are joined
//! by a direct edge with probability `1 − exp(−J(L^{ℓ+1}) |A| |B|)`,
//! independently over pairs.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::estimate::stats::{wilson, Estimate};
use crate::kernel::{Kernel, KernelForm};
use crate::lattice::LatticeParams;
use crate::rng::{self, StreamRng};
use crate::sampler::{sample_direct, SampleSpec};
use crate::unionfind::UnionFind;

/// Pairwise join probabilities below this allow the no-edge shortcut.
pub const SHORTCUT_PAIR_PROBABILITY: f64 = 1e-9;
/// Expected joins below this allow the no-edge shortcut.
pub const SHORTCUT_EXPECTED_JOINS: f64 = 1e-6;

/// Drop clusters smaller than `threshold` once the level reaches `from_level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Truncation {
    pub threshold: u64,
    pub from_level: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TruncationLedger {
    pub truncation: Truncation,
    pub dropped_clusters: u64,
    pub dropped_mass: u64,
}

/// Restricted cluster sizes of one block, descending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockState {
    pub level: u32,
    pub sizes: Vec<u64>,
    pub ledger: Option<TruncationLedger>,
}

impl BlockState {
    pub fn new(level: u32, mut sizes: Vec<u64>) -> Self {
        sizes.retain(|&s| s > 0);
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        Self {
            level,
            sizes,
            ledger: None,
        }
    }

    pub fn mass(&self) -> u64 {
        self.sizes.iter().sum()
    }

    pub fn k_max(&self) -> u64 {
        self.sizes.first().copied().unwrap_or(0)
    }

    /// `# hlp-block-state v1 level=ℓ truncation=…` then `cluster_size,count`.
    pub fn to_csv(&self) -> String {
        let trunc = match &self.ledger {
            None => "off".to_string(),
            Some(l) => format!(
                "{}:{}:{}:{}",
                l.truncation.threshold, l.truncation.from_level, l.dropped_clusters, l.dropped_mass
            ),
        };
        let mut s = format!(
            "# hlp-block-state v1 level={} truncation={trunc}\ncluster_size,count\n",
            self.level
        );
        let mut i = 0;
        while i < self.sizes.len() {
            let j = self.sizes[i..]
                .iter()
                .take_while(|&&x| x == self.sizes[i])
                .count();
            let _ = writeln!(s, "{},{}", self.sizes[i], j);
            i += j;
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines();
        let head = lines.next().ok_or_else(|| bad(1, "empty block state"))?;
        let fields: Vec<&str> = head.split_whitespace().collect();
        if fields.len() != 5 || fields[1] != "hlp-block-state" || fields[2] != "v1" {
            return Err(bad(
                1,
                "expected `# hlp-block-state v1 level=… truncation=…`",
            ));
        }
        let level = fields[3]
            .strip_prefix("level=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(1, "malformed level"))?;
        let trunc = fields[4]
            .strip_prefix("truncation=")
            .ok_or_else(|| bad(1, "malformed truncation"))?;
        let ledger = if trunc == "off" {
            None
        } else {
            let v: Vec<u64> = trunc
                .split(':')
                .map(|t| t.parse().map_err(|_| bad(1, "malformed truncation")))
                .collect::<Result<_>>()?;
            if v.len() != 4 {
                return Err(bad(1, "malformed truncation"));
            }
            Some(TruncationLedger {
                truncation: Truncation {
                    threshold: v[0],
                    from_level: v[1] as u32,
                },
                dropped_clusters: v[2],
                dropped_mass: v[3],
            })
        };
        if lines.next() != Some("cluster_size,count") {
            return Err(bad(2, "expected `cluster_size,count`"));
        }
        let mut sizes = Vec::new();
        for (i, line) in lines.enumerate() {
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| bad(i + 3, "expected `size,count`"))?;
            let size: u64 = a.parse().map_err(|_| bad(i + 3, "bad size"))?;
            let count: u64 = b.parse().map_err(|_| bad(i + 3, "bad count"))?;
            sizes.extend(std::iter::repeat_n(size, count as usize));
        }
        let mut s = BlockState::new(level, sizes);
        s.ledger = ledger;
        Ok(s)
    }
}

/// Merges sibling states into their parent. `weight` is `J(L^{ℓ+1})`.
pub fn merge_blocks<R: Rng + ?Sized>(
    children: &[BlockState],
    weight: f64,
    rng: &mut R,
) -> Result<BlockState> {
    let level = children
        .first()
        .ok_or_else(|| invalid("no children to merge"))?
        .level;
    if children.iter().any(|c| c.level != level) {
        return Err(invalid("children must share one level"));
    }
    if !(weight.is_finite() && weight >= 0.0) {
        return Err(invalid("merge weight must be finite and non-negative"));
    }
    let mut clusters = Vec::new();
    let mut owner = Vec::new();
    for (i, c) in children.iter().enumerate() {
        clusters.extend_from_slice(&c.sizes);
        owner.extend(std::iter::repeat_n(i, c.sizes.len()));
    }
    let mut uf = UnionFind::new(clusters.len());
    let masses: Vec<f64> = children.iter().map(|c| c.mass() as f64).collect();
    let total: f64 = masses.iter().sum();
    let cross = (total * total - masses.iter().map(|m| m * m).sum::<f64>()) / 2.0;
    let expected = weight * cross;
    if expected > 0.0 {
        let heads: Vec<f64> = children.iter().map(|c| c.k_max() as f64).collect();
        let mut top = heads.clone();
        top.sort_by(|a, b| b.total_cmp(a));
        let max_pair = weight * top[0] * top.get(1).copied().unwrap_or(0.0);
        let pairs: f64 = {
            let counts: Vec<f64> = children.iter().map(|c| c.sizes.len() as f64).collect();
            let t: f64 = counts.iter().sum();
            (t * t - counts.iter().map(|c| c * c).sum::<f64>()) / 2.0
        };
        if -(-max_pair).exp_m1() < SHORTCUT_PAIR_PROBABILITY && expected < SHORTCUT_EXPECTED_JOINS {
            if rng::bernoulli_exp(rng, expected) {
                join_conditioned(&clusters, &owner, weight, &mut uf, rng);
            }
        } else if 4.0 * expected < pairs {
            join_by_arrivals(&clusters, &owner, expected, &mut uf, rng);
        } else {
            join_pairwise(&clusters, &owner, weight, &mut uf, rng);
        }
    }
    let mut merged = vec![0u64; clusters.len()];
    for (i, &c) in clusters.iter().enumerate() {
        merged[uf.find(i as u32) as usize] += c;
    }
    let mut state = BlockState::new(level + 1, merged);
    state.ledger = children.iter().find_map(|c| c.ledger).map(|l| {
        let mut l = l;
        l.dropped_clusters = children
            .iter()
            .filter_map(|c| c.ledger)
            .map(|x| x.dropped_clusters)
            .sum();
        l.dropped_mass = children
            .iter()
            .filter_map(|c| c.ledger)
            .map(|x| x.dropped_mass)
            .sum();
        l
    });
    Ok(state)
}

fn for_each_cross_pair(owner: &[usize], mut f: impl FnMut(usize, usize) -> bool) {
    for i in 0..owner.len() {
        for j in i + 1..owner.len() {
            if owner[i] != owner[j] && !f(i, j) {
                return;
            }
        }
    }
}

fn join_pairwise<R: Rng + ?Sized>(
    sizes: &[u64],
    owner: &[usize],
    w: f64,
    uf: &mut UnionFind,
    rng: &mut R,
) {
    for_each_cross_pair(owner, |i, j| {
        if rng::bernoulli_exp(rng, w * sizes[i] as f64 * sizes[j] as f64) {
            uf.union(i as u32, j as u32);
        }
        true
    });
}

/// Pairwise joins conditioned on at least one join: each pair succeeds
/// with probability `p_i / P(some join among pairs i..)` until the first
/// success, and unconditionally afterwards.
fn join_conditioned<R: Rng + ?Sized>(
    sizes: &[u64],
    owner: &[usize],
    w: f64,
    uf: &mut UnionFind,
    rng: &mut R,
) {
    let mut weights = Vec::new();
    for_each_cross_pair(owner, |i, j| {
        weights.push((i, j, w * sizes[i] as f64 * sizes[j] as f64));
        true
    });
    let mut suffix = vec![0.0; weights.len() + 1];
    for i in (0..weights.len()).rev() {
        suffix[i] = suffix[i + 1] + weights[i].2;
    }
    let mut found = false;
    for (idx, &(i, j, x)) in weights.iter().enumerate() {
        let p = -(-x).exp_m1();
        let hit = if found {
            rng.random::<f64>() < p
        } else {
            let rest = -(-suffix[idx]).exp_m1();
            rng.random::<f64>() * rest < p
        };
        if hit {
            found = true;
            uf.union(i as u32, j as u32);
        }
    }
}

/// Poisson superposition: `Poisson(expected)` arrivals, each on a cross
/// pair chosen with probability proportional to `|A| |B|`.
fn join_by_arrivals<R: Rng + ?Sized>(
    sizes: &[u64],
    owner: &[usize],
    expected: f64,
    uf: &mut UnionFind,
    rng: &mut R,
) {
    let mut cum = Vec::with_capacity(sizes.len());
    let mut acc = 0u64;
    for &s in sizes {
        acc += s;
        cum.push(acc);
    }
    let pick = |x: u64| cum.partition_point(|&c| c <= x);
    let arrivals = rng::poisson(rng, expected);
    for _ in 0..arrivals {
        loop {
            let a = pick(rng.random_range(0..acc));
            let b = pick(rng.random_range(0..acc));
            if owner[a] != owner[b] {
                uf.union(a as u32, b as u32);
                break;
            }
        }
    }
}

fn truncate(state: &mut BlockState, truncation: Option<Truncation>) {
    let Some(t) = truncation else { return };
    let ledger = state.ledger.get_or_insert(TruncationLedger {
        truncation: t,
        dropped_clusters: 0,
        dropped_mass: 0,
    });
    if state.level < t.from_level {
        return;
    }
    let keep = state.sizes.partition_point(|&s| s >= t.threshold);
    ledger.dropped_clusters += (state.sizes.len() - keep) as u64;
    ledger.dropped_mass += state.sizes[keep..].iter().sum::<u64>();
    state.sizes.truncate(keep);
}

/// Merges `leaves` (consecutive blocks of one level) up to a single state,
/// using `kernel.weight(ℓ)` at each level `ℓ` reached.
pub fn merge_up(
    leaves: Vec<BlockState>,
    base: u64,
    kernel: &Kernel,
    seed: u64,
    truncation: Option<Truncation>,
) -> Result<BlockState> {
    let mut level_states = leaves;
    while level_states.len() > 1 {
        if !(level_states.len() as u64).is_multiple_of(base) {
            return Err(invalid("leaf count must be a power of L^d"));
        }
        let level = level_states[0].level + 1;
        let w = kernel.weight(level);
        level_states = level_states
            .chunks(base as usize)
            .enumerate()
            .map(|(i, ch)| {
                let mut r = rng::stream(seed, rng::block_stream(level, i as u64));
                let mut s = merge_blocks(ch, w, &mut r)?;
                truncate(&mut s, truncation);
                Ok(s)
            })
            .collect::<Result<_>>()?;
    }
    level_states.pop().ok_or_else(|| invalid("no leaves"))
}

/// Recursive sampler on `Λ_n`: same cluster-size law as direct sampling.
pub fn sample_recursive(
    kernel: &Kernel,
    q: f64,
    seed: u64,
    truncation: Option<Truncation>,
) -> Result<BlockState> {
    if !(0.0..=1.0).contains(&q) {
        return Err(invalid("q must lie in [0, 1]"));
    }
    let p = *kernel.params();
    let mut site = (q < 1.0).then(|| rng::stream(seed, rng::SITE_STREAM));
    let mut ctx = Recursion {
        base: p.base(),
        kernel,
        seed,
        q,
        site: site.as_mut(),
        truncation,
    };
    let mut s = ctx.build(p.n(), 0)?;
    if truncation.is_some() && s.ledger.is_none() {
        truncate(&mut s, truncation);
    }
    Ok(s)
}

struct Recursion<'a> {
    base: u64,
    kernel: &'a Kernel,
    seed: u64,
    q: f64,
    site: Option<&'a mut StreamRng>,
    truncation: Option<Truncation>,
}

impl Recursion<'_> {
    /// Depth-first, so leaves are visited (and site draws consumed) in index order.
    fn build(&mut self, level: u32, index: u64) -> Result<BlockState> {
        if level == 0 {
            let open = match self.site.as_deref_mut() {
                None => true,
                Some(r) => r.random::<f64>() < self.q,
            };
            return Ok(BlockState::new(0, if open { vec![1] } else { vec![] }));
        }
        let children = (0..self.base)
            .map(|c| self.build(level - 1, index * self.base + c))
            .collect::<Result<Vec<_>>>()?;
        let mut r = rng::stream(self.seed, rng::block_stream(level, index));
        let mut s = merge_blocks(&children, self.kernel.weight(level), &mut r)?;
        truncate(&mut s, self.truncation);
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Piece {
    /// Index of the source cluster in the input.
    pub parent: usize,
    pub size: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetavertexSplit {
    /// `⌊√r · f⌋`; pieces have sizes in `[unit, 2·unit]`.
    pub unit: u64,
    pub pieces: Vec<Piece>,
    /// Mass of clusters with size at least `r · f`.
    pub qualifying_mass: u64,
}

impl MetavertexSplit {
    /// `|Λ|/unit ≥ N₁ ≥ θ|Λ|/(4·unit)`, evaluated only when the qualifying
    /// mass is at least `θ|Λ|/2`.
    pub fn count_bounds_hold(&self, volume: u64, theta: f64) -> Option<bool> {
        let v = volume as f64;
        if (self.qualifying_mass as f64) < theta * v / 2.0 {
            return None;
        }
        let n1 = self.pieces.len() as f64;
        let u = self.unit as f64;
        Some(v / u >= n1 && n1 >= theta * v / (4.0 * u))
    }
}

/// Splits every cluster of size at least `r·f` greedily (largest first)
/// into pieces of `unit` vertices, the last piece absorbing the remainder.
pub fn split_metavertices(sizes: &[u64], r: f64, f: f64) -> Result<MetavertexSplit> {
    if !(r > 0.0 && f > 0.0 && r.is_finite() && f.is_finite()) {
        return Err(invalid("need finite r > 0 and f > 0"));
    }
    let unit = (r.sqrt() * f).floor() as u64;
    if unit == 0 {
        return Err(invalid("piece unit ⌊√r·f⌋ is zero"));
    }
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
    let mut pieces = Vec::new();
    let mut qualifying_mass = 0;
    for i in order {
        let s = sizes[i];
        if (s as f64) < r * f {
            continue;
        }
        qualifying_mass += s;
        if s < unit {
            continue;
        }
        let mut rest = s;
        while rest >= 2 * unit {
            pieces.push(Piece {
                parent: i,
                size: unit,
            });
            rest -= unit;
        }
        pieces.push(Piece {
            parent: i,
            size: rest,
        });
    }
    Ok(MetavertexSplit {
        unit,
        pieces,
        qualifying_mass,
    })
}

/// Table kernel on the contracted lattice `(L, d, horizon)`:
/// `J'(L^k) = (τ L^{nd})² J(L^{n+k})`.
pub fn contract_kernel(kernel: &Kernel, n: u32, horizon: u32, tau: f64) -> Result<Kernel> {
    let p = kernel.params();
    let b = p.base() as f64;
    let scale = (tau * b.powi(n as i32)).powi(2);
    let table = (1..=horizon)
        .map(|k| scale * kernel.weight(n + k))
        .collect();
    Kernel::from_form(
        LatticeParams::new(p.l(), p.d(), horizon)?,
        KernelForm::Table(table),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct EffectiveSiteBond {
    /// Probability that an `n`-block has `|K_max| ≥ τ L^{nd}`.
    pub q_eff: Estimate,
    /// Lower-bound kernel between dense blocks.
    pub kernel_table: Vec<f64>,
}

/// Estimates `q_eff` from `trials` independent direct samples of `Λ_n`.
pub fn contract_to_site_bond(
    kernel: &Kernel,
    n: u32,
    horizon: u32,
    tau: f64,
    trials: u64,
    seed: u64,
) -> Result<EffectiveSiteBond> {
    if !(tau > 0.0 && tau <= 1.0) || trials == 0 {
        return Err(invalid("need τ in (0, 1] and at least one trial"));
    }
    let family = kernel.family().with_n(n)?;
    let block = family.at(kernel.lambda())?;
    let threshold = tau * block.params().volume() as f64;
    let hits = (0..trials)
        .into_par_iter()
        .map(|i| {
            let f = sample_direct(&SampleSpec::bond(block.clone(), rng::derive_seed(seed, i)))?;
            Ok((f.cluster_stats(None)?.k_max as f64 >= threshold) as u64)
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum();
    let contracted = contract_kernel(kernel, n, horizon, tau)?;
    let kernel_table = (1..=horizon).map(|k| contracted.weight(k)).collect();
    Ok(EffectiveSiteBond {
        q_eff: wilson(hits, trials),
        kernel_table,
    })
}
