//! The single-threshold scheme: good blocks at level `R_m` and the
//! niceness criterion between `R_m` and `R_{m+1}`.

use serde::Serialize;

use super::levels::sweep;
use super::schedule::ScheduleSimple;
use crate::error::{invalid, Result};
use crate::sampler::ClusterForest;

/// Density above which a child takes part in the niceness test.
pub const NICE_DENSITY: f64 = 0.4;

#[derive(Debug, Clone, Serialize)]
pub struct SimpleLabels {
    pub level: u32,
    pub theta: f64,
    pub good: Vec<bool>,
    pub k_max: Vec<u64>,
}

fn level_u32(x: u64) -> Result<u32> {
    u32::try_from(x).map_err(|_| invalid("level does not fit u32"))
}

fn check_base(forest: &ClusterForest, l: u32) -> Result<()> {
    if forest.params().base() != l as u64 {
        return Err(invalid(format!(
            "schedule base {l} differs from lattice base L^d = {}",
            forest.params().base()
        )));
    }
    Ok(())
}

/// `R_m`-block `b` is good iff `|K_max(b)| ≥ θ_m |b|`.
pub fn classify_simple(
    forest: &ClusterForest,
    schedule: &ScheduleSimple,
    m: u64,
) -> Result<SimpleLabels> {
    check_base(forest, schedule.l)?;
    let level = level_u32(schedule.R(m)?)?;
    if level > forest.params().n() {
        return Err(invalid(format!("R_m = {level} exceeds the box level")));
    }
    let theta = schedule.theta(m)?;
    let data = sweep(forest, &[level]).pop().expect("one level");
    let vol = forest.params().block_volume(level) as f64;
    Ok(SimpleLabels {
        level,
        theta,
        good: data
            .k_max
            .iter()
            .map(|&k| k as f64 >= theta * vol)
            .collect(),
        k_max: data.k_max,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NicenessBlock {
    pub index: u64,
    /// Number of bad `R_m`-blocks inside.
    pub bad: u64,
    pub all_nice: bool,
    pub hypothesis: bool,
    pub k_max: u64,
    pub conclusion: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct NicenessReport {
    pub lower: u32,
    pub upper: u32,
    pub theta_lower: f64,
    pub theta_upper: f64,
    /// `θ_m ≥ 0.9` and `(1 − L^{−r}) θ_m ≥ θ_{m+1}`.
    pub regime_ok: bool,
    pub blocks: Vec<NicenessBlock>,
}

impl NicenessReport {
    /// Blocks where the hypothesis holds but the conclusion fails.
    pub fn violations(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.hypothesis && !b.conclusion)
            .count()
    }
}

/// Evaluates niceness of every intermediate block and the implication
/// "at most one bad `R_m`-block and all nice ⟹ `R_{m+1}`-block good".
pub fn check_niceness(
    forest: &ClusterForest,
    schedule: &ScheduleSimple,
    m: u64,
) -> Result<NicenessReport> {
    check_base(forest, schedule.l)?;
    let p = *forest.params();
    let lower = level_u32(schedule.R(m)?)?;
    let upper = level_u32(schedule.R(m + 1)?)?;
    if upper > p.n() {
        return Err(invalid(format!("R_(m+1) = {upper} exceeds the box level")));
    }
    let (theta_lower, theta_upper) = (schedule.theta(m)?, schedule.theta(m + 1)?);
    let base = p.base();
    let levels: Vec<u32> = (lower..=upper).collect();
    let data = sweep(forest, &levels);
    let top_blocks = p.block_count(upper);
    let mut nice_below = vec![true; top_blocks as usize];
    let edges = forest.edges();
    for c in lower..upper {
        let d = &data[(c - lower) as usize];
        let child_vol = p.block_volume(c);
        let parent_vol = child_vol * base;
        let parents = p.block_count(c + 1) as usize;
        let b = base as usize;
        let mut adj = vec![false; parents * b * b];
        let start = edges.partition_point(|e| e.k <= c);
        for e in edges[start..].iter().take_while(|e| e.k == c + 1) {
            if d.in_k_max[e.u as usize] && d.in_k_max[e.v as usize] {
                let par = (e.u as u64 / parent_vol) as usize;
                let (i, j) = (
                    ((e.u as u64 / child_vol) % base) as usize,
                    ((e.v as u64 / child_vol) % base) as usize,
                );
                adj[par * b * b + i * b + j] = true;
                adj[par * b * b + j * b + i] = true;
            }
        }
        let threshold = NICE_DENSITY * child_vol as f64;
        for par in 0..parents {
            let dense: Vec<usize> = (0..b)
                .filter(|&i| d.k_max[par * b + i] as f64 >= threshold)
                .collect();
            let nice = dense
                .iter()
                .enumerate()
                .all(|(x, &i)| dense[x + 1..].iter().all(|&j| adj[par * b * b + i * b + j]));
            if !nice {
                let top = par as u64 * parent_vol / p.block_volume(upper);
                nice_below[top as usize] = false;
            }
        }
    }
    let low = &data[0];
    let per_top = base.pow(upper - lower) as usize;
    let low_vol = p.block_volume(lower) as f64;
    let top = data.last().expect("at least one level");
    let top_vol = p.block_volume(upper) as f64;
    let blocks = (0..top_blocks as usize)
        .map(|t| {
            let bad = low.k_max[t * per_top..(t + 1) * per_top]
                .iter()
                .filter(|&&k| (k as f64) < theta_lower * low_vol)
                .count() as u64;
            let all_nice = nice_below[t];
            NicenessBlock {
                index: t as u64,
                bad,
                all_nice,
                hypothesis: bad <= 1 && all_nice,
                k_max: top.k_max[t],
                conclusion: top.k_max[t] as f64 >= theta_upper * top_vol,
            }
        })
        .collect();
    let r = (upper - lower) as i32;
    Ok(NicenessReport {
        lower,
        upper,
        theta_lower,
        theta_upper,
        regime_ok: theta_lower >= 0.9
            && (1.0 - (base as f64).powi(-r)) * theta_lower >= theta_upper,
        blocks,
    })
}
