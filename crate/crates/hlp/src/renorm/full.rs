//! Three-label classification (good, mediocre, bad) on the grid
//! `M_g + j r`, with defect levels at the generation levels `M_g`.
//!
//! Labels at `M_{g0}` come from density alone. Above that a block is
//! labelled from its `L^r` children (`L` the flattened base):
//!
//! * too many bad sub-blocks at some grid level of the generation: bad;
//! * all children good: good if `G^mx` is connected, else mediocre;
//! * two or more children not good: bad;
//! * one bad child `φ`: good iff `G^mx` without `φ` is connected;
//! * one mediocre child `φ`: good iff `G^mx` without `φ` is connected and
//!   every component of `φ`'s own `G^mx` is attached to another child;
//! * at `M_{g+1}`, `g > g0`: bad if too many `M_g`-blocks share a defect level.
//!
//! Bad always wins over the other outcomes.

use std::collections::BTreeSet;

use serde::Serialize;
use serde_json::{json, Value};

use super::levels::{components, sweep, LevelData};
use super::schedule::ScheduleFull;
use crate::error::{invalid, Result};
use crate::sampler::ClusterForest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Good,
    Mediocre,
    Bad,
}

/// Which child pattern decided the label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Case {
    /// Density test at the base level.
    Base,
    AllGood,
    ManyNotGood,
    OneBad,
    OneMediocre,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockLabel {
    pub label: Label,
    /// Smallest `G^mx` component size in children, for mediocre blocks.
    pub gamma_count: Option<u32>,
    pub k_max: u64,
    /// `S(ϖ)`; `None` for bad blocks.
    pub s: Option<u64>,
    /// Defect level, set at generation levels above `M_{g0}` for blocks
    /// that are not bad. `None` there means no bad sub-block.
    pub defect_level: Option<u64>,
    pub case: Case,
    /// Too many bad sub-blocks at one grid level.
    pub rule_count: bool,
    /// Too many `M_g`-blocks with the same defect level.
    pub rule_defect: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelLabels {
    pub level: u32,
    /// Generation `g` with `M_g ≤ level < M_{g+1}` (or the last one).
    pub generation: u64,
    pub labels: Vec<BlockLabel>,
    /// Per block: `G^mx` component label of each child (empty at the base).
    #[serde(skip)]
    pub child_components: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelTree {
    pub base: u64,
    pub r: u32,
    pub levels: Vec<LevelLabels>,
}

impl LabelTree {
    pub fn at(&self, level: u32) -> Option<&LevelLabels> {
        self.levels.iter().find(|l| l.level == level)
    }

    /// `γ` of a mediocre block: smallest component size over `L^r`.
    pub fn gamma(&self, label: &BlockLabel) -> Option<f64> {
        label
            .gamma_count
            .map(|c| c as f64 / (self.base as f64).powi(self.r as i32))
    }

    /// Number of blocks with `label` at `level` inside block `index` of
    /// level `outer ≥ level`.
    pub fn count_inside(&self, level: u32, outer: u32, index: u64, label: Label) -> u64 {
        let Some(l) = self.at(level) else { return 0 };
        let span = self.base.pow(outer - level) as usize;
        let i = index as usize * span;
        l.labels[i..i + span]
            .iter()
            .filter(|b| b.label == label)
            .count() as u64
    }

    fn node(&self, li: usize, index: usize) -> Value {
        let lv = &self.levels[li];
        let b = &lv.labels[index];
        let children: Vec<Value> = if li == 0 {
            Vec::new()
        } else {
            let span = self.base.pow(self.r) as usize;
            (index * span..(index + 1) * span)
                .map(|c| self.node(li - 1, c))
                .collect()
        };
        json!({
            "level": lv.level,
            "index": index,
            "label": b.label,
            "gamma": self.gamma(b),
            "defect_level": b.defect_level,
            "S": b.s,
            "k_max": b.k_max,
            "case": b.case,
            "children": children,
        })
    }

    /// Nested tree, one root per top-level block.
    pub fn to_json(&self) -> Value {
        let top = self.levels.len() - 1;
        Value::Array(
            (0..self.levels[top].labels.len())
                .map(|i| self.node(top, i))
                .collect(),
        )
    }

    /// One row per block, all levels.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "level,index,label,gamma,defect_level,S,k_max,case,rule_count,rule_defect\n",
        );
        for lv in &self.levels {
            for (i, b) in lv.labels.iter().enumerate() {
                let opt = |x: Option<u64>| x.map(|v| v.to_string()).unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{:?},{},{}\n",
                    lv.level,
                    i,
                    serde_json::to_value(b.label).unwrap().as_str().unwrap(),
                    self.gamma(b).map(crate::kv::fmt_f64).unwrap_or_default(),
                    opt(b.defect_level),
                    opt(b.s),
                    b.k_max,
                    b.case,
                    b.rule_count,
                    b.rule_defect
                ));
            }
        }
        out
    }
}

/// Children-level `G^mx` edges of every block at `level`, deduplicated.
fn mx_edges(
    forest: &ClusterForest,
    child: &LevelData,
    level: u32,
    r: u32,
) -> Vec<Vec<(usize, usize)>> {
    let p = forest.params();
    let cv = p.block_volume(level - r);
    let span = p.base().pow(r);
    let mut out: Vec<BTreeSet<(usize, usize)>> =
        vec![BTreeSet::new(); p.block_count(level) as usize];
    let edges = forest.edges();
    let start = edges.partition_point(|e| e.k <= level - r);
    for e in edges[start..].iter().take_while(|e| e.k <= level) {
        if child.in_k_max[e.u as usize] && child.in_k_max[e.v as usize] {
            let (a, b) = (e.u as u64 / cv, e.v as u64 / cv);
            let i = (a % span) as usize;
            let j = (b % span) as usize;
            out[(a / span) as usize].insert((i.min(j), i.max(j)));
        }
    }
    out.into_iter().map(|s| s.into_iter().collect()).collect()
}

fn connected_without(n: usize, edges: &[(usize, usize)], skip: Option<usize>) -> bool {
    let kept = edges
        .iter()
        .copied()
        .filter(|&(a, b)| Some(a) != skip && Some(b) != skip);
    let labels = components(n, kept);
    let anchor = (0..n).find(|&i| Some(i) != skip);
    match anchor {
        None => true,
        Some(a) => (0..n)
            .filter(|&i| Some(i) != skip)
            .all(|i| labels[i] == labels[a]),
    }
}

/// Labels every grid block of the box. The box level must be on the grid.
pub fn classify_full(forest: &ClusterForest, schedule: &ScheduleFull) -> Result<LabelTree> {
    let p = *forest.params();
    let base = p.base();
    if base != schedule.params.l as u64 {
        return Err(invalid(format!(
            "schedule base {} differs from lattice base L^d = {base}",
            schedule.params.l
        )));
    }
    let r = schedule.params.r;
    let n_cap = schedule.params.n_cap as u64;
    let m0 = schedule.levels[0];
    let n = p.n() as u64;
    if n < m0 || !schedule.on_grid(n) {
        return Err(invalid(format!(
            "box level {n} is not on the grid from M_g0 = {m0} in steps of {r}"
        )));
    }
    let grid: Vec<u32> = (m0..=n).step_by(r as usize).map(|x| x as u32).collect();
    let data = sweep(forest, &grid);
    let gen_of = |level: u64| {
        schedule
            .generation_of(level)
            .unwrap_or_else(|| schedule.g_max())
    };
    let is_gen_level = |level: u64| schedule.levels.contains(&level);

    let vol0 = p.block_volume(grid[0]);
    let mut levels = vec![LevelLabels {
        level: grid[0],
        generation: schedule.g0,
        labels: data[0]
            .k_max
            .iter()
            .map(|&k| {
                let good = k == vol0;
                BlockLabel {
                    label: if good { Label::Good } else { Label::Bad },
                    gamma_count: None,
                    k_max: k,
                    s: good.then_some(k),
                    defect_level: None,
                    case: Case::Base,
                    rule_count: false,
                    rule_defect: false,
                }
            })
            .collect(),
        child_components: Vec::new(),
    }];

    let span = base.pow(r) as usize;
    for li in 1..grid.len() {
        let level = grid[li];
        let c = (level - r) as u64;
        let g = gen_of(c);
        let m_g = schedule.level(g)?;
        let end_of_generation = is_gen_level(level as u64);
        let mx = mx_edges(forest, &data[li - 1], level, r);
        let kids = &levels[li - 1];
        let mut labels = Vec::with_capacity(mx.len());
        let mut child_components = Vec::with_capacity(mx.len());
        for (i, edges) in mx.iter().enumerate() {
            let ch = &kids.labels[i * span..(i + 1) * span];
            let comps = components(span, edges.iter().copied());
            // Too many bad blocks at some grid level of this generation.
            let rule_count = (m_g..=c).step_by(r as usize).any(|m| {
                let lvl = m as u32;
                let li_m = ((m - m0) / r as u64) as usize;
                let per = base.pow(level - lvl) as usize;
                levels[li_m].labels[i * per..(i + 1) * per]
                    .iter()
                    .filter(|b| b.label == Label::Bad)
                    .count() as u64
                    > n_cap
            });
            let not_good: Vec<usize> = (0..span).filter(|&j| ch[j].label != Label::Good).collect();
            let (mut label, case, mut gamma_count) = match not_good.as_slice() {
                [] => {
                    if comps.iter().all(|&x| x == 0) {
                        (Label::Good, Case::AllGood, None)
                    } else {
                        let mut sizes = vec![0u32; span];
                        comps.iter().for_each(|&x| sizes[x] += 1);
                        let smallest = sizes.into_iter().filter(|&s| s > 0).min();
                        (Label::Mediocre, Case::AllGood, smallest)
                    }
                }
                [phi] if ch[*phi].label == Label::Bad => {
                    let ok = connected_without(span, edges, Some(*phi));
                    (
                        if ok { Label::Good } else { Label::Bad },
                        Case::OneBad,
                        None,
                    )
                }
                [phi] => {
                    let ok = connected_without(span, edges, Some(*phi))
                        && attached(forest, &data, &levels, li, i * span + phi, m0, r);
                    (
                        if ok { Label::Good } else { Label::Bad },
                        Case::OneMediocre,
                        None,
                    )
                }
                _ => (Label::Bad, Case::ManyNotGood, None),
            };
            if rule_count {
                label = Label::Bad;
            }
            let mut rule_defect = false;
            if end_of_generation && g > schedule.g0 && label != Label::Bad {
                // M_g-blocks inside, keyed by their defect level j'.
                let m_prev = schedule.level(g - 1)?;
                let rbar_next = level as u64 - m_g;
                let li_g = ((m_g - m0) / r as u64) as usize;
                let per = base.pow(level - m_g as u32) as usize;
                let inner = &levels[li_g].labels[i * per..(i + 1) * per];
                for j in (m_prev..=m_g - r as u64).step_by(r as usize) {
                    let count = inner
                        .iter()
                        .filter(|b| b.label != Label::Bad && b.defect_level == Some(j))
                        .count();
                    let gf = g as f64;
                    let threshold = gf.ln().powi(3)
                        * ((base as f64).powf((rbar_next + m_g - j) as f64)
                            * gf.powf(-1.0 - schedule.params.eps))
                        .ceil();
                    if count as f64 >= threshold {
                        rule_defect = true;
                    }
                }
                if rule_defect {
                    label = Label::Bad;
                }
            }
            if label != Label::Mediocre {
                gamma_count = None;
            }
            let defect_level = if end_of_generation && label != Label::Bad {
                (m_g..=level as u64 - r as u64)
                    .step_by(r as usize)
                    .collect::<Vec<_>>()
                    .into_iter()
                    .rev()
                    .find(|&m| {
                        let li_m = ((m - m0) / r as u64) as usize;
                        let per = base.pow(level - m as u32) as usize;
                        levels[li_m].labels[i * per..(i + 1) * per]
                            .iter()
                            .any(|b| b.label == Label::Bad)
                    })
            } else {
                None
            };
            let k_max = data[li].k_max[i];
            let s = match label {
                Label::Good => Some(k_max),
                Label::Mediocre => Some(ch.iter().map(|b| b.k_max).sum()),
                Label::Bad => None,
            };
            labels.push(BlockLabel {
                label,
                gamma_count,
                k_max,
                s,
                defect_level,
                case,
                rule_count,
                rule_defect,
            });
            child_components.push(comps);
        }
        levels.push(LevelLabels {
            level,
            generation: gen_of(level as u64),
            labels,
            child_components,
        });
    }
    Ok(LabelTree { base, r, levels })
}

/// For a mediocre block `φ` (index `phi` at level `grid[li-1]`): every
/// component of its `G^mx` holds a child `σ` whose `K_max` has an open edge
/// to the `K_max` of some sibling `ψ ≠ φ` of `φ`.
fn attached(
    forest: &ClusterForest,
    data: &[LevelData],
    levels: &[LevelLabels],
    li: usize,
    phi: usize,
    m0: u64,
    r: u32,
) -> bool {
    debug_assert!(li >= 2 && (data[li].level as u64) >= m0 + 2 * r as u64);
    let p = forest.params();
    let c = data[li - 1].level;
    let grand = &data[li - 2];
    let sibling = &data[li - 1];
    let comps = &levels[li - 1].child_components[phi];
    let gv = p.block_volume(c - r);
    let cv = p.block_volume(c);
    let span = p.base().pow(r);
    let mut reached = vec![false; comps.len()];
    let edges = forest.edges();
    let start = edges.partition_point(|e| e.k <= c);
    for e in edges[start..].iter().take_while(|e| e.k <= c + r) {
        for (x, y) in [(e.u as u64, e.v as u64), (e.v as u64, e.u as u64)] {
            if x / cv == phi as u64
                && y / cv != phi as u64
                && grand.in_k_max[x as usize]
                && sibling.in_k_max[y as usize]
            {
                reached[comps[((x / gv) % span) as usize]] = true;
            }
        }
    }
    (0..comps.len()).all(|j| comps[j] != j || reached[j])
}
