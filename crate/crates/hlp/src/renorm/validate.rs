//! Deterministic checks of a [`LabelTree`] against the configuration it
//! was computed from.
//!
//! Structural checks (label definitions, `S` bookkeeping, the non-bad set
//! `U` and its size) hold for any parameters. The numeric density bounds
//! are consequences of the labels only under
//! `3N L^{-r} < ζ < 1`, `θ_g ≥ 2/3` and `r̄_g / r ≤ log(g)²`; outside that
//! regime they are evaluated but reported separately and never counted as
//! violations.

use serde::Serialize;

use super::full::{Label, LabelTree};
use super::levels::sweep;
use super::schedule::ScheduleFull;
use crate::error::{invalid, Result};
use crate::sampler::ClusterForest;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub check: &'static str,
    pub level: u32,
    pub index: u64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityReport {
    pub regime_ok: bool,
    /// Regime conditions that fail.
    pub regime_notes: Vec<String>,
    pub blocks_checked: u64,
    pub numeric_checks: u64,
    pub violations: Vec<Violation>,
    /// Numeric bound failures outside the regime (informational).
    pub out_of_regime: Vec<Violation>,
}

impl DensityReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Which regime conditions fail for a tree reaching `top`.
pub fn regime_notes(schedule: &ScheduleFull, top: u64) -> Vec<String> {
    let p = &schedule.params;
    let mut notes = Vec::new();
    let lr = (p.l as f64).powi(-(p.r as i32));
    if !(3.0 * p.n_cap as f64 * lr < p.zeta && p.zeta < 1.0) {
        notes.push("3N·L^-r < ζ < 1 fails".to_string());
    }
    let g_top = schedule
        .generation_of(top)
        .unwrap_or_else(|| schedule.g_max());
    for g in schedule.g0..=g_top {
        if let Ok(t) = schedule.theta(g) {
            if t < 2.0 / 3.0 {
                notes.push(format!("θ_{g} = {t} < 2/3"));
            }
        }
        if g > schedule.g0
            && schedule.level(g + 1).is_ok_and(|m| m <= top)
            && !schedule.defect_count_ok(g)
        {
            notes.push(format!("r̄_{g}/r > log({g})²"));
        }
    }
    notes
}

/// Checks every block of `tree`; see the module docs.
pub fn validate_density_evolution(
    tree: &LabelTree,
    forest: &ClusterForest,
    schedule: &ScheduleFull,
) -> Result<DensityReport> {
    let p = *forest.params();
    let base = p.base();
    let r = schedule.params.r;
    if tree.base != base || tree.r != r {
        return Err(invalid(
            "label tree does not match the configuration or schedule",
        ));
    }
    let grid: Vec<u32> = tree.levels.iter().map(|l| l.level).collect();
    let data = sweep(forest, &grid);
    let top = *grid.last().expect("non-empty tree") as u64;
    let notes = regime_notes(schedule, top);
    let regime_ok = notes.is_empty();
    let n_cap = schedule.params.n_cap as f64;
    let zeta = schedule.params.zeta;
    let slack = 1e-9;
    let span = base.pow(r) as usize;
    let m0 = grid[0] as u64;
    let mut out = DensityReport {
        regime_ok,
        regime_notes: notes,
        blocks_checked: 0,
        numeric_checks: 0,
        violations: Vec::new(),
        out_of_regime: Vec::new(),
    };
    let push = |out: &mut DensityReport,
                numeric: bool,
                check: &'static str,
                level: u32,
                index: usize,
                detail: String| {
        let v = Violation {
            check,
            level,
            index: index as u64,
            detail,
        };
        if numeric && !regime_ok {
            out.out_of_regime.push(v);
        } else {
            out.violations.push(v);
        }
    };
    // Per level: for each block, (|U|, Σ_{σ∈U} S(σ)) with U ⊂ M_g-blocks.
    let mut u_prev: Vec<(u64, u64)> = Vec::new();
    for (li, lv) in tree.levels.iter().enumerate() {
        let level = lv.level;
        let vol = p.block_volume(level);
        let d = &data[li];
        let gen_level = schedule.levels.contains(&(level as u64));
        let mut u_here = Vec::with_capacity(lv.labels.len());
        for (i, b) in lv.labels.iter().enumerate() {
            out.blocks_checked += 1;
            if b.k_max != d.k_max[i] {
                push(
                    &mut out,
                    false,
                    "k_max",
                    level,
                    i,
                    format!("recorded {} actual {}", b.k_max, d.k_max[i]),
                );
            }
            let actual = d.k_max[i];
            let children = (li > 0).then(|| &tree.levels[li - 1].labels[i * span..(i + 1) * span]);
            let child_kmax: u64 = if li > 0 {
                data[li - 1].k_max[i * span..(i + 1) * span].iter().sum()
            } else {
                0
            };
            let expect_s = match b.label {
                Label::Good => Some(actual),
                Label::Mediocre => Some(child_kmax),
                Label::Bad => None,
            };
            if b.s != expect_s {
                push(
                    &mut out,
                    false,
                    "s_definition",
                    level,
                    i,
                    format!("S = {:?}, expected {:?}", b.s, expect_s),
                );
            }
            if li == 0 {
                if (b.label == Label::Good) != (actual == vol) || b.label == Label::Mediocre {
                    push(
                        &mut out,
                        false,
                        "base_label",
                        level,
                        i,
                        format!("{:?} with K_max {actual} of {vol}", b.label),
                    );
                }
            } else if b.label == Label::Mediocre {
                let ok = matches!(b.gamma_count, Some(c) if c >= 1 && (c as usize) < span)
                    && children.is_some_and(|c| c.iter().all(|x| x.label == Label::Good));
                if !ok {
                    push(
                        &mut out,
                        false,
                        "mediocre_shape",
                        level,
                        i,
                        format!("γ count {:?}", b.gamma_count),
                    );
                }
            }
            let s_val = expect_s.unwrap_or(0);
            if b.label == Label::Bad {
                u_here.push((0, 0));
                continue;
            }
            // Which generation's base-level set U is built from.
            let (g, m_g) = if li == 0 {
                (schedule.g0, m0)
            } else {
                let g = schedule
                    .generation_of(level as u64 - r as u64)
                    .unwrap_or_else(|| schedule.g_max());
                (g, schedule.level(g)?)
            };
            let u = if level as u64 == m_g {
                (1, s_val)
            } else {
                let ch = children.expect("above base");
                let mut acc = (0u64, 0u64);
                let mut s_children = 0u64;
                for (j, c) in ch.iter().enumerate() {
                    if c.label != Label::Bad {
                        let cu = u_prev[i * span + j];
                        acc = (acc.0 + cu.0, acc.1 + cu.1);
                        s_children += c.s.unwrap_or(0);
                    }
                }
                if let Some(c) = ch.iter().find(|c| c.label != Label::Bad && c.s.is_none()) {
                    push(
                        &mut out,
                        false,
                        "s_definition",
                        level,
                        i,
                        format!("non-bad child without S: {c:?}"),
                    );
                }
                // Children at M_g restart U from themselves.
                if ch_level_is(m_g, level, r) {
                    acc = ch
                        .iter()
                        .filter(|c| c.label != Label::Bad)
                        .fold((0, 0), |a, c| (a.0 + 1, a.1 + c.s.unwrap_or(0)));
                }
                if s_val < s_children {
                    push(
                        &mut out,
                        false,
                        "s_children",
                        level,
                        i,
                        format!("S {s_val} < Σ non-bad child S {s_children}"),
                    );
                }
                if s_val < acc.1 {
                    push(
                        &mut out,
                        false,
                        "s_over_u",
                        level,
                        i,
                        format!("S {s_val} < Σ_U S {}", acc.1),
                    );
                }
                let j = (level as u64 - m_g) / r as u64;
                let mut bound = base.pow((j * r as u64) as u32) as i128;
                for k in 0..j {
                    let m = (m_g + k * r as u64) as u32;
                    let def = tree.count_inside(m, level, i as u64, Label::Bad) as i128;
                    bound -= def * base.pow(k as u32 * r) as i128;
                }
                if (acc.0 as i128) < bound {
                    push(
                        &mut out,
                        false,
                        "u_size",
                        level,
                        i,
                        format!("|U| {} < {bound}", acc.0),
                    );
                }
                // Part A density bound.
                let theta = schedule.theta(g)?;
                let need = (1.0 - zeta).powi(2) * theta * vol as f64;
                out.numeric_checks += 1;
                if (acc.1 as f64) < need * (1.0 - slack) {
                    push(
                        &mut out,
                        true,
                        "part_a",
                        level,
                        i,
                        format!("Σ_U S {} < (1-ζ)²θ_g|ϖ| = {need}", acc.1),
                    );
                }
                acc
            };
            u_here.push(u);
            if gen_level && li > 0 {
                let expect_def = (m_g..level as u64)
                    .step_by(r as usize)
                    .collect::<Vec<_>>()
                    .into_iter()
                    .rev()
                    .find(|&m| tree.count_inside(m as u32, level, i as u64, Label::Bad) > 0);
                if b.defect_level != expect_def {
                    push(
                        &mut out,
                        false,
                        "defect_level",
                        level,
                        i,
                        format!("{:?}, expected {expect_def:?}", b.defect_level),
                    );
                }
                if b.label == Label::Mediocre {
                    if let Some(n) = b.defect_level {
                        if n + 2 * r as u64 > level as u64 {
                            push(
                                &mut out,
                                false,
                                "mediocre_defect",
                                level,
                                i,
                                format!("defect {n} above M_g - 2r"),
                            );
                        }
                    }
                }
                // Part B at the generation level, with θ of this level.
                let g_here = schedule
                    .generation_of(level as u64)
                    .unwrap_or_else(|| schedule.g_max());
                let theta = schedule.theta(g_here)?;
                let full = theta * vol as f64;
                let mass = if b.label == Label::Good {
                    actual
                } else {
                    child_kmax
                } as f64;
                let need = match b.defect_level {
                    None => full,
                    Some(n) => full - 2.0 * n_cap * p.block_volume(n as u32) as f64,
                };
                out.numeric_checks += 2;
                if mass < need * (1.0 - slack) {
                    push(
                        &mut out,
                        true,
                        "part_b",
                        level,
                        i,
                        format!("{mass} < {need}"),
                    );
                }
                if need < (1.0 - zeta) * full * (1.0 - slack) {
                    push(
                        &mut out,
                        true,
                        "part_b_floor",
                        level,
                        i,
                        format!("{need} < (1-ζ)θ_g|ϖ|"),
                    );
                }
            }
        }
        u_prev = u_here;
    }
    Ok(out)
}

/// The children of a `level`-block sit at `M_g`.
fn ch_level_is(m_g: u64, level: u32, r: u32) -> bool {
    level as u64 == m_g + r as u64
}
