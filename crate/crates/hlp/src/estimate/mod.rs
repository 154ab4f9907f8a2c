//! Monte Carlo estimators: dense-cluster probability, pseudo-critical `λ`
//! by bisection, and the `θ²β` diagnostic table.

pub mod stats;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::coarse::sample_recursive;
use crate::error::{invalid, Result};
use crate::kernel::KernelFamily;
use crate::kv::fmt_f64;
use crate::rng;
use crate::sampler::{sample_direct, SampleMode, SampleSpec};
use stats::{bootstrap_mean, wilson, Estimate};

pub const DEFAULT_TAU: f64 = 0.5;
pub const DEFAULT_TARGET_P: f64 = 0.5;
/// Bootstrap resamples for mean densities.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoxSampler {
    Direct,
    Recursive,
}

#[derive(Debug, Clone)]
pub struct ThetaSpec {
    pub family: KernelFamily,
    pub lambda: f64,
    pub n: u32,
    pub tau: f64,
    pub trials: u64,
    pub seed: u64,
    pub q: f64,
    pub sampler: BoxSampler,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThetaEstimate {
    /// `P(|K_max(Λ_n)| ≥ τ |Λ_n|)`.
    pub p_dense: Estimate,
    /// `E |K_max(Λ_n)| / |Λ_n|`.
    pub mean_density: Estimate,
}

/// `|K_max| / |Λ_n|` of replicate `i`; seeds depend only on `(seed, i)`.
fn densities(spec: &ThetaSpec, from: u64, to: u64) -> Result<Vec<f64>> {
    let kernel = spec.family.with_n(spec.n)?.at(spec.lambda)?;
    let volume = kernel.params().volume() as f64;
    (from..to)
        .into_par_iter()
        .map(|i| {
            let s = rng::derive_seed(spec.seed, i);
            let k_max = match spec.sampler {
                BoxSampler::Direct => {
                    let f = sample_direct(&SampleSpec {
                        kernel: kernel.clone(),
                        q: spec.q,
                        seed: s,
                        mode: SampleMode::PoissonPerScale,
                    })?;
                    f.cluster_stats(None)?.k_max
                }
                BoxSampler::Recursive => sample_recursive(&kernel, spec.q, s, None)?.k_max(),
            };
            Ok(k_max as f64 / volume)
        })
        .collect()
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(invalid(format!("tau must lie in (0, 1], got {tau}")));
    }
    Ok(())
}

pub fn estimate_theta_box(spec: &ThetaSpec) -> Result<ThetaEstimate> {
    check_tau(spec.tau)?;
    if spec.trials == 0 {
        return Err(invalid("trials must be positive"));
    }
    let xs = densities(spec, 0, spec.trials)?;
    Ok(summarize(&xs, spec.tau, spec.seed))
}

fn dense(x: f64, tau: f64) -> bool {
    // Relative slack absorbs the rounding in |K_max| / |Λ_n|.
    x >= tau * (1.0 - 1e-12)
}

fn summarize(xs: &[f64], tau: f64, seed: u64) -> ThetaEstimate {
    let hits = xs.iter().filter(|&&x| dense(x, tau)).count() as u64;
    ThetaEstimate {
        p_dense: wilson(hits, xs.len() as u64),
        mean_density: bootstrap_mean(xs, BOOTSTRAP_RESAMPLES, seed),
    }
}

#[derive(Debug, Clone)]
pub struct LambdaSearch {
    pub family: KernelFamily,
    pub n: u32,
    pub tau: f64,
    pub target_p: f64,
    pub tol: f64,
    /// Upper end of the initial bracket.
    pub lambda_max: f64,
    pub batch: u64,
    /// Batches allowed per `λ` before the point counts as undecided.
    pub max_batches: u64,
    pub max_steps: u32,
    pub seed: u64,
    pub q: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaPoint {
    pub lambda: f64,
    pub p_dense: Estimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaBracket {
    pub lo: f64,
    pub hi: f64,
    pub budget_exhausted: bool,
    /// Some pair of evaluations has disjoint intervals in the wrong order.
    pub non_monotone: bool,
    pub points: Vec<LambdaPoint>,
}

enum Side {
    Above,
    Below,
    Undecided,
}

/// Sequential sampling at one `λ`: batches with common seeds until the
/// Wilson interval excludes the target or the batch budget runs out.
fn decide(s: &LambdaSearch, lambda: f64, points: &mut Vec<LambdaPoint>) -> Result<Side> {
    let spec = ThetaSpec {
        family: s.family.clone(),
        lambda,
        n: s.n,
        tau: s.tau,
        trials: 0,
        seed: s.seed,
        q: s.q,
        sampler: BoxSampler::Direct,
    };
    let mut hits = 0;
    let mut done = 0;
    for b in 0..s.max_batches {
        let xs = densities(&spec, b * s.batch, (b + 1) * s.batch)?;
        hits += xs.iter().filter(|&&x| dense(x, s.tau)).count() as u64;
        done += s.batch;
        let e = wilson(hits, done);
        if e.lo > s.target_p || e.hi < s.target_p {
            points.push(LambdaPoint { lambda, p_dense: e });
            return Ok(if e.lo > s.target_p {
                Side::Above
            } else {
                Side::Below
            });
        }
    }
    points.push(LambdaPoint {
        lambda,
        p_dense: wilson(hits, done),
    });
    Ok(Side::Undecided)
}

/// Bisection for the `λ` at which `P(|K_max(Λ_n)| ≥ τ|Λ_n|)` crosses `target_p`.
pub fn estimate_lambda_c(s: &LambdaSearch) -> Result<LambdaBracket> {
    check_tau(s.tau)?;
    if !(0.0..1.0).contains(&s.target_p) || !(s.tol > 0.0) || !(s.lambda_max > 0.0) || s.batch == 0
    {
        return Err(invalid(
            "need target_p in [0, 1), tol > 0, lambda_max > 0, batch > 0",
        ));
    }
    let mut out = LambdaBracket {
        lo: 0.0,
        hi: s.lambda_max,
        budget_exhausted: false,
        non_monotone: false,
        points: Vec::new(),
    };
    if s.target_p == 0.0 {
        out.hi = 0.0;
        return Ok(out);
    }
    match decide(s, s.lambda_max, &mut out.points)? {
        Side::Above => {}
        _ => {
            out.budget_exhausted = true;
            return Ok(finish(out));
        }
    }
    for _ in 0..s.max_steps {
        if out.hi - out.lo <= s.tol {
            return Ok(finish(out));
        }
        let mid = 0.5 * (out.lo + out.hi);
        match decide(s, mid, &mut out.points)? {
            Side::Above => out.hi = mid,
            Side::Below => out.lo = mid,
            Side::Undecided => {
                out.budget_exhausted = true;
                return Ok(finish(out));
            }
        }
    }
    out.budget_exhausted = out.hi - out.lo > s.tol;
    Ok(finish(out))
}

fn finish(mut b: LambdaBracket) -> LambdaBracket {
    let mut pts = b.points.clone();
    pts.sort_by(|x, y| x.lambda.total_cmp(&y.lambda));
    b.non_monotone = pts
        .iter()
        .enumerate()
        .any(|(i, x)| pts[i + 1..].iter().any(|y| y.p_dense.hi < x.p_dense.lo));
    b
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticRow {
    pub n: u32,
    pub tau: f64,
    pub p_dense: Estimate,
    pub mean_density: Estimate,
    pub beta: f64,
    pub beta_exact: bool,
    /// `θ̂²` with `θ̂` the mean `K_max` density.
    pub theta_sq: f64,
    pub theta_sq_beta: f64,
}

/// Finite-box proxy for `θ(β)² β` over a grid of box levels and `τ`.
/// Descriptive only; no asymptotic claim is attached to it.
pub fn imbrie_newman_diagnostic(
    family: &KernelFamily,
    lambda: f64,
    n_list: &[u32],
    tau_grid: &[f64],
    trials: u64,
    seed: u64,
    q: f64,
) -> Result<Vec<DiagnosticRow>> {
    let horizon = n_list.iter().copied().max().unwrap_or(0).max(40);
    let beta = family.with_n(horizon.min(62))?.at(lambda)?.beta(horizon);
    let mut rows = Vec::new();
    for &n in n_list {
        let spec = ThetaSpec {
            family: family.clone(),
            lambda,
            n,
            tau: tau_grid.first().copied().unwrap_or(DEFAULT_TAU),
            trials,
            seed: rng::derive_seed(seed, n as u64),
            q,
            sampler: BoxSampler::Direct,
        };
        let xs = densities(&spec, 0, trials)?;
        for &tau in tau_grid {
            check_tau(tau)?;
            let e = summarize(&xs, tau, spec.seed);
            let theta_sq = e.mean_density.value.powi(2);
            rows.push(DiagnosticRow {
                n,
                tau,
                p_dense: e.p_dense,
                mean_density: e.mean_density,
                beta: beta.value,
                beta_exact: beta.exact,
                theta_sq,
                theta_sq_beta: theta_sq * beta.value,
            });
        }
    }
    Ok(rows)
}

pub fn diagnostic_csv(rows: &[DiagnosticRow]) -> String {
    let mut s = String::from(
        "n,tau,p_dense,p_dense_lo,p_dense_hi,mean_density,mean_density_lo,mean_density_hi,beta,beta_exact,theta_sq,theta_sq_beta\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            fmt_f64(r.tau),
            fmt_f64(r.p_dense.value),
            fmt_f64(r.p_dense.lo),
            fmt_f64(r.p_dense.hi),
            fmt_f64(r.mean_density.value),
            fmt_f64(r.mean_density.lo),
            fmt_f64(r.mean_density.hi),
            fmt_f64(r.beta),
            r.beta_exact,
            fmt_f64(r.theta_sq),
            fmt_f64(r.theta_sq_beta),
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{FamilyKind, KernelForm};
    use crate::lattice::LatticeParams;

    fn two_site_family() -> KernelFamily {
        KernelFamily::new(
            LatticeParams::new(2, 1, 1).unwrap(),
            FamilyKind::Scaled(KernelForm::Table(vec![1.0])),
        )
        .unwrap()
    }

    #[test]
    fn zero_lambda_density_is_singleton_floor() {
        let spec = ThetaSpec {
            family: two_site_family().with_n(4).unwrap(),
            lambda: 0.0,
            n: 4,
            tau: 0.5,
            trials: 50,
            seed: 1,
            q: 1.0,
            sampler: BoxSampler::Direct,
        };
        let e = estimate_theta_box(&spec).unwrap();
        assert_eq!(e.p_dense.value, 0.0);
        assert_eq!(e.mean_density.value, 1.0 / 16.0);
    }

    #[test]
    fn target_zero_gives_zero_bracket() {
        let s = LambdaSearch {
            family: two_site_family(),
            n: 1,
            tau: 1.0,
            target_p: 0.0,
            tol: 0.01,
            lambda_max: 4.0,
            batch: 100,
            max_batches: 10,
            max_steps: 20,
            seed: 0,
            q: 1.0,
        };
        let b = estimate_lambda_c(&s).unwrap();
        assert_eq!((b.lo, b.hi), (0.0, 0.0));
    }
}
