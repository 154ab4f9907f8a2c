use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use hlp::coarse::sample_recursive;
use hlp::estimate::{
    diagnostic_csv, estimate_lambda_c, estimate_theta_box, imbrie_newman_diagnostic, BoxSampler,
    LambdaSearch, ThetaSpec, DEFAULT_TARGET_P, DEFAULT_TAU,
};
use hlp::kv::fmt_f64;
use hlp::renorm::bounds::{bound_evaluators, monte_carlo, BoundKind, BoundParams, CSV_HEADER};
use hlp::renorm::full::classify_full;
use hlp::renorm::recursion::bm_recursion;
use hlp::renorm::schedule::{FullParams, ScheduleFull, ScheduleSimple};
use hlp::renorm::simple::{check_niceness, classify_simple};
use hlp::renorm::validate::validate_density_evolution;
use hlp::rng::derive_seed;
use hlp::sampler::{sample, ClusterForest, SampleMode, SampleSpec};
use hlp::Kernel;
use serde_json::{json, Value};

use crate::config::Config;
use crate::error::CliError;
use crate::output::Out;

type Result<T> = std::result::Result<T, CliError>;

fn to_json<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("plain data serializes")
}

/// Lattice, family and `λ` from the config.
fn kernel(cfg: &Config) -> Result<Kernel> {
    let p = cfg.lattice()?;
    let lambda = cfg.f64("lambda")?.unwrap_or(1.0);
    Ok(cfg.family(p)?.at(lambda)?)
}

fn sample_mode(cfg: &Config, key: &str) -> Result<SampleMode> {
    match cfg.str(key).unwrap_or("direct") {
        "direct" => Ok(SampleMode::PoissonPerScale),
        "per-edge" => Ok(SampleMode::PerEdge),
        other => Err(CliError::Config(format!(
            "`{key}`: unknown sampler `{other}`"
        ))),
    }
}

fn forest(cfg: &Config) -> Result<ClusterForest> {
    let kernel = kernel(cfg)?;
    let q = cfg.site_q()?;
    let mode = sample_mode(cfg, "sampler")?;
    cfg.finish()?;
    Ok(sample(&SampleSpec {
        kernel,
        q,
        seed: cfg.seed,
        mode,
    })?)
}

pub fn sample_cmd(cfg: &Config, out: &mut Out) -> Result<()> {
    if cfg.str("sampler") == Some("recursive") {
        let kernel = kernel(cfg)?;
        let q = cfg.site_q()?;
        cfg.finish()?;
        let b = sample_recursive(&kernel, q, cfg.seed, None)?;
        out.csv("block_state.csv", &b.to_csv())?;
        out.json(
            "sample.json",
            json!({ "k_max": b.k_max(), "mass": b.mass(), "clusters": b.sizes.len() }),
        )?;
        println!("K_max {} of {}", b.k_max(), kernel.params().volume());
        return Ok(());
    }
    let f = forest(cfg)?;
    let stats = f.cluster_stats(None)?;
    out.after_header("edges.txt", &f.edge_list().to_text())?;
    out.csv("clusters.csv", &stats.to_csv())?;
    out.json(
        "sample.json",
        json!({ "edges": f.edges().len(), "k_max": stats.k_max, "open_vertices": stats.open_vertices }),
    )?;
    println!(
        "{} edges, K_max {} of {}",
        f.edges().len(),
        stats.k_max,
        f.params().volume()
    );
    Ok(())
}

pub fn theta(cfg: &Config, out: &mut Out) -> Result<()> {
    let p = cfg.lattice()?;
    let family = cfg.family(p)?;
    let lambdas = cfg.f64_list("lambda")?.unwrap_or(vec![1.0]);
    let tau = cfg.f64("theta.tau")?.unwrap_or(DEFAULT_TAU);
    let trials = cfg.req_u64("theta.trials")?;
    let sampler = match cfg.str("theta.sampler").unwrap_or("direct") {
        "direct" => BoxSampler::Direct,
        "recursive" => BoxSampler::Recursive,
        other => return Err(CliError::Config(format!("unknown box sampler `{other}`"))),
    };
    let q = cfg.site_q()?;
    cfg.finish()?;
    let mut csv = String::from(
        "lambda,n,tau,trials,p_dense,p_dense_lo,p_dense_hi,mean_density,mean_density_lo,mean_density_hi\n",
    );
    let mut rows = Vec::new();
    for (i, &lambda) in lambdas.iter().enumerate() {
        let e = estimate_theta_box(&ThetaSpec {
            family: family.clone(),
            lambda,
            n: p.n(),
            tau,
            trials,
            seed: derive_seed(cfg.seed, i as u64),
            q,
            sampler,
        })?;
        let _ = writeln!(
            csv,
            "{},{},{},{trials},{},{},{},{},{},{}",
            fmt_f64(lambda),
            p.n(),
            fmt_f64(tau),
            fmt_f64(e.p_dense.value),
            fmt_f64(e.p_dense.lo),
            fmt_f64(e.p_dense.hi),
            fmt_f64(e.mean_density.value),
            fmt_f64(e.mean_density.lo),
            fmt_f64(e.mean_density.hi),
        );
        println!(
            "λ = {lambda}: p_dense {:.4}, mean density {:.4}",
            e.p_dense.value, e.mean_density.value
        );
        rows.push(json!({ "lambda": lambda, "estimate": to_json(&e) }));
    }
    out.csv("theta.csv", &csv)?;
    out.json("theta.json", Value::Array(rows))?;
    Ok(())
}

pub fn lambda_c(cfg: &Config, out: &mut Out) -> Result<()> {
    let p = cfg.lattice()?;
    let s = LambdaSearch {
        family: cfg.family(p)?,
        n: p.n(),
        tau: cfg.f64("lambda_c.tau")?.unwrap_or(DEFAULT_TAU),
        target_p: cfg.f64("lambda_c.target_p")?.unwrap_or(DEFAULT_TARGET_P),
        tol: cfg.f64("lambda_c.tol")?.unwrap_or(0.01),
        lambda_max: cfg.req_f64("lambda_c.lambda_max")?,
        batch: cfg.u64("lambda_c.batch")?.unwrap_or(200),
        max_batches: cfg.u64("lambda_c.max_batches")?.unwrap_or(50),
        max_steps: cfg.u32("lambda_c.max_steps")?.unwrap_or(40),
        seed: cfg.seed,
        q: cfg.site_q()?,
    };
    cfg.finish()?;
    let b = estimate_lambda_c(&s)?;
    let mut csv = String::from("lambda,p_dense,p_dense_lo,p_dense_hi,trials\n");
    for pt in &b.points {
        let e = &pt.p_dense;
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            fmt_f64(pt.lambda),
            fmt_f64(e.value),
            fmt_f64(e.lo),
            fmt_f64(e.hi),
            e.trials
        );
    }
    out.csv("lambda_c.csv", &csv)?;
    out.json("lambda_c.json", to_json(&b))?;
    println!("λ_c(n = {}) ∈ [{}, {}]", s.n, b.lo, b.hi);
    if b.non_monotone {
        eprintln!("warning: evaluations are not monotone in λ");
    }
    if b.budget_exhausted {
        return Err(CliError::Budget(format!(
            "bracket [{}, {}] wider than tol {}",
            b.lo, b.hi, s.tol
        )));
    }
    Ok(())
}

pub fn classify(cfg: &Config, out: &mut Out) -> Result<()> {
    match cfg.str("classify.scheme").unwrap_or("full") {
        "simple" => classify_simple_cmd(cfg, out),
        "full" => classify_full_cmd(cfg, out),
        other => Err(CliError::Config(format!("unknown scheme `{other}`"))),
    }
}

fn classify_simple_cmd(cfg: &Config, out: &mut Out) -> Result<()> {
    let base = cfg.lattice()?.base();
    let l =
        u32::try_from(base).map_err(|_| CliError::Config("L^d too large for a schedule".into()))?;
    let m0 = cfg.req_u64("schedule.m0")?;
    let m = cfg.u64("classify.m")?.unwrap_or(m0);
    let schedule = if cfg.bool("schedule.unchecked")?.unwrap_or(false) {
        ScheduleSimple::new_unchecked(l, m0)?
    } else {
        ScheduleSimple::new(l, m0)?
    };
    let f = forest(cfg)?;
    let labels = classify_simple(&f, &schedule, m)?;
    let mut csv = String::from("level,index,k_max,good\n");
    for (i, (k, g)) in labels.k_max.iter().zip(&labels.good).enumerate() {
        let _ = writeln!(csv, "{},{i},{k},{g}", labels.level);
    }
    out.csv("labels.csv", &csv)?;
    let fits = schedule.R(m + 1).is_ok_and(|u| u <= f.params().n() as u64);
    let niceness = if fits {
        Some(check_niceness(&f, &schedule, m)?)
    } else {
        None
    };
    let good = labels.good.iter().filter(|&&g| g).count();
    println!(
        "{good} of {} blocks at level {} good",
        labels.good.len(),
        labels.level
    );
    if let Some(r) = &niceness {
        println!("niceness: {} violations", r.violations());
    }
    out.json(
        "classify.json",
        json!({ "labels": to_json(&labels), "niceness": to_json(&niceness) }),
    )?;
    Ok(())
}

fn classify_full_cmd(cfg: &Config, out: &mut Out) -> Result<()> {
    let base = cfg.lattice()?.base();
    let params = FullParams {
        l: u32::try_from(base)
            .map_err(|_| CliError::Config("L^d too large for a schedule".into()))?,
        a: cfg.req_f64("schedule.a")?,
        n_cap: cfg.req_u32("schedule.N")?,
        eps: cfg.req_f64("schedule.eps")?,
        zeta: cfg.req_f64("schedule.zeta")?,
        theta: cfg.req_f64("schedule.theta")?,
        r: cfg.req_u32("schedule.r")?,
    };
    let g0 = cfg.u64("schedule.g0")?;
    let schedule = match (
        cfg.u64("schedule.base_level")?,
        cfg.u32_list("schedule.rbars")?,
    ) {
        (Some(base_level), Some(rbars)) => {
            let g0 = g0.ok_or_else(|| CliError::Config("overrides need `schedule.g0`".into()))?;
            ScheduleFull::with_overrides(params, g0, base_level, &rbars)?
        }
        (None, None) => {
            ScheduleFull::new(params, g0, cfg.u64("schedule.generations")?.unwrap_or(1))?
        }
        _ => {
            return Err(CliError::Config(
                "`schedule.base_level` and `schedule.rbars` go together".into(),
            ))
        }
    };
    let f = forest(cfg)?;
    let tree = classify_full(&f, &schedule)?;
    let report = validate_density_evolution(&tree, &f, &schedule)?;
    out.csv("labels.csv", &tree.to_csv())?;
    out.json("labels.json", tree.to_json())?;
    out.json(
        "validation.json",
        json!({ "schedule": to_json(&schedule), "report": to_json(&report) }),
    )?;
    let top = tree.levels.last().expect("non-empty tree");
    let mut counts = BTreeMap::new();
    for b in &top.labels {
        *counts.entry(format!("{:?}", b.label)).or_insert(0u64) += 1;
    }
    println!("level {}: {counts:?}", top.level);
    println!(
        "validation: {} blocks, {} violations, regime {}",
        report.blocks_checked,
        report.violations.len(),
        if report.regime_ok { "ok" } else { "outside" }
    );
    Ok(())
}

pub fn recursion(cfg: &Config, out: &mut Out) -> Result<()> {
    let l = cfg.u32("recursion.L")?.unwrap_or(2);
    let a = cfg.req_f64("recursion.a")?;
    let m0 = cfg.req_u64("recursion.M")?;
    let b0 = cfg.f64("recursion.b_M")?.unwrap_or((m0 as f64).powi(-7));
    let m_max = cfg.u64("recursion.m_max")?.unwrap_or(10_000);
    cfg.finish()?;
    let r = bm_recursion(l, a, m0, b0, m_max)?;
    out.csv("recursion.csv", &r.to_csv())?;
    out.json(
        "recursion.json",
        json!({
            "L": l, "a": a, "M": m0, "b_M": b0, "m_max": m_max,
            "verdict": if r.verdict { "PASS" } else { "FAIL" },
            "first_failure": r.first_failure,
        }),
    )?;
    match r.first_failure {
        None => println!("PASS: b_m ≤ m^-7 for {m0} ≤ m ≤ {m_max}"),
        Some(m) => println!("FAIL: b_m > m^-7 first at m = {m}"),
    }
    Ok(())
}

pub fn bounds(cfg: &Config, out: &mut Out) -> Result<()> {
    let kernel = kernel(cfg)?;
    let kinds = match cfg.req_str("bounds.kind")? {
        "all" => BoundKind::ALL.to_vec(),
        s => s
            .split(',')
            .map(|k| BoundKind::parse(k.trim()))
            .collect::<hlp::Result<_>>()?,
    };
    let ns = cfg
        .u32_list("bounds.n")?
        .ok_or_else(|| CliError::Config("missing key `bounds.n`".into()))?;
    let k = cfg.req_u32("bounds.k")?;
    let a = cfg.req_f64("bounds.a")?;
    let mut base = BoundParams::new(0, k, a);
    base.delta = cfg.f64("bounds.delta")?.unwrap_or(base.delta);
    base.eps = cfg.f64("bounds.eps")?.unwrap_or(base.eps);
    base.gamma = cfg.f64("bounds.gamma")?.unwrap_or(base.gamma);
    base.size = cfg.u64("bounds.size")?.unwrap_or(base.size);
    base.sample = cfg.u64("bounds.sample")?;
    base.sample_seed = derive_seed(cfg.seed, u64::MAX);
    let trials = cfg.u64("bounds.trials")?.unwrap_or(0);
    cfg.finish()?;
    let mut csv = format!("{},mc,mc_lo,mc_hi,mc_trials\n", CSV_HEADER.trim_end());
    let mut rows = Vec::new();
    let mut i = 0;
    for kind in kinds {
        for &n in &ns {
            let p = BoundParams { n, ..base };
            let r = bound_evaluators(kind, &kernel, &p)?;
            let mc = if trials > 0 && kind.has_event() {
                Some(monte_carlo(
                    kind,
                    &kernel,
                    &p,
                    trials,
                    derive_seed(cfg.seed, i),
                )?)
            } else {
                None
            };
            i += 1;
            let mut row = r.csv_row();
            row.pop();
            match &mc {
                Some(e) => {
                    let _ = writeln!(
                        csv,
                        "{row},{},{},{},{}",
                        fmt_f64(e.value),
                        fmt_f64(e.lo),
                        fmt_f64(e.hi),
                        e.trials
                    );
                }
                None => {
                    let _ = writeln!(csv, "{row},,,,0");
                }
            }
            println!(
                "{kind} n = {n}: {} {}{}",
                if r.lower { "lower" } else { "upper" },
                r.exact_value,
                mc.map(|e| format!(", MC {}", e.value)).unwrap_or_default()
            );
            rows.push(json!({ "bound": to_json(&r), "monte_carlo": to_json(&mc) }));
        }
    }
    out.csv("bounds.csv", &csv)?;
    out.json("bounds.json", Value::Array(rows))?;
    Ok(())
}

pub fn diagnostic(cfg: &Config, out: &mut Out) -> Result<()> {
    let p = cfg.lattice()?;
    let family = cfg.family(p)?;
    let lambda = cfg.f64("lambda")?.unwrap_or(1.0);
    let ns = cfg.u32_list("diagnostic.n")?.unwrap_or(vec![p.n()]);
    let taus = cfg.f64_list("diagnostic.tau")?.unwrap_or(vec![DEFAULT_TAU]);
    let trials = cfg.req_u64("diagnostic.trials")?;
    let q = cfg.site_q()?;
    cfg.finish()?;
    let rows = imbrie_newman_diagnostic(&family, lambda, &ns, &taus, trials, cfg.seed, q)?;
    out.csv("diagnostic.csv", &diagnostic_csv(&rows))?;
    out.json("diagnostic.json", to_json(&rows))?;
    for r in &rows {
        println!("n = {} τ = {}: θ̂²β = {}", r.n, r.tau, r.theta_sq_beta);
    }
    Ok(())
}

pub fn check_kernel(cfg: &Config, out: &mut Out) -> Result<()> {
    let p = cfg.lattice()?;
    let family = cfg.family(p)?;
    let lambda = cfg.f64("lambda")?.unwrap_or(1.0);
    let horizon = cfg.u32("check_kernel.horizon")?.unwrap_or(40);
    cfg.finish()?;
    let report = family.property_report(lambda, horizon)?;
    let k = family.at(lambda)?;
    let beta = k.beta(horizon);
    let mut csv = String::from("k,weight,open_probability\n");
    for s in 1..=horizon {
        let _ = writeln!(
            csv,
            "{s},{},{}",
            fmt_f64(k.weight(s)),
            fmt_f64(k.open_probability(s))
        );
    }
    out.csv("kernel.csv", &csv)?;
    out.json(
        "kernel_report.json",
        json!({ "report": to_json(&report), "proper": report.is_proper(), "beta": to_json(&beta) }),
    )?;
    println!(
        "integrable={} monotone={} continuous={} non_percolative_at_zero={} regular_constant={} beta={}{}",
        report.integrable,
        report.monotone,
        report.continuous_on_grid,
        report.non_percolative_at_zero,
        report.regular_constant,
        beta.value,
        if beta.exact { "" } else { " (finite horizon)" }
    );
    Ok(())
}

/// Splits columns of any CSV into `x,y` series files, optionally one per
/// value of a grouping column.
pub fn plotdata(cfg: &Config, out: &mut Out) -> Result<()> {
    let input = cfg.req_str("plot.input")?.to_string();
    let x = cfg.req_str("plot.x")?.to_string();
    let ys: Vec<String> = cfg
        .req_str("plot.y")?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let group = cfg.str("plot.group").map(str::to_string);
    cfg.finish()?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(&input)?;
    let header = rdr.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("column `{name}` not in {input}")))
    };
    let xi = col(&x)?;
    let yi: Vec<usize> = ys.iter().map(|y| col(y)).collect::<Result<_>>()?;
    let gi = group.as_deref().map(col).transpose()?;
    // (y, group value) -> rows, in input order.
    let mut series: BTreeMap<(usize, String), String> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let g = gi.map(|i| rec[i].to_string()).unwrap_or_default();
        for (j, &i) in yi.iter().enumerate() {
            let s = series
                .entry((j, g.clone()))
                .or_insert_with(|| format!("{x},{}\n", ys[j]));
            let _ = writeln!(s, "{},{}", &rec[xi], &rec[i]);
        }
    }
    let stem = Path::new(&input)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("data");
    for ((j, g), body) in &series {
        let name = match &group {
            Some(gname) => format!("{stem}.{}.{gname}={g}.csv", ys[*j]),
            None => format!("{stem}.{}.csv", ys[*j]),
        };
        out.csv(&name, body)?;
    }
    println!("{} series from {input}", series.len());
    Ok(())
}
