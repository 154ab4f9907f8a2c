//! Scale-indexed kernels `J(L^k)` and monotone families `λ ↦ J(λ, ·)`.
//!
//! A kernel is resolved from a family at a fixed `λ` into three pieces:
//! an optional constant on scales `1..=k₁`, then `factor · long(k)` where
//! `long` is a closed form or a finite table.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kv::{fmt_f64, KvMap};
use crate::lattice::LatticeParams;

/// A `λ`-free weight profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KernelForm {
    /// `J(L^k) = table[k − 1]`; zero past the end.
    Table(Vec<f64>),
    /// `J(L^k) = coeff · L^{−exponent·k}`.
    Power { coeff: f64, exponent: f64 },
    /// `J(L^k) = a · L^d · log log(L^k) / L^{2dk}`, clipped at zero.
    LogLog { a: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FamilyKind {
    /// `λ · base`.
    Scaled(KernelForm),
    /// `λ` on `|e| ≤ N₁`, `base` beyond.
    ShortRangeCutoff { base: KernelForm, n1: u64 },
    /// `λ · a · L^d · log log|e| / |e|^{2d}`, clipped at zero.
    LogLogCritical { a: f64 },
    /// `N₀` on `|e| < N₁`, `λ · a · L^d · log log|e| / |e|^{2d}` beyond.
    SiteBondTheorem4 { a: f64, n0: f64, n1: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFamily {
    params: LatticeParams,
    kind: FamilyKind,
}

/// A family evaluated at one `λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    family: KernelFamily,
    lambda: f64,
}

/// `f(m) = 1 / tail_sum(m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalSize {
    /// May saturate at `+∞` when the tail underflows `f64`.
    Finite(f64),
    /// The kernel vanishes beyond scale `m`.
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Beta {
    pub value: f64,
    /// `false` when read off a finite horizon.
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub integrable: bool,
    /// `max tail_sum(n) / annulus_sum(n + 1)` over the eventual window.
    pub regular_constant: f64,
    pub monotone: bool,
    pub continuous_on_grid: bool,
    /// Expected degree of the origin at `λ = 0`.
    pub degree_at_zero: f64,
    pub non_percolative_at_zero: bool,
}

impl PropertyReport {
    pub fn is_proper(&self) -> bool {
        self.integrable
            && self.regular_constant.is_finite()
            && self.monotone
            && self.continuous_on_grid
            && self.non_percolative_at_zero
    }
}

struct Pieces<'a> {
    short: Option<(u32, f64)>,
    factor: f64,
    long: Cow<'a, KernelForm>,
}

fn loglog(l: f64, k: u32) -> f64 {
    (k as f64 * l.ln()).ln()
}

impl KernelForm {
    fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        match self {
            KernelForm::Table(t) if t.iter().all(|&x| ok(x)) => Ok(()),
            KernelForm::Table(_) => Err(invalid("table weights must be finite and non-negative")),
            KernelForm::Power { coeff, exponent } if ok(*coeff) && exponent.is_finite() => Ok(()),
            KernelForm::Power { .. } => {
                Err(invalid("power kernel needs coeff ≥ 0 and finite exponent"))
            }
            KernelForm::LogLog { a } if ok(*a) => Ok(()),
            KernelForm::LogLog { .. } => Err(invalid("log-log kernel needs a ≥ 0")),
        }
    }

    fn weight(&self, p: &LatticeParams, k: u32) -> f64 {
        let l = p.l() as f64;
        match self {
            KernelForm::Table(t) => t.get(k as usize - 1).copied().unwrap_or(0.0),
            KernelForm::Power { coeff, exponent } => {
                if *coeff == 0.0 {
                    0.0
                } else {
                    coeff * l.powf(-exponent * k as f64)
                }
            }
            KernelForm::LogLog { a } => {
                let b = p.base() as f64;
                let v = a * b * loglog(l, k) * b.powf(-2.0 * k as f64);
                v.max(0.0)
            }
        }
    }

    /// `Σ_{j>m} (L^{jd} − L^{(j−1)d}) · weight(j)`.
    fn tail(&self, p: &LatticeParams, m: u32) -> Result<f64> {
        let b = p.base() as f64;
        let l = p.l() as f64;
        match self {
            KernelForm::Table(t) => {
                let len = t.len() as u32;
                Ok((m + 1..=len)
                    .rev()
                    .map(|j| shell(b, j) * t[j as usize - 1])
                    .sum())
            }
            KernelForm::Power { coeff, exponent } => {
                if *coeff == 0.0 {
                    return Ok(0.0);
                }
                let x = l.powf(p.d() as f64 - exponent);
                if x >= 1.0 {
                    return Err(Error::NotIntegrable(format!(
                        "power exponent {exponent} does not exceed d = {}",
                        p.d()
                    )));
                }
                Ok(coeff * (1.0 - 1.0 / b) * x.powf(m as f64 + 1.0) / (1.0 - x))
            }
            KernelForm::LogLog { a } => {
                if *a == 0.0 {
                    return Ok(0.0);
                }
                // a (B − 1) Σ_{j>m} loglog(L^j) B^{−j}, summed smallest first.
                let mut terms = Vec::new();
                let mut sum = 0.0;
                for i in 1..4096u32 {
                    let t = loglog(l, m + i).max(0.0) * b.powi(-(i as i32));
                    terms.push(t);
                    sum += t;
                    if i > 2 && t <= 1e-19 * sum {
                        break;
                    }
                }
                let s: f64 = terms.iter().rev().sum();
                Ok(a * (b - 1.0) * b.powf(-(m as f64)) * s)
            }
        }
    }
}

fn shell(b: f64, j: u32) -> f64 {
    b.powi(j as i32 - 1) * (b - 1.0)
}

/// Largest `k` with `L^k ≤ limit` (strict: `L^k < limit`).
fn scale_below(l: u32, limit: u64, strict: bool) -> u32 {
    let mut k = 0u32;
    let mut v: u128 = l as u128;
    while v < limit as u128 || (!strict && v == limit as u128) {
        k += 1;
        v *= l as u128;
    }
    k
}

impl KernelFamily {
    pub fn new(params: LatticeParams, kind: FamilyKind) -> Result<Self> {
        match &kind {
            FamilyKind::Scaled(base) => base.validate()?,
            FamilyKind::ShortRangeCutoff { base, .. } => base.validate()?,
            FamilyKind::LogLogCritical { a } => KernelForm::LogLog { a: *a }.validate()?,
            FamilyKind::SiteBondTheorem4 { a, n0, .. } => {
                KernelForm::LogLog { a: *a }.validate()?;
                if !(n0.is_finite() && *n0 >= 0.0) {
                    return Err(invalid("N0 must be finite and non-negative"));
                }
            }
        }
        Ok(Self { params, kind })
    }

    pub fn params(&self) -> &LatticeParams {
        &self.params
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    /// The same family on a box of a different level.
    pub fn with_n(&self, n: u32) -> Result<Self> {
        Ok(Self {
            params: self.params.with_n(n)?,
            kind: self.kind.clone(),
        })
    }

    pub fn at(&self, lambda: f64) -> Result<Kernel> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(invalid(format!(
                "lambda must be finite and non-negative, got {lambda}"
            )));
        }
        Ok(Kernel {
            family: self.clone(),
            lambda,
        })
    }

    fn pieces(&self, lambda: f64) -> Pieces<'_> {
        let l = self.params.l();
        match &self.kind {
            FamilyKind::Scaled(base) => Pieces {
                short: None,
                factor: lambda,
                long: Cow::Borrowed(base),
            },
            FamilyKind::ShortRangeCutoff { base, n1 } => Pieces {
                short: Some((scale_below(l, *n1, false), lambda)),
                factor: 1.0,
                long: Cow::Borrowed(base),
            },
            FamilyKind::LogLogCritical { a } => Pieces {
                short: None,
                factor: lambda,
                long: Cow::Owned(KernelForm::LogLog { a: *a }),
            },
            FamilyKind::SiteBondTheorem4 { a, n0, n1 } => Pieces {
                short: Some((scale_below(l, *n1, true), *n0)),
                factor: lambda,
                long: Cow::Owned(KernelForm::LogLog { a: *a }),
            },
        }
    }

    /// `J(λ, L^k)` for any `k ≥ 1`, ignoring the box level.
    pub fn weight(&self, lambda: f64, k: u32) -> f64 {
        debug_assert!(k >= 1);
        let p = self.pieces(lambda);
        match p.short {
            Some((k1, v)) if k <= k1 => v,
            _ if p.factor == 0.0 => 0.0,
            _ => p.factor * p.long.weight(&self.params, k),
        }
    }

    /// Errors unless `J(λ, ·)` is pointwise non-decreasing along `grid`
    /// on scales `1..=horizon`.
    pub fn check_monotone(&self, grid: &[f64], horizon: u32) -> Result<()> {
        for w in grid.windows(2) {
            if w[1] < w[0] {
                return Err(invalid("lambda grid must be sorted"));
            }
            for k in 1..=horizon {
                if self.weight(w[0], k) > self.weight(w[1], k) {
                    return Err(Error::NotMonotone { scale: k });
                }
            }
        }
        Ok(())
    }

    /// Integrability, regularity, monotonicity and continuity of the family
    /// as seen on a finite grid around `lambda` and scales up to `horizon`.
    pub fn property_report(&self, lambda: f64, horizon: u32) -> Result<PropertyReport> {
        let kernel = self.at(lambda)?;
        let integrable = kernel.tail_sum(0).is_ok_and(f64::is_finite);
        let regular_constant = if integrable {
            kernel.regular_constant(horizon)?
        } else {
            f64::INFINITY
        };
        let top = if lambda > 0.0 { 2.0 * lambda } else { 2.0 };
        let grid: Vec<f64> = (0..=20).map(|i| top * i as f64 / 20.0).collect();
        let monotone = self.check_monotone(&grid, horizon).is_ok();
        let h = 1e-9;
        let continuous_on_grid = grid.iter().all(|&x| {
            (1..=horizon).all(|k| {
                let (a, b) = (self.weight(x, k), self.weight(x + h, k));
                (a - b).abs() <= 1e-6 * (1.0 + a.abs())
            })
        });
        let degree_at_zero = self.at(0.0)?.tail_sum(0).unwrap_or(f64::INFINITY);
        Ok(PropertyReport {
            integrable,
            regular_constant,
            monotone,
            continuous_on_grid,
            degree_at_zero,
            non_percolative_at_zero: degree_at_zero < 1.0,
        })
    }

    pub fn to_kv(&self) -> KvMap {
        let mut m = KvMap::default();
        let put_base = |m: &mut KvMap, base: &KernelForm| match base {
            KernelForm::Table(t) => {
                m.insert("base", "table");
                for (i, w) in t.iter().enumerate() {
                    m.insert(format!("base.table.{}", i + 1), fmt_f64(*w));
                }
            }
            KernelForm::Power { coeff, exponent } => {
                m.insert("base", "power");
                m.insert("base.coeff", fmt_f64(*coeff));
                m.insert("base.exponent", fmt_f64(*exponent));
            }
            KernelForm::LogLog { a } => {
                m.insert("base", "loglog");
                m.insert("base.a", fmt_f64(*a));
            }
        };
        match &self.kind {
            FamilyKind::Scaled(base) => {
                m.insert("kind", "scaled");
                put_base(&mut m, base);
            }
            FamilyKind::ShortRangeCutoff { base, n1 } => {
                m.insert("kind", "short-range-cutoff");
                m.insert("N1", n1.to_string());
                put_base(&mut m, base);
            }
            FamilyKind::LogLogCritical { a } => {
                m.insert("kind", "loglog-critical");
                m.insert("a", fmt_f64(*a));
            }
            FamilyKind::SiteBondTheorem4 { a, n0, n1 } => {
                m.insert("kind", "site-bond-theorem4");
                m.insert("a", fmt_f64(*a));
                m.insert("N0", fmt_f64(*n0));
                m.insert("N1", n1.to_string());
            }
        }
        m
    }

    /// Inverse of [`KernelFamily::to_kv`]. Keys outside the family's own
    /// set are rejected, except those listed in `extra`.
    pub fn from_kv(params: LatticeParams, m: &KvMap, extra: &[&str]) -> Result<Self> {
        let mut allowed: Vec<String> = vec!["kind".into()];
        let kind = match m.required("kind")? {
            "scaled" => FamilyKind::Scaled(parse_base(m, &mut allowed)?),
            "short-range-cutoff" => {
                allowed.push("N1".into());
                FamilyKind::ShortRangeCutoff {
                    base: parse_base(m, &mut allowed)?,
                    n1: required(m.u64("N1")?, "N1")?,
                }
            }
            "loglog-critical" => {
                allowed.push("a".into());
                FamilyKind::LogLogCritical {
                    a: required(m.f64("a")?, "a")?,
                }
            }
            "site-bond-theorem4" => {
                allowed.extend(["a".into(), "N0".into(), "N1".into()]);
                FamilyKind::SiteBondTheorem4 {
                    a: required(m.f64("a")?, "a")?,
                    n0: required(m.f64("N0")?, "N0")?,
                    n1: required(m.u64("N1")?, "N1")?,
                }
            }
            other => return Err(invalid(format!("unknown kernel kind `{other}`"))),
        };
        if let Some(k) = m
            .keys()
            .find(|k| !allowed.iter().any(|a| a == k) && !extra.contains(k))
        {
            return Err(invalid(format!("unexpected kernel key `{k}`")));
        }
        Self::new(params, kind)
    }
}

fn required<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| invalid(format!("missing kernel key `{key}`")))
}

fn parse_base(m: &KvMap, allowed: &mut Vec<String>) -> Result<KernelForm> {
    allowed.push("base".into());
    match m.required("base")? {
        "power" => {
            allowed.extend(["base.coeff".into(), "base.exponent".into()]);
            Ok(KernelForm::Power {
                coeff: required(m.f64("base.coeff")?, "base.coeff")?,
                exponent: required(m.f64("base.exponent")?, "base.exponent")?,
            })
        }
        "loglog" => {
            allowed.push("base.a".into());
            Ok(KernelForm::LogLog {
                a: required(m.f64("base.a")?, "base.a")?,
            })
        }
        "table" => {
            let table = m.section("base.table");
            let mut t = Vec::new();
            for i in 1.. {
                match table.f64(&i.to_string())? {
                    Some(w) => t.push(w),
                    None => break,
                }
            }
            if t.len() != table.keys().count() {
                return Err(invalid("table entries must be numbered 1..=K without gaps"));
            }
            allowed.extend((1..=t.len()).map(|i| format!("base.table.{i}")));
            Ok(KernelForm::Table(t))
        }
        other => Err(invalid(format!("unknown base kernel `{other}`"))),
    }
}

impl Kernel {
    /// A single explicit kernel: `λ = 1` on the scaled family of `form`.
    pub fn from_form(params: LatticeParams, form: KernelForm) -> Result<Self> {
        KernelFamily::new(params, FamilyKind::Scaled(form))?.at(1.0)
    }

    pub fn params(&self) -> &LatticeParams {
        &self.family.params
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `J(L^k)` for `1 ≤ k ≤ n`.
    pub fn eval(&self, k: u32) -> Result<f64> {
        let n = self.params().n();
        if k < 1 || k > n {
            return Err(Error::ScaleOutOfRange { scale: k, max: n });
        }
        Ok(self.weight(k))
    }

    /// `J(L^k)` for any `k ≥ 1`.
    pub fn weight(&self, k: u32) -> f64 {
        self.family.weight(self.lambda, k)
    }

    /// Edge-open probability `1 − exp(−J(L^k))` for any `k ≥ 1`.
    pub fn open_probability(&self, k: u32) -> f64 {
        -(-self.weight(k)).exp_m1()
    }

    /// Weight carried by the annulus at scale `j`: `(L^{jd} − L^{(j−1)d}) J(L^j)`.
    pub fn annulus_sum(&self, j: u32) -> f64 {
        let w = self.weight(j);
        if w == 0.0 {
            0.0
        } else {
            shell(self.params().base() as f64, j) * w
        }
    }

    /// `Σ_{j>m} (L^{jd} − L^{(j−1)d}) J(L^j)`.
    pub fn tail_sum(&self, m: u32) -> Result<f64> {
        let p = self.family.pieces(self.lambda);
        let b = self.params().base() as f64;
        let mut total = 0.0;
        let mut from = m;
        if let Some((k1, v)) = p.short {
            if m < k1 && v != 0.0 {
                total += v * (b.powi(k1 as i32) - b.powi(m as i32));
            }
            from = from.max(k1);
        }
        if p.factor != 0.0 {
            total += p.factor * p.long.tail(self.params(), from)?;
        }
        if !total.is_finite() {
            return Err(Error::NotIntegrable("tail sum is not finite".into()));
        }
        Ok(total)
    }

    pub fn critical_size(&self, m: u32) -> Result<CriticalSize> {
        let t = self.tail_sum(m)?;
        if t > 0.0 {
            return Ok(CriticalSize::Finite(1.0 / t));
        }
        let p = self.family.pieces(self.lambda);
        let unbounded = p.factor > 0.0
            && match p.long.as_ref() {
                KernelForm::Power { coeff, .. } => *coeff > 0.0,
                KernelForm::LogLog { a } => *a > 0.0,
                KernelForm::Table(_) => false,
            };
        Ok(if unbounded {
            CriticalSize::Finite(f64::INFINITY)
        } else {
            CriticalSize::Infinite
        })
    }

    /// Regularity constant over the eventual window `n ≤ horizon`.
    pub fn regular_constant(&self, horizon: u32) -> Result<f64> {
        let mut ratios = Vec::new();
        for n in 0..=horizon {
            let t = self.tail_sum(n)?;
            if t == 0.0 {
                continue;
            }
            let a = self.annulus_sum(n + 1);
            ratios.push(if a > 0.0 { t / a } else { f64::INFINITY });
        }
        let start = ratios
            .iter()
            .rposition(|r| r.is_infinite())
            .map_or(0, |i| i + 1);
        if start == ratios.len() && !ratios.is_empty() {
            return Ok(f64::INFINITY);
        }
        Ok(ratios[start..].iter().copied().fold(0.0, f64::max))
    }

    /// `limsup L^{−d} J(e) |e|^{2d} / log log|e|`.
    pub fn beta(&self, horizon: u32) -> Beta {
        let p = self.family.pieces(self.lambda);
        let d = self.params().d() as f64;
        match p.long.as_ref() {
            KernelForm::LogLog { a } => Beta {
                value: p.factor * a,
                exact: true,
            },
            KernelForm::Power { coeff, exponent } => {
                let value = if p.factor * coeff == 0.0 || *exponent >= 2.0 * d {
                    0.0
                } else {
                    f64::INFINITY
                };
                Beta { value, exact: true }
            }
            KernelForm::Table(_) => {
                let l = self.params().l() as f64;
                let b = self.params().base() as f64;
                let value = ((horizon / 2).max(1)..=horizon.max(1))
                    .filter(|&k| loglog(l, k) > 0.0)
                    .map(|k| self.weight(k) * b.powf(2.0 * k as f64 - 1.0) / loglog(l, k))
                    .fold(0.0, f64::max);
                Beta {
                    value,
                    exact: false,
                }
            }
        }
    }

    /// Standalone descriptor: lattice, `λ` and the family block.
    pub fn to_text(&self) -> String {
        let mut m = self.family.to_kv();
        let p = self.params();
        m.insert("L", p.l().to_string());
        m.insert("d", p.d().to_string());
        m.insert("n", p.n().to_string());
        m.insert("lambda", fmt_f64(self.lambda));
        m.render()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let m = KvMap::parse(text)?;
        let get = |k: &str| m.u32(k).and_then(|v| required(v, k));
        let params = LatticeParams::new(get("L")?, get("d")?, get("n")?)?;
        let lambda = required(m.f64("lambda")?, "lambda")?;
        KernelFamily::from_kv(params, &m, &["L", "d", "n", "lambda"])?.at(lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(l: u32, d: u32, n: u32) -> LatticeParams {
        LatticeParams::new(l, d, n).unwrap()
    }

    #[test]
    fn power_tail_closed_form() {
        // J(L^j) = L^{1−2j} on d = 1 has tail L^{−m}.
        let k = Kernel::from_form(
            p(2, 1, 10),
            KernelForm::Power {
                coeff: 2.0,
                exponent: 2.0,
            },
        )
        .unwrap();
        for m in 0..10 {
            let want = 2f64.powi(-(m as i32));
            assert!((k.tail_sum(m).unwrap() - want).abs() <= 1e-14 * want);
        }
    }

    #[test]
    fn non_integrable_power_is_rejected() {
        let k = Kernel::from_form(
            p(2, 1, 5),
            KernelForm::Power {
                coeff: 1.0,
                exponent: 1.0,
            },
        )
        .unwrap();
        assert!(matches!(k.tail_sum(0), Err(Error::NotIntegrable(_))));
    }

    #[test]
    fn zero_tail_gives_infinite_critical_size() {
        let k = Kernel::from_form(p(2, 1, 5), KernelForm::Table(vec![0.5, 0.25])).unwrap();
        assert_eq!(k.critical_size(2).unwrap(), CriticalSize::Infinite);
        assert!(
            matches!(k.critical_size(1).unwrap(), CriticalSize::Finite(f) if (f - 2.0).abs() < 1e-15)
        );
    }

    #[test]
    fn loglog_clips_small_scales() {
        let f = KernelFamily::new(p(2, 1, 8), FamilyKind::LogLogCritical { a: 2.0 }).unwrap();
        assert_eq!(f.weight(1.0, 1), 0.0);
        assert!(f.weight(1.0, 2) > 0.0);
    }

    #[test]
    fn short_range_scales() {
        assert_eq!(scale_below(2, 4, false), 2);
        assert_eq!(scale_below(2, 4, true), 1);
        assert_eq!(scale_below(2, 1, false), 0);
        assert_eq!(scale_below(3, 26, false), 2);
    }

    #[test]
    fn beta_closed_forms() {
        let f = KernelFamily::new(p(2, 1, 8), FamilyKind::LogLogCritical { a: 2.0 }).unwrap();
        assert_eq!(
            f.at(1.5).unwrap().beta(40),
            Beta {
                value: 3.0,
                exact: true
            }
        );
        let k = Kernel::from_form(
            p(2, 1, 8),
            KernelForm::Power {
                coeff: 1.0,
                exponent: 3.0,
            },
        )
        .unwrap();
        assert_eq!(k.beta(40).value, 0.0);
    }

    #[test]
    fn descriptor_round_trip() {
        let f = KernelFamily::new(
            p(3, 2, 4),
            FamilyKind::ShortRangeCutoff {
                base: KernelForm::Table(vec![0.1, 1e-20, 0.3]),
                n1: 9,
            },
        )
        .unwrap();
        let k = f.at(0.7).unwrap();
        let back = Kernel::from_text(&k.to_text()).unwrap();
        assert_eq!(back, k);
    }

    #[test]
    fn unknown_descriptor_key_rejected() {
        let text = "L = 2\nd = 1\nn = 3\nlambda = 1\nkind = loglog-critical\na = 2\nN0 = 1\n";
        assert!(Kernel::from_text(text).is_err());
    }
}
