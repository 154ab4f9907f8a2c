//! Scale schedules for the two renormalization schemes.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::Serialize;

use crate::error::{Error, Result};

/// Exact rationals are produced up to this many terms of `Σ 1/k²`.
pub const EXACT_THETA_TERMS: u64 = 256;

/// `L^r` as a `u128`, saturating.
fn pow_sat(l: u64, r: u32) -> u128 {
    (l as u128).checked_pow(r).unwrap_or(u128::MAX)
}

/// Smallest `r` with `m² ≤ L^r`; then automatically `L^r < L·m²`.
fn r_of(l: u64, m: u64) -> u32 {
    let target = (m as u128) * (m as u128);
    let mut r = 0;
    while pow_sat(l, r) < target {
        r += 1;
    }
    r
}

/// `Σ_{k ≥ m} 1/k²` via a direct head and an Euler–Maclaurin tail.
fn zeta2_tail(m: u64) -> f64 {
    let cut = m.max(1) + 64;
    let head: f64 = (m.max(1)..cut)
        .rev()
        .map(|k| 1.0 / (k as f64 * k as f64))
        .sum();
    let n = cut as f64;
    head + 1.0 / n + 1.0 / (2.0 * n * n) + 1.0 / (6.0 * n * n * n)
}

/// `θ_m = 1 − Σ_{k=M}^m k^{−2}`, `r_m` with `m² ≤ L^{r_m} < L m²` and
/// `R_m = M + Σ_{i=M}^m r_i`.
#[derive(Debug, Clone, Serialize)]
pub struct ScheduleSimple {
    pub l: u32,
    pub m0: u64,
    /// Built without checking the admissibility constraints.
    pub unchecked: bool,
}

impl ScheduleSimple {
    /// Requires `M² ≥ 2^{14}`, `M > L²` and `1 − Σ_{m≥M} m^{−2} ≥ 0.9`.
    pub fn new(l: u32, m0: u64) -> Result<Self> {
        let s = Self::new_unchecked(l, m0)?;
        let fails = s.violations();
        if !fails.is_empty() {
            return Err(Error::Schedule(fails.join("; ")));
        }
        Ok(s)
    }

    /// Desk-scale schedule: constraints are reported, not enforced.
    pub fn new_unchecked(l: u32, m0: u64) -> Result<Self> {
        if l < 2 || m0 < 1 {
            return Err(Error::Schedule("need L ≥ 2 and M ≥ 1".into()));
        }
        Ok(Self {
            l,
            m0,
            unchecked: true,
        }
        .mark())
    }

    fn mark(mut self) -> Self {
        self.unchecked = !self.violations().is_empty();
        self
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if (self.m0 as u128).pow(2) < 1 << 14 {
            v.push(format!("M² = {} < 2^14", (self.m0 as u128).pow(2)));
        }
        if self.m0 <= (self.l as u64).pow(2) {
            v.push(format!("M = {} ≤ L²", self.m0));
        }
        if 1.0 - zeta2_tail(self.m0) < 0.9 {
            v.push("1 − Σ_{m≥M} 1/m² < 0.9".into());
        }
        v
    }

    fn check(&self, m: u64) -> Result<()> {
        if m < self.m0 {
            return Err(Error::Schedule(format!("index {m} below M = {}", self.m0)));
        }
        Ok(())
    }

    pub fn theta(&self, m: u64) -> Result<f64> {
        self.check(m)?;
        // Smallest terms first.
        let s: f64 = (self.m0..=m)
            .rev()
            .map(|k| 1.0 / (k as f64 * k as f64))
            .sum();
        Ok(1.0 - s)
    }

    /// `θ_m` as an exact rational, for `m − M < EXACT_THETA_TERMS`.
    pub fn theta_exact(&self, m: u64) -> Result<Option<BigRational>> {
        self.check(m)?;
        if m - self.m0 >= EXACT_THETA_TERMS {
            return Ok(None);
        }
        let mut t = BigRational::one();
        for k in self.m0..=m {
            t -= BigRational::new(BigInt::one(), BigInt::from(k) * BigInt::from(k));
        }
        Ok(Some(t))
    }

    pub fn r(&self, m: u64) -> Result<u32> {
        self.check(m)?;
        Ok(r_of(self.l as u64, m))
    }

    #[allow(non_snake_case)]
    pub fn R(&self, m: u64) -> Result<u64> {
        self.check(m)?;
        Ok(self.m0
            + (self.m0..=m)
                .map(|i| r_of(self.l as u64, i) as u64)
                .sum::<u64>())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FullParams {
    /// Base of the flattened lattice.
    pub l: u32,
    pub a: f64,
    #[serde(rename = "N")]
    pub n_cap: u32,
    pub eps: f64,
    pub zeta: f64,
    pub theta: f64,
    pub r: u32,
}

impl FullParams {
    pub fn a_star(&self) -> f64 {
        1.0 + (self.a - 1.0) / 2.0
    }

    /// Violated admissibility constraints, as readable strings.
    pub fn violations(&self) -> Vec<String> {
        let (l, n) = (self.l as f64, self.n_cap as f64);
        let mut v = Vec::new();
        if self.a <= 1.0 {
            v.push("a ≤ 1".into());
        }
        if n * self.eps <= 10.0 {
            v.push("N·ε ≤ 10".into());
        }
        if (1.0 - self.zeta).powi(4) * self.theta.powi(2) * self.a <= self.a_star() {
            v.push("(1−ζ)⁴θ²a ≤ a*".into());
        }
        if 4.0 * n * l.powf(-(self.r as f64) / 2.0) >= 0.5 {
            v.push("4N L^{−r/2} ≥ 0.5".into());
        }
        if 3.0 * n * l.powi(-(self.r as i32)) >= self.zeta {
            v.push("3N L^{−r} ≥ ζ".into());
        }
        if !(self.zeta > 0.0 && self.zeta < 0.01) {
            v.push("ζ ∉ (0, 0.01)".into());
        }
        if !(self.theta > 0.99 && self.theta < 1.0) {
            v.push("θ ∉ (0.99, 1)".into());
        }
        v
    }

    /// Hypotheses of the deterministic density bounds that do not depend
    /// on the generation: `3N L^{−r} < ζ < 1`.
    pub fn deterministic_core(&self) -> bool {
        3.0 * self.n_cap as f64 * (self.l as f64).powi(-(self.r as i32)) < self.zeta
            && self.zeta < 1.0
    }
}

/// Smallest multiple of `r` with `log(g)^{10} g ≤ L^{r̄}`.
pub fn rbar_of(l: u32, r: u32, g: u64) -> u32 {
    let target = (g as f64).ln().powi(10) * g as f64;
    let step = (l as f64).powi(r as i32);
    let mut x = 1.0;
    let mut rbar = 0;
    while x < target {
        x *= step;
        rbar += r;
    }
    rbar
}

/// Generations `g0..=g_max` with levels `M_g`, increments `r̄_g` and
/// thresholds `θ_g`.
#[derive(Debug, Clone, Serialize)]
pub struct ScheduleFull {
    pub params: FullParams,
    pub g0: u64,
    /// `M_g` for `g = g0..=g_max`.
    pub levels: Vec<u64>,
    /// `θ_g` for `g = g0..=g_max`.
    pub thetas: Vec<f64>,
    /// Bound on the accumulated rounding error of `θ_g`.
    pub theta_error: f64,
    /// Built from explicit overrides or with violated constraints.
    pub unchecked: bool,
    pub violations: Vec<String>,
}

impl ScheduleFull {
    /// Admissible schedule with `r̄_g` and `M_g` from their definitions.
    /// `g0 = None` picks the smallest admissible `g0` found by search.
    pub fn new(params: FullParams, g0: Option<u64>, g_max_offset: u64) -> Result<Self> {
        let fails = params.violations();
        if !fails.is_empty() {
            return Err(Error::Schedule(fails.join("; ")));
        }
        let g0 = match g0 {
            Some(g) => g,
            None => find_g0(&params)?,
        };
        if let Some(why) = g0_failure(&params, g0) {
            return Err(Error::Schedule(format!("g0 = {g0}: {why}")));
        }
        let mut level = params.r as u64;
        for m in 2..=g0 {
            level += rbar_of(params.l, params.r, m) as u64;
        }
        let rbars: Vec<u32> = (g0 + 1..=g0 + g_max_offset)
            .map(|g| rbar_of(params.l, params.r, g))
            .collect();
        let s = Self::build(params, g0, level, &rbars, false)?;
        if s.theta_error > 1e-9 * params.theta {
            return Err(Error::Schedule("θ_g rounding error above 1e-9·θ".into()));
        }
        Ok(s)
    }

    /// Desk-scale schedule from explicit `M_{g0}` and `r̄_{g0+1}, r̄_{g0+2}, …`.
    pub fn with_overrides(
        params: FullParams,
        g0: u64,
        base_level: u64,
        rbars: &[u32],
    ) -> Result<Self> {
        if g0 < 2 {
            return Err(Error::Schedule("g0 must be at least 2".into()));
        }
        if params.r == 0 || rbars.iter().any(|&x| x == 0 || x % params.r != 0) {
            return Err(Error::Schedule(
                "r̄ overrides must be positive multiples of r".into(),
            ));
        }
        Self::build(params, g0, base_level, rbars, true)
    }

    fn build(
        params: FullParams,
        g0: u64,
        base_level: u64,
        rbars: &[u32],
        overridden: bool,
    ) -> Result<Self> {
        let mut levels = vec![base_level];
        let mut thetas = vec![1.0];
        let l = params.l as f64;
        let n2 = 2.0 * params.n_cap as f64;
        // Neumaier-compensated running sum of the decrements.
        let (mut sum, mut comp, mut err) = (0.0f64, 0.0f64, 0.0f64);
        for (i, &rb) in rbars.iter().enumerate() {
            let g = g0 + i as u64;
            let lg = (g as f64).ln();
            let term = n2
                * (lg.powi(3) * l.powi(-(rb as i32))
                    + lg.powi(5) * (g as f64).powf(-1.0 - params.eps));
            let t = sum + term;
            comp += if sum.abs() >= term.abs() {
                (sum - t) + term
            } else {
                (term - t) + sum
            };
            sum = t;
            err += 16.0 * f64::EPSILON * term.abs();
            levels.push(levels.last().unwrap() + rb as u64);
            thetas.push(1.0 - (sum + comp));
        }
        err += 2.0 * f64::EPSILON * (rbars.len() as f64 + 1.0);
        let mut violations = params.violations();
        if let Some(why) = g0_failure(&params, g0) {
            violations.push(why);
        }
        Ok(Self {
            params,
            g0,
            levels,
            thetas,
            theta_error: err,
            unchecked: overridden || !violations.is_empty(),
            violations,
        })
    }

    pub fn g_max(&self) -> u64 {
        self.g0 + self.levels.len() as u64 - 1
    }

    fn idx(&self, g: u64) -> Result<usize> {
        if g < self.g0 || g > self.g_max() {
            return Err(Error::Schedule(format!(
                "generation {g} outside {}..={}",
                self.g0,
                self.g_max()
            )));
        }
        Ok((g - self.g0) as usize)
    }

    /// `M_g`.
    pub fn level(&self, g: u64) -> Result<u64> {
        Ok(self.levels[self.idx(g)?])
    }

    /// `r̄_g` for `g0 < g ≤ g_max`.
    pub fn rbar(&self, g: u64) -> Result<u32> {
        let i = self.idx(g)?;
        if i == 0 {
            return Err(Error::Schedule("r̄ is defined above g0 only".into()));
        }
        Ok((self.levels[i] - self.levels[i - 1]) as u32)
    }

    pub fn theta(&self, g: u64) -> Result<f64> {
        Ok(self.thetas[self.idx(g)?])
    }

    /// Generation whose range `[M_g, M_{g+1})` holds `level`, if any.
    pub fn generation_of(&self, level: u64) -> Option<u64> {
        let i = self.levels.partition_point(|&m| m <= level);
        (i > 0 && i < self.levels.len()).then(|| self.g0 + i as u64 - 1)
    }

    /// Whether `level` is on the classification grid `M_g + j r`.
    pub fn on_grid(&self, level: u64) -> bool {
        let base = self.levels[0];
        level >= base
            && level <= *self.levels.last().unwrap()
            && (level - base).is_multiple_of(self.params.r as u64)
    }

    /// Number of defect levels feeding rule 2 at the end of generation `g`,
    /// i.e. `r̄_g / r`, and whether it is at most `log(g)²`.
    pub fn defect_count_ok(&self, g: u64) -> bool {
        match self.rbar(g) {
            Ok(rb) => (rb / self.params.r) as f64 <= (g as f64).ln().powi(2),
            Err(_) => true,
        }
    }
}

/// Why `g0` is not admissible, checked on `g0..g0+4096` plus an integral tail.
fn g0_failure(p: &FullParams, g0: u64) -> Option<String> {
    if g0 < 2 {
        return Some("g0 < 2".into());
    }
    let l = p.l as f64;
    let n2 = 2.0 * p.n_cap as f64;
    let horizon = 4096;
    let mut sum = 0.0;
    for g in g0..g0 + horizon {
        let rb = rbar_of(p.l, p.r, g + 1);
        if rb as f64 > (g as f64).ln().powi(2) {
            return Some(format!("r̄_{} = {rb} > log({g})²", g + 1));
        }
        let lg = (g as f64).ln();
        sum +=
            n2 * (lg.powi(3) * l.powi(-(rb as i32)) + lg.powi(5) * (g as f64).powf(-1.0 - p.eps));
    }
    // Σ_{g ≥ G} log(g)^5 g^{−1−ε} ≤ ∫_{G−1}^∞, bounded by a crude closed form;
    // the first term decays faster and is absorbed by doubling.
    let big_g = (g0 + horizon) as f64;
    let tail = 2.0 * n2 * big_g.ln().powi(5) * (big_g - 1.0).powf(-p.eps) / p.eps * 32.0;
    if 1.0 - sum - tail < p.theta {
        return Some("θ_g drops below θ".into());
    }
    None
}

fn find_g0(p: &FullParams) -> Result<u64> {
    let mut g = 2u64;
    while g < 1 << 40 {
        if g0_failure(p, g).is_none() {
            // Walk back down to the smallest admissible value.
            let mut lo = g / 2;
            let mut hi = g;
            while lo + 1 < hi {
                let mid = (lo + hi) / 2;
                if g0_failure(p, mid).is_none() {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(hi);
        }
        g *= 2;
    }
    Err(Error::Schedule("no admissible g0 below 2^40".into()))
}

/// `θ` as `f64` from an exact rational.
pub fn rational_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_schedule_first_values() {
        let s = ScheduleSimple::new(2, 128).unwrap();
        assert!(!s.unchecked);
        let t = s.theta_exact(128).unwrap().unwrap();
        assert_eq!(t, BigRational::new(16383.into(), 16384.into()));
        assert_eq!(s.r(128).unwrap(), 14);
        assert_eq!(s.r(129).unwrap(), 15);
        assert_eq!(s.R(128).unwrap(), 142);
    }

    #[test]
    fn small_m_is_rejected_unless_unchecked() {
        assert!(ScheduleSimple::new(2, 4).is_err());
        let s = ScheduleSimple::new_unchecked(2, 4).unwrap();
        assert!(s.unchecked);
        assert_eq!(s.R(4).unwrap(), 8);
        assert_eq!(s.R(5).unwrap(), 13);
    }

    #[test]
    fn rbar_brackets_target() {
        for g in 3..200u64 {
            let rb = rbar_of(2, 3, g);
            let t = (g as f64).ln().powi(10) * g as f64;
            assert_eq!(rb % 3, 0);
            assert!(2f64.powi(rb as i32) >= t);
            assert!(2f64.powi(rb as i32) < 8.0 * t);
        }
    }

    #[test]
    fn override_thetas() {
        let p = FullParams {
            l: 2,
            a: 3.0,
            n_cap: 1,
            eps: 2.0,
            zeta: 0.4,
            theta: 0.7,
            r: 3,
        };
        let s = ScheduleFull::with_overrides(p, 2, 3, &[3, 6]).unwrap();
        assert_eq!(s.levels, vec![3, 6, 12]);
        let ln2 = 2f64.ln();
        let want3 = 1.0 - 2.0 * (ln2.powi(3) / 8.0 + ln2.powi(5) / 8.0);
        assert!((s.theta(3).unwrap() - want3).abs() < 1e-15);
        assert_eq!(s.generation_of(7), Some(3));
        assert_eq!(s.generation_of(12), None);
        assert!(s.on_grid(9) && !s.on_grid(10));
        assert!(s.unchecked);
    }
}
