//! The bad-block probability recursion of the single-threshold scheme.

use serde::Serialize;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Serialize)]
pub struct BmReport {
    pub l: u32,
    pub a: f64,
    pub m0: u64,
    /// `(m, b_m)` for `m = M..=m_max`.
    pub values: Vec<(u64, f64)>,
    /// `b_m ≤ m^{−7}` for every listed `m`.
    pub verdict: bool,
    pub first_failure: Option<u64>,
}

impl BmReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,b_m,target,holds\n");
        for &(m, b) in &self.values {
            let t = (m as f64).powi(-7);
            out.push_str(&format!(
                "{m},{},{},{}\n",
                crate::kv::fmt_f64(b),
                crate::kv::fmt_f64(t),
                b <= t
            ));
        }
        out
    }
}

/// Iterates `b_{m+1} = L²(m+1)⁴ b_m² + (m+1)² L³ m^{−a/(10L)}` from `b_M`.
pub fn bm_recursion(l: u32, a: f64, m0: u64, b0: f64, m_max: u64) -> Result<BmReport> {
    if l < 2 || m0 < 1 || m_max < m0 || !(a >= 0.0) || !(b0 >= 0.0) {
        return Err(invalid("need L ≥ 2, 1 ≤ M ≤ m_max, a ≥ 0 and b_M ≥ 0"));
    }
    let lf = l as f64;
    let mut values = Vec::with_capacity((m_max - m0 + 1) as usize);
    let mut b = b0;
    let mut first_failure = None;
    for m in m0..=m_max {
        if first_failure.is_none() && !(b <= (m as f64).powi(-7)) {
            first_failure = Some(m);
        }
        values.push((m, b));
        let mf = m as f64;
        let m1 = mf + 1.0;
        b = lf * lf * m1.powi(4) * b * b + m1 * m1 * lf.powi(3) * mf.powf(-a / (10.0 * lf));
    }
    Ok(BmReport {
        l,
        a,
        m0,
        values,
        verdict: first_failure.is_none(),
        first_failure,
    })
}
