//! Series (swapping) and parallel (concentration) rules of the Gaussian DET scheme.
//!
//! Rules are evaluated in the bounded `chi` domain. The parallel rule for links
//! `chi_1..chi_K` with maximum `m` reads
//! `chi^2 / (1 - chi^2) = eta_p^2 m^2 / prod(1 - chi_i^2)`,
//! which is `sinh r = eta_p sinh r_max prod cosh r_k` in squeezing variables.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, domain, Error, Result};
use crate::measures::SqueezingParameter;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleParams {
    pub eta_s: f64,
    pub eta_p: f64,
}

impl RuleParams {
    pub const STANDARD: Self = Self {
        eta_s: 1.0,
        eta_p: 1.0,
    };

    pub fn new(eta_s: f64, eta_p: f64) -> Result<Self> {
        if !(eta_s > 0.0 && eta_p > 0.0) || !eta_s.is_finite() || !eta_p.is_finite() {
            return Err(domain(format!(
                "rule parameters must be positive: eta_s={eta_s}, eta_p={eta_p}"
            )));
        }
        Ok(Self { eta_s, eta_p })
    }
}

impl Default for RuleParams {
    fn default() -> Self {
        Self::STANDARD
    }
}

/// Non-fatal diagnostics for generalized rules outside their trusted range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleWarning {
    /// Series output exceeds its smallest input.
    SeriesNotMonotone { chi: f64, min_input: f64 },
    /// Parallel output fell below its largest input.
    ParallelNotMonotone { chi: f64, max_input: f64 },
}

/// `1 - x^2` without cancellation near `x = 1`.
#[inline]
pub(crate) fn one_minus_sq(x: f64) -> f64 {
    (1.0 - x) * (1.0 + x)
}

fn check_eta(name: &str, eta: f64) -> Result<()> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(domain(format!("{name} = {eta} must be positive")));
    }
    Ok(())
}

pub fn series_combine_checked(chis: &[f64], eta_s: f64) -> Result<(f64, Option<RuleWarning>)> {
    check_eta("eta_s", eta_s)?;
    if chis.is_empty() {
        return Err(domain("series rule needs at least one link"));
    }
    for &c in chis {
        check_unit("chi", c)?;
    }
    let chi = eta_s * chis.iter().product::<f64>();
    if chi > 1.0 {
        return Err(Error::Range(format!(
            "generalized series rule gives chi = {chi} > 1 (eta_s = {eta_s})"
        )));
    }
    let min_input = chis.iter().copied().fold(f64::INFINITY, f64::min);
    let warning = (chi > min_input).then_some(RuleWarning::SeriesNotMonotone { chi, min_input });
    Ok((chi, warning))
}

/// `eta_s * prod(chi_i)`.
pub fn series_combine(chis: &[f64], eta_s: f64) -> Result<f64> {
    let (chi, w) = series_combine_checked(chis, eta_s)?;
    if let Some(w) = w {
        log::warn!("{w:?}");
    }
    Ok(chi)
}

pub fn parallel_combine_checked(chis: &[f64], eta_p: f64) -> Result<(f64, Option<RuleWarning>)> {
    check_eta("eta_p", eta_p)?;
    if chis.is_empty() {
        return Err(domain("parallel rule needs at least one link"));
    }
    for &c in chis {
        check_unit("chi", c)?;
    }
    // first index wins ties; the value is the same either way
    let mut m = chis[0];
    for &c in &chis[1..] {
        if c > m {
            m = c;
        }
    }
    if m >= 1.0 {
        return Ok((1.0, None));
    }
    let prod: f64 = chis.iter().map(|&c| one_minus_sq(c)).product();
    let em = eta_p * m;
    let chi = if em == 0.0 {
        0.0
    } else {
        em / (em * em + prod).sqrt()
    };
    let warning = (chi < m).then_some(RuleWarning::ParallelNotMonotone { chi, max_input: m });
    Ok((chi, warning))
}

/// Concentrates all links at once, largest link in the `sinh` slot.
pub fn parallel_combine(chis: &[f64], eta_p: f64) -> Result<f64> {
    let (chi, w) = parallel_combine_checked(chis, eta_p)?;
    if let Some(w) = w {
        log::warn!("{w:?}");
    }
    Ok(chi)
}

/// Parallel rule for `k` identical links: `eta x / sqrt(eta^2 x^2 + (1 - x^2)^k)`.
pub fn parallel_uniform(x: f64, k: u32, eta_p: f64) -> f64 {
    if x >= 1.0 {
        return 1.0;
    }
    let ex = eta_p * x;
    if ex == 0.0 {
        return 0.0;
    }
    ex / (ex * ex + one_minus_sq(x).powi(k as i32)).sqrt()
}

const LN_2: f64 = std::f64::consts::LN_2;

/// `ln sinh r`, finite for all `r > 0`.
fn ln_sinh(r: f64) -> f64 {
    if r == 0.0 {
        return f64::NEG_INFINITY;
    }
    r + (-(-2.0 * r).exp_m1()).ln() - LN_2
}

/// `ln cosh r`, finite for all `r >= 0`.
fn ln_cosh(r: f64) -> f64 {
    r + (-2.0 * r).exp().ln_1p() - LN_2
}

/// Inverse of [`ln_sinh`].
fn r_from_ln_sinh(l: f64) -> f64 {
    if l == f64::NEG_INFINITY {
        0.0
    } else if l > 350.0 {
        l + LN_2
    } else {
        l.exp().asinh()
    }
}

fn check_squeezings(rs: &[f64]) -> Result<()> {
    if rs.is_empty() {
        return Err(domain("concentration needs at least one state"));
    }
    for &r in rs {
        SqueezingParameter::new(r)?;
    }
    Ok(())
}

/// Optimal concentration of several TMSVSs.
///
/// Returns `r` with `sinh r = sinh r_max prod_{others} cosh r_k` and the witness order
/// (indices by decreasing squeezing, first index on ties).
pub fn optimal_parallel_order(rs: &[f64]) -> Result<(SqueezingParameter, Vec<usize>)> {
    check_squeezings(rs)?;
    let mut order: Vec<usize> = (0..rs.len()).collect();
    order.sort_by(|&a, &b| rs[b].total_cmp(&rs[a]));
    if rs[order[0]].is_infinite() {
        return Ok((SqueezingParameter::INFINITE, order));
    }
    let l = ln_sinh(rs[order[0]]) + order[1..].iter().map(|&i| ln_cosh(rs[i])).sum::<f64>();
    Ok((SqueezingParameter::new(r_from_ln_sinh(l))?, order))
}

/// Two-by-two concentration in the given order.
///
/// The running state is merged with the next state using the better of the two slot
/// assignments, `sinh r = max(sinh a cosh b, cosh a sinh b)`.
pub fn iterated_concentration(rs: &[f64], order: &[usize]) -> Result<SqueezingParameter> {
    check_squeezings(rs)?;
    let mut seen = vec![false; rs.len()];
    if order.len() != rs.len()
        || order
            .iter()
            .any(|&i| i >= rs.len() || std::mem::replace(&mut seen[i], true))
    {
        return Err(domain("order must be a permutation of the state indices"));
    }
    if rs.iter().any(|r| r.is_infinite()) {
        return Ok(SqueezingParameter::INFINITE);
    }
    let mut acc = rs[order[0]];
    for &i in &order[1..] {
        let b = rs[i];
        let l = (ln_sinh(acc) + ln_cosh(b)).max(ln_cosh(acc) + ln_sinh(b));
        acc = r_from_ln_sinh(l);
    }
    SqueezingParameter::new(acc)
}
