//! NegPT on the Bethe lattice.
//!
//! The source is the root of a degree-`k` tree and the target is its boundary at depth `l`.
//! A branch value satisfies `x_l = para_{k-1}(chi * x_{l-1})`, and the root combines `k`
//! branches. In the infinite-depth limit the fixed point is written in
//! `v = 1 - u`, with `u` the squared single-branch value, as `v - v^{k-1} = 1 - chi^2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::det_rules::{parallel_uniform, RuleParams};
use crate::error::{check_unit, domain, Error, Result};
use crate::solve::{bisect, linspace, logspace};

pub const DEFAULT_CROSSING: f64 = 0.5;
pub const DEPTH_CAP: u64 = 1_000_000;
pub const SECOND_DIFF_STEP: f64 = 1e-4;
pub const RICHARDSON_LIMIT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Depth {
    Finite(u64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BetheSpec {
    pub k: u32,
    pub depth: Depth,
}

impl BetheSpec {
    pub fn new(k: u32, depth: Depth) -> Result<Self> {
        check_k(k)?;
        if depth == Depth::Finite(0) {
            return Err(domain("depth must be >= 1"));
        }
        Ok(Self { k, depth })
    }

    pub fn sponge(&self, chi: f64) -> Result<f64> {
        match self.depth {
            Depth::Finite(l) => finite_depth_sponge(self.k, l, chi),
            Depth::Infinite => infinite_sponge(self.k, chi),
        }
    }

    /// Sponge-crossing values over a `chi` grid, evaluated in parallel.
    pub fn scan(&self, chis: &[f64]) -> Result<Vec<f64>> {
        chis.par_iter().map(|&c| self.sponge(c)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub chi_th: f64,
    pub x_plus: f64,
    pub x1_plus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransitionKind {
    NoTransition,
    SecondOrder,
    MixedOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagnosis {
    pub kind: TransitionKind,
    pub chi_th: Option<f64>,
    pub x_plus: Option<f64>,
    pub exponent: Option<f64>,
    /// Threshold formula value when it lies outside the physical range.
    pub formal_chi_th: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

fn check_k(k: u32) -> Result<()> {
    if k < 3 {
        return Err(domain(format!("Bethe degree k = {k} must be >= 3")));
    }
    Ok(())
}

/// `T(k) = (k-1)^{-1/(k-2)}`, the branch value `v` at which the fixed point appears.
pub fn turning_point(k: u32) -> Result<f64> {
    check_k(k)?;
    Ok(((k - 1) as f64).powf(-1.0 / (k - 2) as f64))
}

pub fn critical_point(k: u32) -> Result<CriticalPoint> {
    let t = turning_point(k)?;
    let kf = k as f64;
    let chi_th = (1.0 - (kf - 1.0).powf(-(kf - 1.0) / (kf - 2.0)) * (kf - 2.0)).sqrt();
    let x_plus = ((1.0 - t) / (t.powi(k as i32) - t + 1.0)).sqrt();
    Ok(CriticalPoint {
        chi_th,
        x_plus,
        x1_plus: (1.0 - t).sqrt(),
    })
}

/// Sponge-crossing value of the depth-`l` Cayley tree.
pub fn finite_depth_sponge(k: u32, l: u64, chi: f64) -> Result<f64> {
    check_k(k)?;
    check_unit("chi", chi)?;
    if l == 0 {
        return Err(domain("depth must be >= 1"));
    }
    let mut branch = 1.0;
    let mut link = chi;
    for _ in 0..l {
        link = chi * branch;
        branch = parallel_uniform(link, k - 1, 1.0);
    }
    Ok(parallel_uniform(link, k, 1.0))
}

/// `X_SC` at depths `1..=l_max`.
pub fn depth_profile(k: u32, chi: f64, l_max: u64) -> Result<Vec<f64>> {
    check_k(k)?;
    check_unit("chi", chi)?;
    let mut out = Vec::with_capacity(l_max as usize);
    let mut branch = 1.0;
    for _ in 0..l_max {
        let link = chi * branch;
        branch = parallel_uniform(link, k - 1, 1.0);
        out.push(parallel_uniform(link, k, 1.0));
    }
    Ok(out)
}

/// Solution of the infinite-depth fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfConsistent {
    /// Physical branch `u = (X^(1))^2` in `[1 - T, 1]`, zero below threshold.
    pub u: f64,
    /// `|chi^2 - u - (1-u)^{k-1}|`.
    pub residual: f64,
    /// Smaller, decreasing-branch root when it exists.
    pub nonphysical_u: Option<f64>,
}

fn branch_h(k: u32, v: f64) -> f64 {
    v - v.powi(k as i32 - 1)
}

/// Physical `v` for target `1 - chi^2`, clamped to the turning point.
fn physical_v(k: u32, target: f64, t: f64) -> Result<f64> {
    let top = branch_h(k, t);
    if target >= top {
        return Ok(t);
    }
    if target <= 0.0 {
        return Ok(0.0);
    }
    bisect(|v| branch_h(k, v) - target, 0.0, t, 0.0)
}

pub fn self_consistent_solution(k: u32, chi: f64) -> Result<SelfConsistent> {
    let cp = critical_point(k)?;
    check_unit("chi", chi)?;
    let t = turning_point(k)?;
    let eps = 1.0 - chi;
    let target = eps * (2.0 - eps);
    let residual_at = |u: f64| (chi * chi - u - (1.0 - u).powi(k as i32 - 1)).abs();
    if chi < cp.chi_th {
        return Ok(SelfConsistent {
            u: 0.0,
            residual: residual_at(0.0),
            nonphysical_u: None,
        });
    }
    let v = physical_v(k, target, t)?;
    let nonphysical_u = if target > 0.0 && target < branch_h(k, t) {
        Some(1.0 - bisect(|v| branch_h(k, v) - target, t, 1.0, 0.0)?)
    } else {
        None
    };
    Ok(SelfConsistent {
        u: 1.0 - v,
        residual: residual_at(1.0 - v),
        nonphysical_u,
    })
}

/// `(X_SC, 1 - X_SC)` with the complement computed without cancellation.
fn infinite_pair(k: u32, chi: f64) -> Result<(f64, f64)> {
    let cp = critical_point(k)?;
    check_unit("chi", chi)?;
    if chi < cp.chi_th {
        return Ok((0.0, 1.0));
    }
    let eps = 1.0 - chi;
    let v = physical_v(k, eps * (2.0 - eps), turning_point(k)?)?;
    let u = 1.0 - v;
    let vk = v.powi(k as i32);
    let x = (u / (u + vk)).sqrt();
    Ok((x, vk / (u + vk) / (1.0 + x)))
}

/// `X_SC` for a branch value `u = (X^(1))^2`, physical or not.
pub fn sponge_from_branch(k: u32, u: f64) -> f64 {
    let vk = (1.0 - u).powi(k as i32);
    if u <= 0.0 {
        return 0.0;
    }
    (u / (u + vk)).sqrt()
}

/// Infinite-depth sponge-crossing value; zero below `chi_th`.
pub fn infinite_sponge(k: u32, chi: f64) -> Result<f64> {
    infinite_pair(k, chi).map(|p| p.0)
}

/// `1 - X_SC` at `chi = 1 - eps`.
pub fn infinite_sponge_complement(k: u32, eps: f64) -> Result<f64> {
    check_unit("eps", eps)?;
    infinite_pair(k, 1.0 - eps).map(|p| p.1)
}

/// Depth at which `X_SC(l)` first falls to `crossing`, interpolated between integer depths.
pub fn correlation_length(k: u32, chi: f64, crossing: f64) -> Result<f64> {
    let cp = critical_point(k)?;
    check_unit("chi", chi)?;
    if chi >= cp.chi_th {
        return Err(domain(format!(
            "chi = {chi} >= chi_th = {}: no drop, correlation length undefined",
            cp.chi_th
        )));
    }
    if !(crossing > 0.0 && crossing < cp.x_plus) {
        return Err(domain(format!("crossing {crossing} outside (0, x_plus)")));
    }
    let mut branch = 1.0;
    let mut prev: Option<f64> = None;
    for l in 1..=DEPTH_CAP {
        let link = chi * branch;
        branch = parallel_uniform(link, k - 1, 1.0);
        let x = parallel_uniform(link, k, 1.0);
        if x <= crossing {
            return Ok(match prev {
                None => 1.0,
                Some(p) => (l - 1) as f64 + (p - crossing) / (p - x),
            });
        }
        prev = Some(x);
    }
    Err(Error::Numeric(format!(
        "no crossing within depth cap {DEPTH_CAP}"
    )))
}

fn second_diff(k: u32, l: u64, chi: f64, h: f64) -> f64 {
    let f = |c: f64| finite_depth_sponge(k, l, c.clamp(0.0, 1.0)).unwrap_or(f64::NAN);
    (f(chi + h) - 2.0 * f(chi) + f(chi - h)) / (h * h)
}

fn inflection(k: u32, l: u64, h: f64) -> Result<f64> {
    let grid = linspace(2.0 * h, 1.0 - 2.0 * h, 4001);
    let d2: Vec<f64> = grid.iter().map(|&c| second_diff(k, l, c, h)).collect();
    let slope = |c: f64| {
        finite_depth_sponge(k, l, (c + h).min(1.0)).unwrap_or(0.0)
            - finite_depth_sponge(k, l, (c - h).max(0.0)).unwrap_or(0.0)
    };
    let bracket = (0..grid.len() - 1)
        .filter(|&i| d2[i] > 0.0 && d2[i + 1] <= 0.0)
        .max_by(|&a, &b| slope(grid[a]).total_cmp(&slope(grid[b])))
        .ok_or_else(|| Error::Numeric(format!("no inflection found for k={k}, l={l}")))?;
    bisect(
        |c| second_diff(k, l, c, h),
        grid[bracket],
        grid[bracket + 1],
        1e-14,
    )
}

/// Inflection point of `X_SC(l)` in `chi`, the finite-depth threshold.
pub fn finite_size_threshold(k: u32, l: u64) -> Result<f64> {
    check_k(k)?;
    if l < 2 {
        return Err(domain("finite-size threshold needs depth >= 2"));
    }
    let coarse = inflection(k, l, SECOND_DIFF_STEP)?;
    let fine = inflection(k, l, 0.5 * SECOND_DIFF_STEP)?;
    if (coarse - fine).abs() > RICHARDSON_LIMIT {
        log::warn!(
            "finite-size threshold k={k} l={l}: step halving moved the root by {:e}",
            (coarse - fine).abs()
        );
    }
    Ok(coarse)
}

/// Least squares of `ln y` against `ln x`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if xs.len() != ys.len() || xs.len() < 4 {
        return Err(domain("power-law fit needs >= 4 paired points"));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(domain("power-law fit needs positive finite data"));
    }
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(domain("power-law fit needs distinct x values"));
    }
    let slope = sxy / sxx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(PowerLawFit {
        exponent: slope,
        amplitude: (my - slope * mx).exp(),
        r_squared,
        window: (lo, hi),
    })
}

/// Fit of `X_SC - X^+` against `chi - chi_th` over `[1e-6, 1e-3]`.
pub fn beta_fit(k: u32) -> Result<PowerLawFit> {
    let cp = critical_point(k)?;
    let xs = logspace(1e-6, 1e-3, 30);
    let ys = xs
        .iter()
        .map(|d| infinite_sponge(k, cp.chi_th + d).map(|x| x - cp.x_plus))
        .collect::<Result<Vec<_>>>()?;
    fit_power_law(&xs, &ys)
}

/// Fit of `l*` against `chi_th - chi` over `[1e-5, 1e-2]`.
pub fn correlation_fit(k: u32, crossing: f64) -> Result<PowerLawFit> {
    let cp = critical_point(k)?;
    let xs = logspace(1e-5, 1e-2, 20);
    let ys = xs
        .par_iter()
        .map(|d| correlation_length(k, cp.chi_th - d, crossing))
        .collect::<Result<Vec<_>>>()?;
    fit_power_law(&xs, &ys)
}

/// Fit of `|chi_th(l) - chi_th|` against `l`.
pub fn shift_fit(k: u32, depths: &[u64]) -> Result<PowerLawFit> {
    let cp = critical_point(k)?;
    let ys = depths
        .par_iter()
        .map(|&l| finite_size_threshold(k, l).map(|t| (cp.chi_th - t).abs()))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = depths.iter().map(|&l| l as f64).collect();
    fit_power_law(&xs, &ys)
}

/// Fit of `1 - X_SC` against `1 - chi` over `[1e-5, 1e-2]`.
pub fn saturation_exponent(k: u32) -> Result<PowerLawFit> {
    check_k(k)?;
    let xs = logspace(1e-5, 1e-2, 25);
    let ys = xs
        .iter()
        .map(|&e| infinite_sponge_complement(k, e))
        .collect::<Result<Vec<_>>>()?;
    fit_power_law(&xs, &ys)
}

/// Branch-equation minimum `F = (eta_p^2 / (k-1))^{1/(k-2)}`, capped at 1.
fn generalized_vmax(k: u32, eta_p: f64) -> f64 {
    (eta_p * eta_p / (k - 1) as f64)
        .powf(1.0 / (k - 2) as f64)
        .min(1.0)
}

/// `G(v) = eta_p^2 (1 - v) + v^{k-1}`, equal to `(eta_s eta_p chi)^2` at the fixed point.
fn generalized_g(k: u32, eta_p: f64, v: f64) -> f64 {
    eta_p * eta_p * (1.0 - v) + v.powi(k as i32 - 1)
}

fn generalized_root(k: u32, eta_p: f64, v: f64) -> f64 {
    let e4u = eta_p.powi(4) * (1.0 - v);
    if e4u == 0.0 {
        return 0.0;
    }
    (e4u / (v.powi(k as i32) + e4u)).sqrt()
}

/// Phase of the generalized-rule Bethe lattice.
///
/// The mixed-order case follows the turning point of the branch equation. In the
/// second-order case the threshold is where the trivial branch `u = 0` meets
/// `G(1) = 1`, i.e. `chi_th = 1 / (eta_s eta_p)`.
pub fn generalized_phase_classify(k: u32, params: RuleParams) -> Result<PhaseDiagnosis> {
    check_k(k)?;
    let RuleParams { eta_s, eta_p } = RuleParams::new(params.eta_s, params.eta_p)?;
    let kf = k as f64;
    let crit = (kf - 1.0).sqrt();
    let none = |formal: f64| PhaseDiagnosis {
        kind: TransitionKind::NoTransition,
        chi_th: None,
        x_plus: None,
        exponent: None,
        formal_chi_th: Some(formal),
    };
    if eta_p < crit {
        let f = generalized_vmax(k, eta_p);
        let s = (1.0
            - eta_p.powf(2.0 / (kf - 2.0))
                * (kf - 1.0).powf(-(kf - 1.0) / (kf - 2.0))
                * (kf - 2.0))
            .sqrt();
        let chi_th = s / eta_s;
        if chi_th >= 1.0 {
            return Ok(none(chi_th));
        }
        let e4 = eta_p.powi(4);
        let x_plus = eta_p * eta_p * ((1.0 - f) / (f.powi(k as i32) - e4 * f + e4)).sqrt();
        Ok(PhaseDiagnosis {
            kind: TransitionKind::MixedOrder,
            chi_th: Some(chi_th),
            x_plus: Some(x_plus),
            exponent: Some(0.5),
            formal_chi_th: None,
        })
    } else {
        let chi_th = 1.0 / (eta_s * eta_p);
        if chi_th >= 1.0 {
            return Ok(none(chi_th));
        }
        let exponent = if (eta_p - crit).abs() <= 1e-12 * crit {
            0.25
        } else {
            0.5
        };
        Ok(PhaseDiagnosis {
            kind: TransitionKind::SecondOrder,
            chi_th: Some(chi_th),
            x_plus: None,
            exponent: Some(exponent),
            formal_chi_th: None,
        })
    }
}

/// Infinite-depth sponge-crossing value under the generalized rules.
pub fn generalized_infinite_sponge(k: u32, chi: f64, params: RuleParams) -> Result<f64> {
    check_unit("chi", chi)?;
    let diag = generalized_phase_classify(k, params)?;
    let Some(chi_th) = diag.chi_th else {
        return Ok(0.0);
    };
    if chi < chi_th {
        return Ok(0.0);
    }
    let RuleParams { eta_s, eta_p } = params;
    let vmax = generalized_vmax(k, eta_p);
    let target = (eta_s * eta_p * chi).powi(2);
    let gmin = generalized_g(k, eta_p, vmax);
    let gmax = generalized_g(k, eta_p, 0.0);
    let v = if target >= gmax {
        0.0
    } else if target <= gmin {
        vmax
    } else {
        bisect(|v| generalized_g(k, eta_p, v) - target, 0.0, vmax, 0.0)?
    };
    Ok(generalized_root(k, eta_p, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::det_rules::parallel_combine;
    use crate::sp_reduce::{reduce_series_parallel, QNGraph};
    use proptest::prelude::*;

    const SQRT3_2: f64 = 0.866_025_403_784_438_6;

    #[test]
    fn branch_map_matches_physical_solution() {
        for chi in [0.87, 0.9, 0.99] {
            let sc = self_consistent_solution(3, chi).unwrap();
            assert!((sponge_from_branch(3, sc.u) - infinite_sponge(3, chi).unwrap()).abs() < 1e-14);
            let bad = sponge_from_branch(3, sc.nonphysical_u.unwrap());
            assert!(bad < infinite_sponge(3, chi).unwrap() + 1e-12);
        }
        assert_eq!(sponge_from_branch(3, 0.0), 0.0);
    }

    #[test]
    fn critical_points() {
        let c = critical_point(3).unwrap();
        assert!((c.chi_th - SQRT3_2).abs() < 1e-15);
        assert!((c.x_plus - 0.8f64.sqrt()).abs() < 1e-15);
        assert!((c.x1_plus - 0.5f64.sqrt()).abs() < 1e-15);
        let c = critical_point(4).unwrap();
        assert!((c.chi_th - 0.784_282_997_737_582_9).abs() < 1e-12);
        assert!((c.x_plus - 0.889_850_284_292_854_2).abs() < 1e-12);
        // chi_th decreases toward 0 as k grows
        let mut prev = 1.0;
        for k in 3..=50 {
            let c = critical_point(k).unwrap();
            let t = turning_point(k).unwrap();
            assert!(c.chi_th > 0.0 && c.chi_th < 1.0);
            assert!(c.chi_th < prev, "k={k}");
            prev = c.chi_th;
            assert!(c.x_plus >= c.x1_plus);
            let lhs = c.x_plus.powi(2) * (t.powi(k as i32) - t + 1.0);
            assert!((lhs - (1.0 - t)).abs() < 1e-14);
        }
        assert!(critical_point(2).is_err());
    }

    #[test]
    fn finite_depth_examples() {
        let x = finite_depth_sponge(3, 1, 0.5).unwrap();
        assert!((x - parallel_combine(&[0.5; 3], 1.0).unwrap()).abs() < 1e-15);
        assert!((x - 0.609_994_281_330_418_7).abs() < 1e-14);
        for k in 3..6 {
            for l in [1, 5, 40] {
                assert_eq!(finite_depth_sponge(k, l, 1.0).unwrap(), 1.0);
                assert_eq!(finite_depth_sponge(k, l, 0.0).unwrap(), 0.0);
            }
        }
        let deep = finite_depth_sponge(3, 1000, 0.9).unwrap();
        assert!((deep - infinite_sponge(3, 0.9).unwrap()).abs() < 1e-8);
        assert!(finite_depth_sponge(3, 0, 0.5).is_err());
    }

    #[test]
    fn finite_depth_matches_graph_reduction() {
        for (k, l, chi) in [(3, 3, 0.8), (4, 2, 0.6), (5, 2, 0.95)] {
            let g = QNGraph::bethe(k as usize, l as usize, chi).unwrap();
            let a = reduce_series_parallel(&g).unwrap();
            let b = finite_depth_sponge(k, l, chi).unwrap();
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn infinite_examples() {
        // u solves u^2 - u + 0.19 = 0 for k = 3, chi = 0.9
        let u: f64 = (1.0 + 0.24f64.sqrt()) / 2.0;
        let expect = (u / (u + (1.0 - u).powi(3))).sqrt();
        let x = infinite_sponge(3, 0.9).unwrap();
        assert!((x - expect).abs() < 1e-14);
        assert!((x - 0.989_046_741_411_488_4).abs() < 1e-12);
        assert_eq!(infinite_sponge(3, 0.85).unwrap(), 0.0);
        let at = infinite_sponge(3, SQRT3_2).unwrap();
        assert!((at - 0.8f64.sqrt()).abs() < 1e-7);
        assert_eq!(infinite_sponge(3, SQRT3_2 - 1e-9).unwrap(), 0.0);
        for k in 3..8 {
            assert_eq!(infinite_sponge(k, 1.0).unwrap(), 1.0);
            assert_eq!(infinite_sponge_complement(k, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn nonphysical_root_is_the_smaller_one() {
        let s = self_consistent_solution(3, 0.9).unwrap();
        let small = s.nonphysical_u.unwrap();
        assert!((small - (1.0 - 0.24f64.sqrt()) / 2.0).abs() < 1e-14);
        assert!(small < s.u);
    }

    #[test]
    fn correlation_length_behaviour() {
        let cp = critical_point(3).unwrap();
        let l_near = correlation_length(3, cp.chi_th - 1e-2, 0.5).unwrap();
        let l_far = correlation_length(3, cp.chi_th - 5e-2, 0.5).unwrap();
        assert!(l_near > l_far && l_near.is_finite());
        // plateau near X+ before the drop
        let prof = depth_profile(3, cp.chi_th - 1e-4, 40).unwrap();
        assert!((prof[39] - cp.x_plus).abs() < 0.02);
        assert!(correlation_length(3, cp.chi_th, 0.5).is_err());
        assert!(correlation_length(3, 0.5, 0.95).is_err());
    }

    #[test]
    fn finite_size_threshold_regression() {
        let cp = critical_point(3).unwrap();
        let t10 = finite_size_threshold(3, 10).unwrap();
        assert!(t10 > 0.8 && t10 < cp.chi_th);
        assert!((t10 - 0.828_873_752_843_445).abs() < 1e-6);
        let t20 = finite_size_threshold(3, 20).unwrap();
        assert!(t20 > t10 && t20 < cp.chi_th);
        assert!(finite_size_threshold(3, 1).is_err());
    }

    #[test]
    fn fit_on_synthetic_power_law() {
        let xs = logspace(0.01, 10.0, 12);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(0.5)).collect();
        let f = fit_power_law(&xs, &ys).unwrap();
        assert!((f.exponent - 0.5).abs() < 1e-12);
        assert!((f.amplitude - 3.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!((f.window.0 - 0.01).abs() < 1e-15 && (f.window.1 - 10.0).abs() < 1e-12);
        assert!(fit_power_law(&[1.0, 2.0, 3.0, -1.0], &[1.0; 4]).is_err());
        assert!(fit_power_law(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn fits_near_threshold() {
        for k in [3, 4, 5] {
            let b = beta_fit(k).unwrap();
            assert!((0.45..=0.55).contains(&b.exponent), "k={k}: {b:?}");
        }
        let s = saturation_exponent(3).unwrap();
        assert!((s.exponent - 3.0).abs() < 0.05);
    }

    #[test]
    fn generalized_classification_examples() {
        let d = generalized_phase_classify(3, RuleParams::STANDARD).unwrap();
        assert_eq!(d.kind, TransitionKind::MixedOrder);
        assert!((d.chi_th.unwrap() - SQRT3_2).abs() < 1e-14);
        assert!((d.x_plus.unwrap() - 0.8f64.sqrt()).abs() < 1e-14);
        let d = generalized_phase_classify(3, RuleParams::new(0.8, 1.0).unwrap()).unwrap();
        assert_eq!(d.kind, TransitionKind::NoTransition);
        assert!(d.formal_chi_th.unwrap() > 1.0);
        let d = generalized_phase_classify(3, RuleParams::new(1.0, 1.5).unwrap()).unwrap();
        assert_eq!(d.kind, TransitionKind::SecondOrder);
        assert!((d.chi_th.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(d.exponent, Some(0.5));
        let d = generalized_phase_classify(3, RuleParams::new(1.0, 2f64.sqrt()).unwrap()).unwrap();
        assert_eq!(d.exponent, Some(0.25));
        let d = generalized_phase_classify(3, RuleParams::new(0.6, 1.5).unwrap()).unwrap();
        assert_eq!(d.kind, TransitionKind::NoTransition);
    }

    #[test]
    fn generalized_reduces_to_standard() {
        for i in 0..=1000 {
            let chi = i as f64 / 1000.0;
            let a = generalized_infinite_sponge(3, chi, RuleParams::STANDARD).unwrap();
            let b = infinite_sponge(3, chi).unwrap();
            assert!((a - b).abs() < 1e-10, "chi={chi}: {a} vs {b}");
        }
    }

    #[test]
    fn generalized_continuity_and_jumps() {
        let p = RuleParams::new(1.0, 1.5).unwrap();
        let near = generalized_infinite_sponge(3, 2.0 / 3.0 + 1e-8, p).unwrap();
        assert!(near < 1e-3);
        assert!(generalized_infinite_sponge(3, 2.0 / 3.0 + 1e-2, p).unwrap() > near);
        let p = RuleParams::new(1.0, 0.9).unwrap();
        let d = generalized_phase_classify(3, p).unwrap();
        let th = d.chi_th.unwrap();
        assert_eq!(generalized_infinite_sponge(3, th - 1e-9, p).unwrap(), 0.0);
        let at = generalized_infinite_sponge(3, th, p).unwrap();
        assert!((at - d.x_plus.unwrap()).abs() < 1e-6);
    }

    #[test]
    fn second_order_onset_matches_fixed_point_iteration() {
        // iterate the branch recursion directly with the generalized rules
        let (es, ep) = (0.9, 2.0);
        let x_after = |chi: f64| {
            let mut b = 1.0f64;
            for _ in 0..20000 {
                let link = es * chi * b;
                b = parallel_uniform(link, 2, ep).min(1.0);
            }
            b
        };
        let th = generalized_phase_classify(3, RuleParams::new(es, ep).unwrap())
            .unwrap()
            .chi_th
            .unwrap();
        assert!(x_after(th * 0.99) < 1e-6);
        assert!(x_after(th * 1.01) > 1e-2);
    }

    proptest! {
        #[test]
        fn infinite_monotone_and_bounded(a in 0.0f64..1.0, b in 0.0f64..1.0, k in 3u32..8) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let (xl, xh) = (infinite_sponge(k, lo).unwrap(), infinite_sponge(k, hi).unwrap());
            prop_assert!(xl <= xh + 1e-15);
            let cp = critical_point(k).unwrap();
            if hi >= cp.chi_th {
                prop_assert!(xh >= cp.x_plus - 1e-7);
            } else {
                prop_assert_eq!(xh, 0.0);
            }
        }

        #[test]
        fn fixed_point_residual(chi in 0.87f64..1.0) {
            let s = self_consistent_solution(3, chi).unwrap();
            prop_assert!(s.residual < 1e-12);
        }

        #[test]
        fn finite_depth_nonincreasing_below_threshold(chi in 0.3f64..0.86, l in 1u64..60) {
            let a = finite_depth_sponge(3, l, chi).unwrap();
            let b = finite_depth_sponge(3, l + 1, chi).unwrap();
            prop_assert!(b <= a + 1e-15);
        }

        #[test]
        fn complement_matches_direct(eps in 1e-4f64..0.1, k in 3u32..7) {
            let x = infinite_sponge(k, 1.0 - eps).unwrap();
            let c = infinite_sponge_complement(k, eps).unwrap();
            prop_assert!((1.0 - x - c).abs() < 1e-13);
        }
    }
}
