//! Comparison models: classical percolation on `M` fully interdependent Bethe lattices,
//! and concurrence percolation (ConPT) on the Bethe lattice.

use serde::{Deserialize, Serialize};

use crate::bethe::critical_point;
use crate::error::{check_unit, domain, Error, Result};
use crate::solve::{bisect, linspace, logspace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterdependentSpec {
    pub k: u32,
    pub m: u32,
}

impl InterdependentSpec {
    pub fn new(k: u32, m: u32) -> Result<Self> {
        if k < 3 || m < 1 {
            return Err(domain(format!(
                "interdependent lattice needs k >= 3, M >= 1 (got {k}, {m})"
            )));
        }
        Ok(Self { k, m })
    }

    /// `1 - (1-P)^{k-1}` without cancellation at small `P`.
    fn branch_or(&self, p: f64) -> f64 {
        -((self.k - 1) as f64 * (-p).ln_1p()).exp_m1()
    }

    /// `[1 - (1-P)^{k-1}]^M`.
    fn g(&self, p: f64) -> f64 {
        self.branch_or(p).powi(self.m as i32)
    }

    /// `p` at which `P` is a fixed point.
    fn phi(&self, p: f64) -> f64 {
        p / self.g(p)
    }

    /// Stationary point of `phi`; zero for `M = 1`.
    fn tangency(&self) -> Result<f64> {
        if self.m == 1 {
            return Ok(0.0);
        }
        let (k, m) = (self.k as f64, self.m as f64);
        let f = |p: f64| self.branch_or(p) - m * (k - 1.0) * p * (1.0 - p).powf(k - 2.0);
        bisect(f, 1e-9, 1.0, 1e-15)
    }
}

/// Largest fixed point of `P = p [1 - (1-P)^{k-1}]^M`, zero below threshold.
pub fn interdependent_branch(k: u32, m: u32, p: f64) -> Result<f64> {
    let spec = InterdependentSpec::new(k, m)?;
    check_unit("p", p)?;
    let (p_th, _) = interdependent_critical(k, m)?;
    if p < p_th || (m == 1 && p == p_th) || p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    let lo = spec.tangency()?.max(1e-300);
    bisect(|x| spec.phi(x) - p, lo, 1.0, 0.0)
}

/// `(p_th, P^+)` of the interdependent lattice.
pub fn interdependent_critical(k: u32, m: u32) -> Result<(f64, f64)> {
    let spec = InterdependentSpec::new(k, m)?;
    if m == 1 {
        return Ok((1.0 / (k - 1) as f64, 0.0));
    }
    let pc = spec.tangency()?;
    let p_th = spec.phi(pc);
    if !(p_th > 0.0 && p_th <= 1.0) {
        return Err(Error::Numeric(format!(
            "tangency at P = {pc} gives p_th = {p_th}"
        )));
    }
    Ok((p_th, pc))
}

/// First-order expansion of a jump: exact value, first-order value, and the
/// magnitude of the second-order term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCheck {
    pub exact: f64,
    pub first_order: f64,
    pub second_order: f64,
}

impl ExpansionCheck {
    pub fn remainder(&self) -> f64 {
        (self.exact - self.first_order).abs()
    }
}

/// `P^+ = p_th [1 - M (1-P^+)^{k-1} + ...]`.
pub fn interdependent_expansion(k: u32, m: u32) -> Result<ExpansionCheck> {
    let (p_th, p_plus) = interdependent_critical(k, m)?;
    let w = (1.0 - p_plus).powi(k as i32 - 1);
    let mf = m as f64;
    Ok(ExpansionCheck {
        exact: p_plus,
        first_order: p_th * (1.0 - mf * w),
        second_order: p_th * 0.5 * mf * (mf - 1.0) * w * w,
    })
}

/// `(X1^+)^2 = chi_th^2 [1 - (X1^+)^{-2} (1 - (X1^+)^2)^{k-1} + ...]`.
pub fn negpt_expansion(k: u32) -> Result<ExpansionCheck> {
    let cp = critical_point(k)?;
    let u = cp.x1_plus * cp.x1_plus;
    let z = -(1.0 - u).powi(k as i32 - 1) / u;
    let c2 = cp.chi_th * cp.chi_th;
    Ok(ExpansionCheck {
        exact: u,
        first_order: c2 * (1.0 + z),
        second_order: c2 * z * z,
    })
}

/// Smaller Schmidt coefficient of a pure two-qubit state with concurrence `c`.
fn small_schmidt(c: f64) -> f64 {
    c * c / (2.0 * (1.0 + (1.0 - c * c).sqrt()))
}

/// ConPT parallel rule: the larger Schmidt coefficients multiply, floored at `1/2`.
pub fn conpt_parallel(cs: &[f64]) -> Result<f64> {
    if cs.is_empty() {
        return Err(domain("parallel rule needs at least one link"));
    }
    let mut s = 0.0;
    for &c in cs {
        check_unit("c", c)?;
        s += (-small_schmidt(c)).ln_1p();
    }
    Ok(parallel_from_log(s))
}

fn parallel_from_log(log_lambda_max: f64) -> f64 {
    if log_lambda_max <= -std::f64::consts::LN_2 {
        return 1.0;
    }
    let mu = -log_lambda_max.exp_m1();
    (2.0 * (mu * (1.0 - mu)).sqrt()).min(1.0)
}

fn conpt_uniform(x: f64, k: u32) -> f64 {
    parallel_from_log(k as f64 * (-small_schmidt(x)).ln_1p())
}

/// Largest root of `x = c * para_{k-1}(x)` on `[1e-15, 1]`, zero if none.
pub fn conpt_branch(k: u32, c: f64) -> Result<f64> {
    if k < 3 {
        return Err(domain(format!("Bethe degree k = {k} must be >= 3")));
    }
    check_unit("c", c)?;
    if c == 1.0 {
        return Ok(1.0);
    }
    if c == 0.0 {
        return Ok(0.0);
    }
    let f = |x: f64| c * conpt_uniform(x, k - 1) - x;
    let mut grid = logspace(1e-15, 0.1, 300);
    grid.extend(linspace(0.1, 1.0, 3000).into_iter().skip(1));
    let Some(i) = grid.iter().rposition(|&x| f(x) > 0.0) else {
        return Ok(0.0);
    };
    let hi = grid.get(i + 1).copied().unwrap_or(1.0);
    bisect(f, grid[i], hi, 0.0)
}

/// Sponge-crossing concurrence of the infinite Bethe lattice.
pub fn conpt_sponge_bethe(k: u32, c: f64) -> Result<f64> {
    let x = conpt_branch(k, c)?;
    Ok(if x == 0.0 { 0.0 } else { conpt_uniform(x, k) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConptCritical {
    /// Onset of a nonzero branch value.
    pub c_th: f64,
    /// Smallest `c` with `C_SC = 1`.
    pub c_sat: f64,
}

pub fn conpt_critical(k: u32) -> Result<ConptCritical> {
    if k < 3 {
        return Err(domain(format!("Bethe degree k = {k} must be >= 3")));
    }
    // linear response of the (k-1)-branch rule at vanishing concurrence
    let x0 = 1e-8;
    let c_th = x0 / conpt_uniform(x0, k - 1);
    let saturated = |c: f64| conpt_sponge_bethe(k, c).map(|v| v >= 1.0).unwrap_or(false);
    let (mut lo, mut hi) = (c_th, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if saturated(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ConptCritical { c_th, c_sat: hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bethe::infinite_sponge;
    use proptest::prelude::*;

    // oracle: fixed-point iteration from P = 1 converges to the largest root
    fn iterate(k: u32, m: u32, p: f64) -> f64 {
        let mut x = 1.0f64;
        for _ in 0..200_000 {
            x = p * (1.0 - (1.0 - x).powi(k as i32 - 1)).powi(m as i32);
        }
        x
    }

    #[test]
    fn interdependent_examples() {
        let x = interdependent_branch(3, 1, 0.75).unwrap();
        assert!((x - iterate(3, 1, 0.75)).abs() < 1e-12);
        // P = 0.75 (2P - P^2) gives P = 2 - 1/0.75
        assert!((x - (2.0 - 1.0 / 0.75)).abs() < 1e-14);
        assert_eq!(interdependent_critical(3, 1).unwrap(), (0.5, 0.0));
        let (p_th, p_plus) = interdependent_critical(3, 2).unwrap();
        assert!((p_th - 27.0 / 32.0).abs() < 1e-12);
        assert!((p_plus - 2.0 / 3.0).abs() < 1e-9);
        assert_eq!(interdependent_branch(3, 2, 0.84).unwrap(), 0.0);
        let above = interdependent_branch(3, 2, 27.0 / 32.0 + 1e-9).unwrap();
        assert!(above > 0.66);
        assert_eq!(interdependent_branch(3, 1, 0.5).unwrap(), 0.0);
        assert!(interdependent_branch(3, 1, 0.5 + 1e-3).unwrap() < 1e-2);
        assert!(InterdependentSpec::new(2, 1).is_err());
    }

    #[test]
    fn interdependent_matches_fixed_point_iteration() {
        for (k, m, p) in [(3, 2, 0.9), (4, 3, 0.8), (5, 2, 0.4), (6, 1, 0.3)] {
            let x = interdependent_branch(k, m, p).unwrap();
            assert!((x - iterate(k, m, p)).abs() < 1e-10, "{k} {m} {p}");
        }
    }

    #[test]
    fn expansions_hold_to_first_order() {
        for k in 3..=10 {
            let e = negpt_expansion(k).unwrap();
            // exact remainder of 1/(1-z) against 1 + z
            let z2 = e.second_order;
            assert!(e.remainder() <= z2 * (1.0 + 1e-9) + 1e-15, "k={k}: {e:?}");
        }
        let trend: Vec<f64> = (3..=10)
            .map(|k| negpt_expansion(k).unwrap().remainder())
            .collect();
        assert!(trend.windows(2).all(|w| w[1] < w[0]));
        for m in 2..=4 {
            for k in 3..=20 {
                let e = interdependent_expansion(k, m).unwrap();
                assert!(
                    e.remainder() <= e.second_order + 1e-15,
                    "k={k} M={m}: {e:?}"
                );
            }
        }
    }

    #[test]
    fn conpt_rule_basics() {
        assert_eq!(conpt_parallel(&[0.3]).unwrap(), 0.3);
        assert_eq!(conpt_parallel(&[1.0, 0.2]).unwrap(), 1.0);
        assert_eq!(conpt_parallel(&[0.0, 0.0]).unwrap(), 0.0);
        // phi(c_out) = max(1/2, prod phi(c_i)) with phi(c) = (1 + sqrt(1 - c^2)) / 2
        let phi = |c: f64| (1.0 + (1.0 - c * c).sqrt()) / 2.0;
        let out = conpt_parallel(&[0.4, 0.5]).unwrap();
        assert!((phi(out) - phi(0.4) * phi(0.5)).abs() < 1e-15);
    }

    #[test]
    fn conpt_bethe_constants() {
        let cc = conpt_critical(3).unwrap();
        assert!((cc.c_th - 0.5f64.sqrt()).abs() < 1e-6);
        let p = 2f64.powf(2.0 / 3.0);
        let expect_sat = (2.0 - p).sqrt() / (p - 1.0).sqrt();
        assert!(
            (cc.c_sat - expect_sat).abs() < 1e-9,
            "{cc:?} vs {expect_sat}"
        );
        assert!((cc.c_sat - 0.8383).abs() < 1e-3);
        assert_eq!(conpt_sponge_bethe(3, 1.0).unwrap(), 1.0);
        assert_eq!(conpt_sponge_bethe(3, 0.0).unwrap(), 0.0);
        assert_eq!(conpt_sponge_bethe(3, 0.7).unwrap(), 0.0);
        assert!((conpt_sponge_bethe(3, 0.75).unwrap() - 0.816).abs() < 2e-3);
        assert_eq!(conpt_sponge_bethe(3, 0.84).unwrap(), 1.0);
    }

    #[test]
    fn conpt_is_continuous_where_negpt_jumps() {
        let cc = conpt_critical(3).unwrap();
        let grid = linspace(cc.c_th - 1e-3, cc.c_th + 1e-3, 201);
        let vals: Vec<f64> = grid
            .iter()
            .map(|&c| conpt_sponge_bethe(3, c).unwrap())
            .collect();
        let max_step = vals
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max);
        assert!(max_step < 0.05, "{max_step}");
        let cp = critical_point(3).unwrap();
        let jump =
            infinite_sponge(3, cp.chi_th).unwrap() - infinite_sponge(3, cp.chi_th - 1e-9).unwrap();
        assert!(jump >= cp.x_plus - 1e-7);
    }

    proptest! {
        #[test]
        fn interdependent_residual(k in 3u32..8, m in 1u32..4, p in 0.0f64..=1.0) {
            let x = interdependent_branch(k, m, p).unwrap();
            let rhs = p * (1.0 - (1.0 - x).powi(k as i32 - 1)).powi(m as i32);
            prop_assert!((x - rhs).abs() < 1e-12);
        }

        #[test]
        fn conpt_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(conpt_sponge_bethe(3, lo).unwrap() <= conpt_sponge_bethe(3, hi).unwrap() + 1e-12);
        }
    }
}
