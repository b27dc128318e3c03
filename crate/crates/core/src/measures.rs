//! Squeezing parameter, ratio negativity and TMSVS Schmidt vectors.
//!
//! A two-mode squeezed vacuum with squeezing `r` has ratio negativity
//! `chi = tanh r`. Infinite squeezing is a first-class value and maps to `chi = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, domain, Error, Result};

pub const ROUND_TRIP_TOL: f64 = 1e-12;

/// Link weight `chi` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RatioNegativity(f64);

impl RatioNegativity {
    pub const ZERO: Self = Self(0.0);
    pub const ONE: Self = Self(1.0);

    pub fn new(chi: f64) -> Result<Self> {
        check_unit("chi", chi)?;
        Ok(Self(chi))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for RatioNegativity {
    type Error = Error;
    fn try_from(x: f64) -> Result<Self> {
        Self::new(x)
    }
}

impl From<RatioNegativity> for f64 {
    fn from(c: RatioNegativity) -> f64 {
        c.0
    }
}

/// Squeezing `r >= 0`; `f64::INFINITY` is the perfect-link representation.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SqueezingParameter(f64);

impl SqueezingParameter {
    pub const INFINITE: Self = Self(f64::INFINITY);

    pub fn new(r: f64) -> Result<Self> {
        if r.is_nan() || r < 0.0 {
            return Err(domain(format!("squeezing r = {r} must be >= 0")));
        }
        Ok(Self(r))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

pub fn chi_from_r(r: SqueezingParameter) -> RatioNegativity {
    if r.is_infinite() {
        RatioNegativity::ONE
    } else {
        RatioNegativity(r.0.tanh())
    }
}

pub fn r_from_chi(chi: RatioNegativity) -> SqueezingParameter {
    if chi.0 >= 1.0 {
        SqueezingParameter::INFINITE
    } else {
        SqueezingParameter(chi.0.atanh())
    }
}

/// Nonincreasing Schmidt coefficients with the probability mass cut off by truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtVector {
    values: Vec<f64>,
    truncation_error: f64,
}

impl SchmidtVector {
    pub const NORM_TOL: f64 = 1e-10;

    /// Validates ordering, signs and normalization.
    pub fn new(values: Vec<f64>, truncation_error: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(domain("empty Schmidt vector"));
        }
        if values.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(domain("Schmidt coefficients must be nonnegative"));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(domain("Schmidt coefficients must be nonincreasing"));
        }
        let v = Self {
            values,
            truncation_error,
        };
        v.check_normalized()?;
        Ok(v)
    }

    /// Sorts descending first; use for products or user-supplied vectors.
    pub fn from_unsorted(mut values: Vec<f64>, truncation_error: f64) -> Result<Self> {
        values.sort_by(|a, b| b.total_cmp(a));
        Self::new(values, truncation_error)
    }

    /// Standard basis vector `e_1` (vacuum).
    pub fn vacuum() -> Self {
        Self {
            values: vec![1.0],
            truncation_error: 0.0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn truncation_error(&self) -> f64 {
        self.truncation_error
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_normalized(&self) -> Result<()> {
        let t = self.truncation_error;
        if t.is_nan() || !(0.0..=1.0).contains(&t) {
            return Err(domain(format!("truncation error {t} outside [0, 1]")));
        }
        let s: f64 = self.values.iter().sum();
        if (s + t - 1.0).abs() > Self::NORM_TOL {
            return Err(domain(format!(
                "Schmidt vector not normalized: sum {s} + truncation {t} != 1"
            )));
        }
        Ok(())
    }

    /// Sorted tensor product; retained mass multiplies.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut values = Vec::with_capacity(self.len() * other.len());
        for a in &self.values {
            for b in &other.values {
                values.push(a * b);
            }
        }
        values.sort_by(|a, b| b.total_cmp(a));
        let kept = (1.0 - self.truncation_error) * (1.0 - other.truncation_error);
        Self {
            values,
            truncation_error: 1.0 - kept,
        }
    }
}

/// `lambda_n = (1 - chi^2) chi^{2n}` for `n < n_max`, tail `chi^{2 n_max}`.
pub fn tmsvs_schmidt(chi: RatioNegativity, n_max: usize) -> Result<SchmidtVector> {
    let c = chi.0;
    if c >= 1.0 {
        return Err(domain("chi = 1 has no normalizable Schmidt vector"));
    }
    if n_max == 0 {
        return Err(domain("n_max must be >= 1"));
    }
    let q = c * c;
    let mut values = Vec::with_capacity(n_max);
    let mut term = 1.0 - q;
    for _ in 0..n_max {
        values.push(term);
        term *= q;
    }
    Ok(SchmidtVector {
        values,
        truncation_error: q.powi(n_max as i32),
    })
}
