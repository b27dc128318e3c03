//! Majorization-based checks of the LOCC constructions behind the series and parallel rules.
//!
//! `x ≺ y` means every prefix sum of the sorted `x` is at most that of `y`; a pure
//! state with Schmidt vector `x` converts deterministically into one with `y` iff `x ≺ y`,
//! which holds iff `x = D y` for a column-stochastic `D`.

use serde::{Deserialize, Serialize};

use crate::det_rules::{one_minus_sq, series_combine};
use crate::error::{check_unit, domain, Error, Result};
use crate::measures::{tmsvs_schmidt, RatioNegativity, SchmidtVector};

pub const DEFAULT_N_MAX: usize = 200;
pub const TAIL_LIMIT: f64 = 1e-8;
pub const MAJORIZATION_TOL: f64 = 1e-12;
pub const STOCHASTIC_TOL: f64 = 1e-10;
pub const PHYSICALITY_TOL: f64 = 1e-10;

/// True iff `x ≺ y`. Vectors are compared after renormalizing by their retained mass.
pub fn majorizes(x: &SchmidtVector, y: &SchmidtVector) -> Result<bool> {
    x.check_normalized()?;
    y.check_normalized()?;
    let sx: f64 = x.values().iter().sum();
    let sy: f64 = y.values().iter().sum();
    let n = x.len().max(y.len());
    let (mut px, mut py) = (0.0, 0.0);
    for i in 0..n {
        px += x.values().get(i).copied().unwrap_or(0.0) / sx;
        py += y.values().get(i).copied().unwrap_or(0.0) / sy;
        if px > py + MAJORIZATION_TOL {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TransferKind {
    Loss { eta: f64 },
    Amplifier { gain: f64 },
}

/// Truncated `n × n` Fock-basis transfer matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub kind: TransferKind,
    pub n: usize,
    pub entries: Vec<f64>,
}

/// `ln n!` for `0..=n`.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// Binomial pmf `C(n, m) p^m (1-p)^{n-m}`.
fn binom_pmf(lnf: &[f64], n: usize, m: usize, p: f64) -> f64 {
    if m > n {
        return 0.0;
    }
    if p == 1.0 {
        return if m == n { 1.0 } else { 0.0 };
    }
    if p == 0.0 {
        return if m == 0 { 1.0 } else { 0.0 };
    }
    let ln = lnf[n] - lnf[m] - lnf[n - m] + m as f64 * p.ln() + (n - m) as f64 * (-p).ln_1p();
    ln.exp()
}

impl TransferMatrix {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.n + col]
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (0..self.n.min(v.len()))
                    .map(|j| self.get(i, j) * v[j])
                    .sum()
            })
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).sum())
            .collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j)).sum())
            .collect()
    }

    /// Row sums of the untruncated matrix.
    fn full_row_sum(&self) -> f64 {
        match self.kind {
            TransferKind::Loss { eta } => 1.0 / eta,
            TransferKind::Amplifier { gain } => 1.0 / gain,
        }
    }
}

/// Pure-loss-like matrix `D^L[m][n] = C(n, m) eta^m (1-eta)^{n-m}`.
pub fn loss_matrix(eta: f64, n_max: usize) -> Result<TransferMatrix> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(domain(format!(
            "loss transmissivity eta = {eta} outside (0, 1]"
        )));
    }
    if n_max < 2 {
        return Err(domain("n_max must be >= 2"));
    }
    let lnf = ln_factorials(n_max);
    let mut entries = vec![0.0; n_max * n_max];
    for n in 0..n_max {
        for m in 0..=n {
            entries[m * n_max + n] = binom_pmf(&lnf, n, m, eta);
        }
    }
    Ok(TransferMatrix {
        kind: TransferKind::Loss { eta },
        n: n_max,
        entries,
    })
}

/// Amplifier-like matrix `D^A[m][n] = C(m, n) a^{n+1} b^{m-n}`, `a = 1/G`, `b = 1 - a`.
pub fn amp_matrix(gain: f64, n_max: usize) -> Result<TransferMatrix> {
    if !(gain >= 1.0) || !gain.is_finite() {
        return Err(domain(format!("amplifier gain G = {gain} must be >= 1")));
    }
    if n_max < 2 {
        return Err(domain("n_max must be >= 2"));
    }
    let a = 1.0 / gain;
    let lnf = ln_factorials(n_max);
    let mut entries = vec![0.0; n_max * n_max];
    for m in 0..n_max {
        for n in 0..=m {
            entries[m * n_max + n] = a * binom_pmf(&lnf, m, n, a);
        }
    }
    Ok(TransferMatrix {
        kind: TransferKind::Amplifier { gain },
        n: n_max,
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Stochastic,
    NotStochastic,
    /// The truncation tail is too large to decide.
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StochasticityReport {
    pub verdict: Verdict,
    /// Largest row sum of the truncated tensor product over resolved rows.
    pub max_row_sum: f64,
    /// Largest amount truncation removed from a resolved row.
    pub tail_bound: f64,
    /// Rows of each factor whose truncated mass is within `TAIL_LIMIT` of the full row.
    pub resolved_rows: (usize, usize),
}

/// Per-row `(truncated sum, deficit)` for rows whose deficit is at most `TAIL_LIMIT`.
fn resolved_rows(m: &TransferMatrix) -> Vec<(f64, f64)> {
    let full = m.full_row_sum();
    m.row_sums()
        .into_iter()
        .map(|s| (s, (full - s).max(0.0)))
        .filter(|&(_, d)| d <= TAIL_LIMIT)
        .collect()
}

/// Row-sum test of `loss ⊗ amp`. Row sums of a tensor of nonnegative matrices multiply;
/// rows cut short by the truncation edge are left out. A resolved row plus its tail is
/// the untruncated row, so the stochastic side is decided by the full row sums.
pub fn tensor_stochasticity(loss: &TransferMatrix, amp: &TransferMatrix) -> StochasticityReport {
    let (rl, ra) = (resolved_rows(loss), resolved_rows(amp));
    let max_of = |rows: &[(f64, f64)]| rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let max_def = |rows: &[(f64, f64)]| rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let (ml, ma) = (max_of(&rl), max_of(&ra));
    let max_row_sum = ml * ma;
    let tail_bound = max_def(&rl) * amp.full_row_sum() + max_def(&ra) * loss.full_row_sum();
    let verdict = if rl.is_empty() || ra.is_empty() {
        Verdict::Indeterminate
    } else if max_row_sum > 1.0 + STOCHASTIC_TOL {
        Verdict::NotStochastic
    } else if loss.full_row_sum() * amp.full_row_sum() <= 1.0 + STOCHASTIC_TOL {
        Verdict::Stochastic
    } else {
        Verdict::Indeterminate
    };
    StochasticityReport {
        verdict,
        max_row_sum,
        tail_bound,
        resolved_rows: (rl.len(), ra.len()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationInputs {
    pub r1: f64,
    pub r2: f64,
    pub n_max: usize,
}

/// Outcome of checking the `D^L ⊗ D^A` construction for two TMSVSs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub inputs: ConcentrationInputs,
    pub r_out: f64,
    pub chi_out: f64,
    pub eta: f64,
    pub gain: f64,
    /// Largest entrywise mismatch of `D (λ(r1') ⊗ λ(r2'))` against `λ(r1) ⊗ λ(r2)`.
    pub residual: f64,
    pub truncation_error: f64,
    pub stochasticity: StochasticityReport,
    pub majorized: bool,
    pub pass: bool,
}

/// Checks that `λ(r1) ⊗ λ(r2)` converts into `λ(r) ⊗ e_1` with `sinh r = sinh r1 cosh r2`.
/// Inputs are ordered internally so that `r1 >= r2`.
pub fn verify_concentration(r1: f64, r2: f64, n_max: usize) -> Result<ConcentrationReport> {
    for r in [r1, r2] {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(domain(format!("squeezing r = {r} must be finite and >= 0")));
        }
    }
    let (r1, r2) = if r1 >= r2 { (r1, r2) } else { (r2, r1) };
    let (chi1, chi2) = (r1.tanh(), r2.tanh());
    let r_out = (r1.sinh() * r2.cosh()).asinh();
    let chi_out = r_out.tanh();
    let tail = chi_out.powi(2 * n_max as i32);
    if !(tail < TAIL_LIMIT) {
        return Err(Error::Truncation {
            n_max,
            tail,
            limit: TAIL_LIMIT,
        });
    }
    // ηG = 1 with the second output mode in vacuum
    let eta = one_minus_sq(chi2);
    let gain = 1.0 / eta;
    let chi = |c: f64| RatioNegativity::new(c);
    let y1 = tmsvs_schmidt(chi(chi_out)?, n_max)?;
    let x1 = tmsvs_schmidt(chi(chi1)?, n_max)?;
    let x2 = tmsvs_schmidt(chi(chi2)?, n_max)?;
    let dl = loss_matrix(eta, n_max)?;
    let da = amp_matrix(gain, n_max)?;
    let z1 = dl.apply(y1.values());
    let z2: Vec<f64> = (0..n_max).map(|m| da.get(m, 0)).collect();
    let mut residual: f64 = 0.0;
    for (i, &a) in x1.values().iter().enumerate() {
        for (j, &b) in x2.values().iter().enumerate() {
            residual = residual.max((z1[i] * z2[j] - a * b).abs());
        }
    }
    let stochasticity = tensor_stochasticity(&dl, &da);
    let majorized = majorizes(&x1.tensor(&x2), &y1)?;
    let truncation_error = y1.truncation_error().max(x1.tensor(&x2).truncation_error());
    let pass =
        residual < TAIL_LIMIT && majorized && stochasticity.verdict != Verdict::NotStochastic;
    Ok(ConcentrationReport {
        inputs: ConcentrationInputs { r1, r2, n_max },
        r_out,
        chi_out,
        eta,
        gain,
        residual,
        truncation_error,
        stochasticity,
        majorized,
        pass,
    })
}

/// Sufficient condition for converting squeezing `(r1, r2)` into `(r1p, r2p)`.
pub fn lemma2_convertible(r1: f64, r2: f64, r1p: f64, r2p: f64) -> Result<bool> {
    if r1 < r2 || r1p < r2p {
        return Err(domain("squeezing vectors must be decreasingly ordered"));
    }
    if (r1p - r1) * (r2p - r2) > 0.0 {
        return Err(domain("components of r' - r must have opposite signs"));
    }
    let sign = if r1p >= r1 { 1.0 } else { -1.0 };
    let num = (r1 + r2).sinh() + sign * (r1 - r2).sinh();
    let den = (r1p + r2p).sinh() + sign * (r1p - r2p).sinh();
    if den == 0.0 {
        return Ok(num >= 0.0);
    }
    Ok(num / den >= 1.0 - 1e-12)
}

/// Two-mode covariance matrix `[[a I, c Z], [c Z, b I]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianCM {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl GaussianCM {
    pub const MODES: usize = 2;

    pub fn tmsv(r: f64) -> Self {
        let (a, c) = ((2.0 * r).cosh(), (2.0 * r).sinh());
        Self { a, b: a, c }
    }

    /// Symmetric and pure: `a = b`, `c = sqrt(a^2 - 1)`.
    pub fn is_pure_symmetric(&self, tol: f64) -> bool {
        (self.a - self.b).abs() <= tol
            && (self.c - (self.a * self.a - 1.0).max(0.0).sqrt()).abs() <= tol
    }

    /// `tanh r = sqrt((a - 1) / (a + 1))`.
    pub fn chi(&self) -> f64 {
        ((self.a - 1.0) / (self.a + 1.0)).max(0.0).sqrt()
    }

    pub fn to_matrix(&self) -> [[f64; 4]; 4] {
        let Self { a, b, c } = *self;
        [
            [a, 0.0, c, 0.0],
            [0.0, a, 0.0, -c],
            [c, 0.0, b, 0.0],
            [0.0, -c, 0.0, b],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwapOutcome {
    pub cm: GaussianCM,
    pub chi: f64,
    pub r: f64,
}

/// Swapping of TMSVSs `r1`, `r2` through a GPOVM with a TMSVS seed `r0` (may be infinite).
pub fn gpovm_swap(r1: f64, r2: f64, r0: f64) -> Result<SwapOutcome> {
    if !(r1 > 0.0 && r2 > 0.0) || !r1.is_finite() || !r2.is_finite() || !(r0 >= 0.0) {
        return Err(domain(format!(
            "gpovm_swap needs r1, r2 > 0 and r0 >= 0 (got {r1}, {r2}, {r0})"
        )));
    }
    let (c1, c2) = ((2.0 * r1).cosh(), (2.0 * r2).cosh());
    let (s1, s2) = ((2.0 * r1).sinh(), (2.0 * r2).sinh());
    // divided through by cosh 2r0 so the optimal seed r0 = inf is a plain limit
    let (inv_c0, t0) = if r0.is_infinite() {
        (0.0, 1.0)
    } else {
        (1.0 / (2.0 * r0).cosh(), (2.0 * r0).tanh())
    };
    let den = (c1 * c2 + 1.0) * inv_c0 + (c1 + c2);
    let a = ((c1 * c2 + 1.0) + (c1 + c2) * inv_c0) / den;
    let c = t0 * s1 * s2 / den;
    let cm = GaussianCM { a, b: a, c };
    let expect_c = (a * a - 1.0).max(0.0).sqrt();
    if (c - expect_c).abs() > PHYSICALITY_TOL * c.max(1.0) {
        return Err(Error::Numeric(format!(
            "swap output not pure: c = {c}, sqrt(a^2-1) = {expect_c}"
        )));
    }
    let chi = r0.tanh() * r1.tanh() * r2.tanh();
    Ok(SwapOutcome {
        cm,
        chi,
        r: chi.atanh(),
    })
}

/// Chain of swaps: `prod(seeds) * prod(links)`; optimal relays need no seed entry.
pub fn swap_chain(chis: &[f64], seed_chis: &[f64]) -> Result<f64> {
    if chis.is_empty() {
        return Err(domain("chain needs at least one link"));
    }
    if seed_chis.len() > chis.len().saturating_sub(1) {
        return Err(domain(format!(
            "{} seeds for {} relays",
            seed_chis.len(),
            chis.len().saturating_sub(1)
        )));
    }
    for &s in seed_chis {
        check_unit("seed chi", s)?;
    }
    let eta_s: f64 = seed_chis.iter().product();
    if eta_s == 0.0 {
        for &c in chis {
            check_unit("chi", c)?;
        }
        return Ok(0.0);
    }
    series_combine(chis, eta_s)
}

/// Superposition of an `n0`-level DV state (weight `1 - c_chi`) and a TMSVS tail with ratio `chi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DCState {
    pub c_chi: f64,
    pub mu: Vec<f64>,
    pub chi: f64,
}

impl DCState {
    pub fn new(c_chi: f64, mu: Vec<f64>, chi: f64) -> Result<Self> {
        check_unit("c_chi", c_chi)?;
        check_unit("chi", chi)?;
        if chi >= 1.0 {
            return Err(domain("tail ratio chi must be < 1"));
        }
        if mu.iter().any(|m| !(*m >= 0.0)) {
            return Err(domain("DV Schmidt prefix must be nonnegative"));
        }
        let s: f64 = mu.iter().sum();
        if c_chi < 1.0 && (s - 1.0).abs() > SchmidtVector::NORM_TOL {
            return Err(domain(format!("DV Schmidt prefix sums to {s}, not 1")));
        }
        Ok(Self { c_chi, mu, chi })
    }

    pub fn gaussian(chi: f64) -> Result<Self> {
        Self::new(1.0, Vec::new(), chi)
    }

    /// Block-ordered Schmidt values `(1-c) mu ⊕ c (1-chi^2)(1, chi^2, ...)` with `n_tail`
    /// tail terms, and the truncated mass.
    pub fn schmidt_blocks(&self, n_tail: usize) -> (Vec<f64>, f64) {
        let mut v: Vec<f64> = self.mu.iter().map(|m| (1.0 - self.c_chi) * m).collect();
        let q = self.chi * self.chi;
        let mut term = self.c_chi * (1.0 - q);
        for _ in 0..n_tail {
            v.push(term);
            term *= q;
        }
        (v, self.c_chi * q.powi(n_tail as i32))
    }

    pub fn schmidt(&self, n_tail: usize) -> Result<SchmidtVector> {
        let (v, t) = self.schmidt_blocks(n_tail);
        SchmidtVector::from_unsorted(v, t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonGaussianConcentration {
    pub out: DCState,
    pub eta_p: f64,
    pub eta: f64,
    pub max_row_sum: f64,
    pub residual: f64,
    pub verified: bool,
}

/// Block matrix `[(1-c2) B; c2 D^A + (1-c2) C]` that builds state 2 from the vacuum.
fn dv_amp_block(s2: &DCState, n_tail: usize) -> Result<(Vec<Vec<f64>>, usize)> {
    let n2 = s2.mu.len();
    let gain = 1.0 / one_minus_sq(s2.chi);
    let da = amp_matrix(gain, n_tail)?;
    let cols = n_tail;
    let mut m = vec![vec![0.0; cols]; n2 + n_tail];
    for (i, &mu) in s2.mu.iter().enumerate() {
        m[i][0] = (1.0 - s2.c_chi) * mu;
    }
    for (r, row) in m[n2..].iter_mut().enumerate() {
        for (c, e) in row.iter_mut().enumerate() {
            let id = if r == c && r > 0 { 1.0 } else { 0.0 };
            *e = s2.c_chi * da.get(r, c) + (1.0 - s2.c_chi) * id;
        }
    }
    Ok((m, n2))
}

/// Concentrates two DC states with loss parameter `eta`; the DV block uses `A = I`.
pub fn nongaussian_concentrate_with_eta(
    s1: &DCState,
    s2: &DCState,
    eta: f64,
    n_max: usize,
) -> Result<NonGaussianConcentration> {
    let bound = 1.0 - s2.c_chi * s2.chi * s2.chi;
    if eta < bound - STOCHASTIC_TOL {
        return Err(Error::Stochasticity(format!(
            "eta = {eta} below row-sum bound 1 - c2 chi2^2 = {bound}"
        )));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(domain(format!("eta = {eta} outside (0, 1]")));
    }
    let chi1 = s1.chi;
    let chi_out = chi1 / (eta * one_minus_sq(chi1) + chi1 * chi1).sqrt();
    let out = DCState::new(s1.c_chi, s1.mu.clone(), chi_out.min(1.0))?;
    let tail = s1.c_chi * chi_out.powi(2 * n_max as i32);
    if chi_out >= 1.0 || !(tail < TAIL_LIMIT) {
        return Err(Error::Truncation {
            n_max,
            tail,
            limit: TAIL_LIMIT,
        });
    }

    // factor 1: diag(I, D^L) maps the output blocks onto state 1
    let dl = loss_matrix(eta, n_max)?;
    let (y, _) = out.schmidt_blocks(n_max);
    let (x1, _) = s1.schmidt_blocks(n_max);
    let n0 = s1.mu.len();
    let mut z1 = y[..n0].to_vec();
    z1.extend(dl.apply(&y[n0..]));
    // factor 2: the block matrix applied to e_1
    let (block, _) = dv_amp_block(s2, n_max)?;
    let z2: Vec<f64> = block.iter().map(|row| row[0]).collect();
    let (x2, _) = s2.schmidt_blocks(n_max);
    let residual = z1
        .iter()
        .zip(&x1)
        .chain(z2.iter().zip(&x2))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let row_l = dl.row_sums().into_iter().fold(1.0f64, f64::max);
    let row_a = block
        .iter()
        .map(|r| r.iter().sum::<f64>())
        .fold(0.0, f64::max);
    let max_row_sum = row_l * row_a;
    let cols_ok = (0..n_max).all(|c| {
        let s: f64 = block.iter().map(|r| r[c]).sum();
        s <= 1.0 + STOCHASTIC_TOL
    });
    let verified = residual < TAIL_LIMIT && max_row_sum <= 1.0 + STOCHASTIC_TOL && cols_ok;
    let eta_p = one_minus_sq(s2.chi) / bound;
    Ok(NonGaussianConcentration {
        out,
        eta_p,
        eta,
        max_row_sum,
        residual,
        verified,
    })
}

/// Concentration at the smallest admissible `eta = 1 - c2 chi2^2`.
pub fn nongaussian_concentrate(
    s1: &DCState,
    s2: &DCState,
    n_max: usize,
) -> Result<NonGaussianConcentration> {
    let eta = 1.0 - s2.c_chi * s2.chi * s2.chi;
    nongaussian_concentrate_with_eta(s1, s2, eta, n_max)
}
