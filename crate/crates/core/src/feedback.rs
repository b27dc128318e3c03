//! Delayed first-order decay under PID feedback.
//!
//! Link entanglement obeys `dχ/dt = -χ/τ + u(t - T0)`. The controller acts on the error
//! between a target and the network's sponge-crossing response to `χ`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{conpt_critical, conpt_sponge_bethe};
use crate::bethe::{critical_point, infinite_sponge};
use crate::error::{domain, Error, Result};
use crate::solve::bisect;

pub const DEFAULT_DT: f64 = 1e-4;
pub const RESPONSE_STEP: f64 = 1e-4;
pub const DEFAULT_BAND: f64 = 0.02;
pub const DEFAULT_WINDOW: f64 = 2.0;
/// Largest `|Δχ|` accepted in one integrator step.
pub const MAX_STEP_CHANGE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Response {
    /// Gaussian links on a Bethe lattice; discontinuous at `χ_th`.
    Cv(u32),
    /// Qubit concurrence links on a Bethe lattice; continuous onset.
    Dv(u32),
}

/// Tabulated response map on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct ResponseTable {
    pub response: Response,
    pub threshold: f64,
    /// Value just above `threshold`.
    pub edge: f64,
    pub saturation: f64,
    values: Vec<f64>,
}

impl ResponseTable {
    fn build(response: Response) -> Result<Self> {
        let n = (1.0 / RESPONSE_STEP).round() as usize;
        let grid = |i: usize| (i as f64 * RESPONSE_STEP).min(1.0);
        let (threshold, edge, saturation, values) = match response {
            Response::Cv(k) => {
                let cp = critical_point(k)?;
                let values = (0..=n)
                    .into_par_iter()
                    .map(|i| infinite_sponge(k, grid(i)))
                    .collect::<Result<Vec<_>>>()?;
                (cp.chi_th, cp.x_plus, 1.0, values)
            }
            Response::Dv(k) => {
                let cc = conpt_critical(k)?;
                let values = (0..=n)
                    .into_par_iter()
                    .map(|i| conpt_sponge_bethe(k, grid(i)))
                    .collect::<Result<Vec<_>>>()?;
                (cc.c_th, 0.0, cc.c_sat, values)
            }
        };
        Ok(ResponseTable {
            response,
            threshold,
            edge,
            saturation,
            values,
        })
    }

    /// Linear interpolation on the grid; exactly zero below the threshold.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        if x < self.threshold {
            return 0.0;
        }
        let last = self.values.len() - 1;
        let i = ((x / RESPONSE_STEP).floor() as usize).min(last - 1);
        let (mut x0, mut y0) = (i as f64 * RESPONSE_STEP, self.values[i]);
        let (x1, y1) = ((i + 1) as f64 * RESPONSE_STEP, self.values[i + 1]);
        if x0 < self.threshold {
            x0 = self.threshold;
            y0 = self.edge;
        }
        if x1 <= x0 {
            return y1;
        }
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Smallest argument whose response reaches `target`.
    pub fn inverse(&self, target: f64) -> Result<f64> {
        if !(target > 0.0 && target < 1.0) {
            return Err(domain(format!("target {target} outside (0, 1)")));
        }
        if target <= self.edge {
            return Ok(self.threshold);
        }
        bisect(|x| self.eval(x) - target, self.threshold, 1.0, 1e-14)
    }
}

/// Shared memoized table for `response`.
pub fn response_table(response: Response) -> Result<Arc<ResponseTable>> {
    static CACHE: OnceLock<Mutex<HashMap<Response, Arc<ResponseTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache.lock().unwrap().get(&response) {
        return Ok(t.clone());
    }
    let table = Arc::new(ResponseTable::build(response)?);
    cache
        .lock()
        .unwrap()
        .entry(response)
        .or_insert(table.clone());
    Ok(table)
}

pub fn cv_response(k: u32, chi: f64) -> Result<f64> {
    Ok(response_table(Response::Cv(k))?.eval(chi))
}

pub fn dv_response(k: u32, c: f64) -> Result<f64> {
    Ok(response_table(Response::Dv(k))?.eval(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackConfig {
    pub tau: f64,
    /// Transport delay of the control signal.
    pub t0: f64,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub alpha: f64,
    pub target: f64,
    pub chi0: f64,
    pub dt: f64,
    pub horizon: f64,
    pub response: Response,
    /// Controller switch-on time. `None` starts the controller at `t = 0`, so its
    /// first effect arrives at `t0`.
    pub activation: Option<f64>,
}

impl FeedbackConfig {
    /// Settings of the CV/DV contrast run, starting at the saturation point.
    pub fn contrast(response: Response) -> Result<Self> {
        let chi0 = response_table(response)?.saturation;
        Ok(FeedbackConfig {
            tau: 1.0,
            t0: 0.02,
            kp: 2.2,
            ki: 100.0,
            kd: 0.01,
            alpha: 1.0,
            target: 0.95,
            chi0,
            dt: DEFAULT_DT,
            horizon: 10.0,
            response,
            activation: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.tau,
            self.t0,
            self.kp,
            self.ki,
            self.kd,
            self.alpha,
            self.dt,
            self.horizon,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(domain("non-finite feedback parameter"));
        }
        if self.tau <= 0.0 || self.dt <= 0.0 || self.t0 < 0.0 {
            return Err(domain(format!(
                "need tau > 0, dt > 0, T0 >= 0 (got {}, {}, {})",
                self.tau, self.dt, self.t0
            )));
        }
        if self.horizon <= self.t0 {
            return Err(domain(format!(
                "horizon {} must exceed T0 {}",
                self.horizon, self.t0
            )));
        }
        if !(self.target > 0.0 && self.target < 1.0) {
            return Err(domain(format!("target {} outside (0, 1)", self.target)));
        }
        if !(0.0..=1.0).contains(&self.chi0) {
            return Err(domain(format!("chi0 {} outside [0, 1]", self.chi0)));
        }
        if let Some(a) = self.activation {
            if !(a >= 0.0 && a < self.horizon) {
                return Err(domain(format!("activation {a} outside [0, horizon)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub chi: f64,
    pub output: f64,
    pub u: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub target: f64,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,chi,output,u,error\n");
        for p in &self.samples {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                p.t, p.chi, p.output, p.u, p.error
            ));
        }
        s
    }
}

/// Controller output at `s`, interpolated between stored steps and zero for `s <= 0`.
fn delayed(history: &[f64], s: f64, dt: f64) -> f64 {
    if s <= 0.0 || history.is_empty() {
        return 0.0;
    }
    let x = s / dt;
    let i = x.floor() as usize;
    if i + 1 >= history.len() {
        return *history.last().unwrap();
    }
    let w = x - i as f64;
    history[i] * (1.0 - w) + history[i + 1] * w
}

pub fn simulate(cfg: &FeedbackConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let table = response_table(cfg.response)?;
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let on = cfg.activation.unwrap_or(0.0);
    let dt = cfg.dt;

    let mut samples = Vec::with_capacity(steps + 1);
    let mut history: Vec<f64> = Vec::with_capacity(steps + 1);
    let mut chi = cfg.chi0;
    let (mut integral, mut prev_err) = (0.0, None::<f64>);

    for i in 0..=steps {
        let t = i as f64 * dt;
        let output = table.eval(chi);
        let err = cfg.target - output;
        let active = t > on;
        if active {
            if let Some(pe) = prev_err.filter(|_| (i as f64 - 1.0) * dt > on) {
                integral += 0.5 * dt * (pe + err);
            }
        }
        let deriv = prev_err.map_or(0.0, |pe| (err - pe) / dt);
        let u = if active {
            cfg.alpha * (cfg.kp * err + cfg.ki * integral + cfg.kd * deriv)
        } else {
            0.0
        };
        history.push(u);
        prev_err = Some(err);
        samples.push(Sample {
            t,
            chi,
            output,
            u,
            error: err,
        });
        if i == steps {
            break;
        }

        let f = |s: f64, x: f64| -x / cfg.tau + delayed(&history, s - cfg.t0, dt);
        let k1 = f(t, chi);
        let k2 = f(t + 0.5 * dt, chi + 0.5 * dt * k1);
        let k3 = f(t + 0.5 * dt, chi + 0.5 * dt * k2);
        let k4 = f(t + dt, chi + dt * k3);
        let next = chi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let delta = next - chi;
        if !delta.is_finite() || delta.abs() > MAX_STEP_CHANGE {
            return Err(Error::StepSize { t, delta });
        }
        chi = next.clamp(0.0, 1.0);
    }
    Ok(Trajectory {
        dt,
        target: cfg.target,
        samples,
    })
}

/// Trapezoidal `∫ χ dt` over the samples where `χ > chi_target`.
pub fn resource_waste(traj: &Trajectory, chi_target: f64) -> Result<f64> {
    if !(chi_target > 0.0 && chi_target < 1.0) {
        return Err(domain(format!("chi_target {chi_target} outside (0, 1)")));
    }
    Ok(traj
        .samples
        .windows(2)
        .filter(|w| w[0].chi > chi_target && w[1].chi > chi_target)
        .map(|w| 0.5 * (w[1].t - w[0].t) * (w[0].chi + w[1].chi))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityKind {
    Stabilized,
    Oscillating,
    Collapsed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub kind: StabilityKind,
    /// First time after which `|error| < band` holds to the end of the run.
    pub settling_time: Option<f64>,
    /// Number of drops of the output from a positive value to zero.
    pub threshold_crossings: usize,
    pub max_overshoot: f64,
}

pub fn classify_stability(traj: &Trajectory, band: f64, window: f64) -> Result<StabilityReport> {
    if !(band > 0.0 && band < 0.5) {
        return Err(domain(format!("band {band} outside (0, 0.5)")));
    }
    let s = &traj.samples;
    let end = s.last().ok_or_else(|| domain("empty trajectory"))?.t;
    if !(window > 0.0 && window < end) {
        return Err(domain(format!("window {window} must lie in (0, {end})")));
    }
    let tail = &s[s.partition_point(|p| p.t < end - window)..];
    let kind = if tail.iter().all(|p| p.error.abs() < band) {
        StabilityKind::Stabilized
    } else if tail.iter().all(|p| p.output == 0.0) {
        StabilityKind::Collapsed
    } else {
        StabilityKind::Oscillating
    };
    let settling_time = match s.iter().rposition(|p| p.error.abs() >= band) {
        None => Some(s[0].t),
        Some(i) if i + 1 < s.len() => Some(s[i + 1].t),
        Some(_) => None,
    };
    let threshold_crossings = s
        .windows(2)
        .filter(|w| w[0].output > 0.0 && w[1].output == 0.0)
        .count();
    let max_overshoot = s.iter().map(|p| p.output - traj.target).fold(0.0, f64::max);
    Ok(StabilityReport {
        kind,
        settling_time,
        threshold_crossings,
        max_overshoot,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    T0,
    Alpha,
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub report: StabilityReport,
}

pub fn parameter_sweep(
    base: &FeedbackConfig,
    axis: SweepAxis,
    values: &[f64],
    band: f64,
    window: f64,
) -> Result<Vec<SweepRow>> {
    values
        .par_iter()
        .map(|&value| {
            let mut cfg = *base;
            match axis {
                SweepAxis::T0 => cfg.t0 = value,
                SweepAxis::Alpha => cfg.alpha = value,
                SweepAxis::Target => cfg.target = value,
            }
            let traj = simulate(&cfg)?;
            Ok(SweepRow {
                value,
                report: classify_stability(&traj, band, window)?,
            })
        })
        .collect()
}
