//! Figure datasets in long `series,x,y` format with pinned grids.

use std::fmt::Write;

use negpt::bethe::{
    correlation_length, critical_point, depth_profile, finite_depth_sponge, finite_size_threshold,
    generalized_infinite_sponge, infinite_sponge, self_consistent_solution, sponge_from_branch,
    DEFAULT_CROSSING,
};
use negpt::det_rules::RuleParams;
use negpt::feedback::{response_table, simulate, FeedbackConfig, Response};
use negpt::solve::{linspace, logspace};
use negpt::{Error, Result};

pub const NAMES: &[&str] = &[
    "fig1b", "fig1c", "fig1d", "fig2a", "fig2b", "S2", "S3", "S4", "S6",
];

/// Feedback samples kept per preset trajectory.
const TRAJECTORY_STRIDE: usize = 10;
const SWEEP_STRIDE: usize = 100;

struct Table(String);

impl Table {
    fn new() -> Self {
        Table("series,x,y\n".into())
    }

    fn row(&mut self, series: &str, x: f64, y: f64) {
        writeln!(self.0, "{series},{x},{y}").unwrap();
    }
}

fn unit_grid() -> Vec<f64> {
    linspace(0.0, 1.0, 1001)
}

pub fn run(name: &str) -> Result<String> {
    let mut t = Table::new();
    match name {
        "fig1b" => fig1b(&mut t)?,
        "fig1c" => fig1c(&mut t)?,
        "fig1d" => fig1d(&mut t)?,
        "fig2a" => trajectory(&mut t, Response::Dv(3))?,
        "fig2b" => trajectory(&mut t, Response::Cv(3))?,
        "S2" => s2(&mut t)?,
        "S3" => s3(&mut t)?,
        "S4" => s4(&mut t)?,
        "S6" => s6(&mut t)?,
        other => {
            return Err(Error::Domain(format!(
                "unknown preset `{other}` (expected one of {})",
                NAMES.join(", ")
            )))
        }
    }
    Ok(t.0)
}

fn fig1b(t: &mut Table) -> Result<()> {
    for k in 3..=6 {
        for chi in unit_grid() {
            t.row(&format!("k={k}"), chi, infinite_sponge(k, chi)?);
        }
        let cp = critical_point(k)?;
        for d in logspace(1e-6, 1e-3, 30) {
            t.row(
                &format!("scaling k={k}"),
                d,
                infinite_sponge(k, cp.chi_th + d)? - cp.x_plus,
            );
        }
    }
    Ok(())
}

fn fig1c(t: &mut Table) -> Result<()> {
    for chi in [0.85, 0.86, 0.865, 0.866] {
        for (i, x) in depth_profile(3, chi, 2000)?.into_iter().enumerate() {
            t.row(&format!("chi={chi}"), (i + 1) as f64, x);
        }
    }
    Ok(())
}

fn fig1d(t: &mut Table) -> Result<()> {
    let cp = critical_point(3)?;
    for d in logspace(1e-5, 1e-2, 20) {
        t.row(
            "k=3",
            d,
            correlation_length(3, cp.chi_th - d, DEFAULT_CROSSING)?,
        );
    }
    Ok(())
}

fn trajectory(t: &mut Table, response: Response) -> Result<()> {
    let traj = simulate(&FeedbackConfig::contrast(response)?)?;
    for p in traj.samples.iter().step_by(TRAJECTORY_STRIDE) {
        t.row("chi", p.t, p.chi);
        t.row("output", p.t, p.output);
        t.row("u", p.t, p.u);
    }
    Ok(())
}

fn s2(t: &mut Table) -> Result<()> {
    for l in [10u64, 100, 1000] {
        for chi in unit_grid() {
            t.row(&format!("l={l}"), chi, finite_depth_sponge(3, l, chi)?);
        }
    }
    for chi in unit_grid() {
        t.row("infinite", chi, infinite_sponge(3, chi)?);
        if let Some(u) = self_consistent_solution(3, chi)?.nonphysical_u {
            t.row("nonphysical", chi, sponge_from_branch(3, u));
        }
    }
    Ok(())
}

fn s3(t: &mut Table) -> Result<()> {
    for l in [10u64, 20, 50, 100] {
        for chi in linspace(0.8, 0.95, 301) {
            t.row(&format!("l={l}"), chi, finite_depth_sponge(3, l, chi)?);
        }
    }
    let chi_th = critical_point(3)?.chi_th;
    for l in 8..=64u64 {
        t.row(
            "shift",
            l as f64,
            (finite_size_threshold(3, l)? - chi_th).abs(),
        );
    }
    Ok(())
}

fn s4(t: &mut Table) -> Result<()> {
    for eta_s in [0.8, 0.9, 1.0] {
        for eta_p in [0.5, 0.9, 1.0, 2f64.sqrt(), 1.5, 2.0] {
            let p = RuleParams::new(eta_s, eta_p)?;
            let series = format!("eta_s={eta_s} eta_p={eta_p:.4}");
            for chi in unit_grid() {
                t.row(&series, chi, generalized_infinite_sponge(3, chi, p)?);
            }
        }
    }
    Ok(())
}

fn s6(t: &mut Table) -> Result<()> {
    let study = |r: Response| -> Result<FeedbackConfig> {
        Ok(FeedbackConfig {
            kp: 2.0,
            ki: 30.0,
            kd: 0.007,
            ..FeedbackConfig::contrast(r)?
        })
    };
    let mut runs = Vec::new();
    for (tag, r) in [("cv", Response::Cv(3)), ("dv", Response::Dv(3))] {
        for t0 in [0.02, 0.1, 0.32] {
            runs.push((format!("{tag} T0={t0}"), FeedbackConfig { t0, ..study(r)? }));
        }
        for alpha in [0.2, 1.0, 1.2] {
            runs.push((
                format!("{tag} alpha={alpha}"),
                FeedbackConfig {
                    t0: 0.05,
                    alpha,
                    ..study(r)?
                },
            ));
        }
    }
    let table = response_table(Response::Cv(3))?;
    for target in [0.921, 0.982, 0.996] {
        let cfg = FeedbackConfig {
            kp: 5.0,
            ki: 70.0,
            kd: 0.007,
            tau: 20.0,
            t0: 0.02,
            target,
            chi0: table.inverse(target)?,
            ..FeedbackConfig::contrast(Response::Cv(3))?
        };
        runs.push((format!("cv target={target}"), cfg));
    }
    for (series, cfg) in runs {
        for p in simulate(&cfg)?.samples.iter().step_by(SWEEP_STRIDE) {
            t.row(&series, p.t, p.output);
        }
    }
    Ok(())
}
