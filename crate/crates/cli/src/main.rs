#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod presets;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use negpt::baselines::{
    conpt_critical, conpt_sponge_bethe, interdependent_branch, interdependent_critical,
    interdependent_expansion, negpt_expansion,
};
use negpt::bethe::{
    beta_fit, correlation_fit, critical_point, generalized_infinite_sponge,
    generalized_phase_classify, saturation_exponent, shift_fit, BetheSpec, Depth, DEFAULT_CROSSING,
};
use negpt::det_rules::RuleParams;
use negpt::feedback::{
    classify_stability, parameter_sweep, resource_waste, response_table, simulate, FeedbackConfig,
    Response, SweepAxis, DEFAULT_BAND, DEFAULT_WINDOW,
};
use negpt::locc::{
    amp_matrix, gpovm_swap, loss_matrix, tensor_stochasticity, verify_concentration, DEFAULT_N_MAX,
};
use negpt::sp_reduce::{kelvin_sponge, reduce_series_parallel, wheatstone_sponge, QNGraph};

#[derive(Parser)]
#[command(name = "negpt", version, about = "Negativity percolation laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sponge-crossing values for a topology.
    Sponge(SpongeArgs),
    /// Bethe-lattice critical point and exponent fits.
    Critical(CriticalArgs),
    /// Delayed PID feedback simulation.
    Feedback(FeedbackArgs),
    /// LOCC conversion checks.
    #[command(subcommand)]
    Locc(LoccCommand),
    /// Classical and DV comparison models.
    #[command(subcommand)]
    Baseline(BaselineCommand),
    /// Emit a named figure dataset.
    Preset(PresetArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Write data here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct SpongeArgs {
    /// Bethe lattice of this degree.
    #[arg(long)]
    bethe: Option<u32>,
    /// Bethe depth, an integer or `inf`.
    #[arg(long, default_value = "inf")]
    depth: String,
    #[arg(long)]
    chain: Option<usize>,
    /// Bundle of this many parallel links.
    #[arg(long)]
    parallel: Option<usize>,
    #[arg(long)]
    wheatstone: bool,
    #[arg(long)]
    kelvin: bool,
    /// Edge list or JSON graph file.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    chi: Option<f64>,
    /// `start:stop:step`.
    #[arg(long)]
    chi_grid: Option<String>,
    #[arg(long)]
    eta_s: Option<f64>,
    #[arg(long)]
    eta_p: Option<f64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fit {
    Beta,
    Zeta,
    Shift,
    Saturation,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct CriticalArgs {
    #[arg(long, default_value_t = 3)]
    k: u32,
    #[arg(long, value_enum)]
    fit: Option<Fit>,
    /// Depth range `lo:hi` for the shift fit.
    #[arg(long, default_value = "8:64")]
    depths: String,
    #[arg(long, default_value_t = DEFAULT_CROSSING)]
    crossing: f64,
    #[arg(long)]
    eta_s: Option<f64>,
    #[arg(long)]
    eta_p: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeedbackPreset {
    Fig2Cv,
    Fig2Dv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Network {
    Cv,
    Dv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    T0,
    Alpha,
    Target,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct FeedbackArgs {
    #[arg(long, value_enum)]
    preset: Option<FeedbackPreset>,
    #[arg(long, value_enum, default_value = "cv")]
    response: Network,
    #[arg(long, default_value_t = 3)]
    k: u32,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    kp: Option<f64>,
    #[arg(long)]
    ki: Option<f64>,
    #[arg(long)]
    kd: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    target: Option<f64>,
    #[arg(long)]
    chi0: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Controller switch-on time, separate from the delay.
    #[arg(long)]
    activation: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_BAND)]
    band: f64,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: f64,
    #[arg(long, value_enum)]
    sweep: Option<Axis>,
    /// Comma-separated sweep values.
    #[arg(long)]
    values: Option<String>,
    /// Add resource waste above the link value that meets the target.
    #[arg(long)]
    waste: bool,
    /// Keep every n-th trajectory sample.
    #[arg(long, default_value_t = 1)]
    every: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Subcommand)]
enum LoccCommand {
    /// Two-TMSVS concentration through loss and amplifier matrices.
    VerifyConcentration(ConcentrationArgs),
    /// Row-sum test of the truncated loss-amplifier tensor.
    Stochasticity(StochasticityArgs),
    /// Swapping through a GPOVM with seed squeezing `r0`.
    Swap(SwapArgs),
}

#[derive(Args)]
#[command(args_override_self = true)]
struct ConcentrationArgs {
    #[arg(long)]
    r1: f64,
    #[arg(long)]
    r2: f64,
    #[arg(long, default_value_t = DEFAULT_N_MAX)]
    nmax: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct StochasticityArgs {
    #[arg(long)]
    eta: f64,
    #[arg(long)]
    gain: f64,
    #[arg(long, default_value_t = DEFAULT_N_MAX)]
    nmax: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct SwapArgs {
    #[arg(long)]
    r1: f64,
    #[arg(long)]
    r2: f64,
    /// Seed squeezing; `inf` is the ideal Bell measurement.
    #[arg(long, default_value = "inf")]
    r0: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BaselineCommand {
    /// Fully interdependent Bethe lattices.
    Interdependent(InterdependentArgs),
    /// Concurrence percolation on the Bethe lattice.
    Conpt(ConptArgs),
    /// Exact value against its first- and second-order expansions.
    Expansion(ExpansionArgs),
}

#[derive(Args)]
#[command(args_override_self = true)]
struct InterdependentArgs {
    #[arg(long, default_value_t = 3)]
    k: u32,
    #[arg(long = "M", alias = "m", default_value_t = 2)]
    m: u32,
    #[arg(long)]
    p_grid: Option<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct ConptArgs {
    #[arg(long, default_value_t = 3)]
    k: u32,
    #[arg(long)]
    c_grid: Option<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct ExpansionArgs {
    #[arg(long, default_value_t = 3)]
    k: u32,
    /// Interdependence order; omit for the negativity model.
    #[arg(long = "M", alias = "m")]
    m: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct PresetArgs {
    /// One of fig1b, fig1c, fig1d, fig2a, fig2b, S2, S3, S4, S6.
    name: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Numeric(String),
}

impl From<negpt::Error> for Failure {
    fn from(e: negpt::Error) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}

type Run = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn emit(out: &Option<PathBuf>, data: &str) -> Run {
    match out {
        Some(path) => fs::write(path, data)
            .map_err(|e| usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{data}");
            Ok(())
        }
    }
}

fn json_line(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string(value).expect("report types serialize");
    s.push('\n');
    s
}

/// `start:stop:step`, inclusive of `stop` up to rounding.
fn parse_grid(spec: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("bad grid `{spec}`, expected start:stop:step")))?;
    let [start, stop, step] = parts[..] else {
        return Err(usage(format!(
            "bad grid `{spec}`, expected start:stop:step"
        )));
    };
    if !(step > 0.0) || stop < start {
        return Err(usage(format!(
            "bad grid `{spec}`: need step > 0 and stop >= start"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| (start + i as f64 * step).min(stop))
        .collect())
}

fn parse_list(spec: &str) -> Result<Vec<f64>, Failure> {
    spec.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("bad number `{v}` in `{spec}`")))
        })
        .collect()
}

fn rule_params(eta_s: Option<f64>, eta_p: Option<f64>) -> Result<Option<RuleParams>, Failure> {
    if eta_s.is_none() && eta_p.is_none() {
        return Ok(None);
    }
    Ok(Some(RuleParams::new(
        eta_s.unwrap_or(1.0),
        eta_p.unwrap_or(1.0),
    )?))
}

fn scan_output(output: &Output, x_name: &str, y_name: &str, rows: &[(f64, f64)]) -> Run {
    let text = match output.format {
        Format::Csv => {
            let mut s = format!("{x_name},{y_name}\n");
            for (x, y) in rows {
                s.push_str(&format!("{x},{y}\n"));
            }
            s
        }
        Format::Json => rows
            .iter()
            .map(|(x, y)| json_line(&json!({ x_name: x, y_name: y })))
            .collect(),
    };
    emit(&output.out, &text)
}

fn with_uniform_chi(g: &QNGraph, chi: f64) -> negpt::Result<QNGraph> {
    let mut out = QNGraph::new();
    for link in g.links() {
        out.add_link(g.name(link.u), g.name(link.v), chi)?;
    }
    for &s in g.source() {
        out.add_source(g.name(s));
    }
    for &t in g.target() {
        out.add_target(g.name(t));
    }
    Ok(out)
}

fn cmd_sponge(a: SpongeArgs) -> Run {
    let chosen = [
        a.bethe.is_some(),
        a.chain.is_some(),
        a.parallel.is_some(),
        a.wheatstone,
        a.kelvin,
        a.graph.is_some(),
    ]
    .iter()
    .filter(|&&b| b)
    .count();
    if chosen != 1 {
        return Err(usage(
            "choose exactly one of --bethe, --chain, --parallel, --wheatstone, --kelvin, --graph",
        ));
    }
    let params = rule_params(a.eta_s, a.eta_p)?;
    if params.is_some() && (a.bethe.is_none() || a.depth != "inf") {
        return Err(usage(
            "--eta-s/--eta-p apply to --bethe with --depth inf only",
        ));
    }

    if let Some(path) = &a.graph {
        let text = fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        let g = if path.extension().is_some_and(|e| e == "json") {
            QNGraph::parse_json(&text)?
        } else {
            QNGraph::parse_edge_list(&text)?
        };
        let rows = match (&a.chi, &a.chi_grid) {
            (None, None) => vec![(f64::NAN, reduce_series_parallel(&g)?)],
            _ => {
                let chis = chi_values(&a)?;
                let mut rows = Vec::with_capacity(chis.len());
                for chi in chis {
                    rows.push((chi, reduce_series_parallel(&with_uniform_chi(&g, chi)?)?));
                }
                rows
            }
        };
        return scan_output(&a.output, "chi", "x_sc", &rows);
    }

    let chis = chi_values(&a)?;
    let values: Vec<f64> = if let Some(k) = a.bethe {
        let depth = match a.depth.as_str() {
            "inf" => Depth::Infinite,
            d => Depth::Finite(d.parse().map_err(|_| usage(format!("bad depth `{d}`")))?),
        };
        match params {
            Some(p) => chis
                .iter()
                .map(|&c| generalized_infinite_sponge(k, c, p))
                .collect::<negpt::Result<_>>()?,
            None => BetheSpec::new(k, depth)?.scan(&chis)?,
        }
    } else {
        let f = |chi: f64| -> negpt::Result<f64> {
            if let Some(n) = a.chain {
                reduce_series_parallel(&QNGraph::chain(n, chi)?)
            } else if let Some(k) = a.parallel {
                reduce_series_parallel(&QNGraph::bundle(k, chi)?)
            } else if a.wheatstone {
                wheatstone_sponge(chi)
            } else {
                kelvin_sponge(chi)
            }
        };
        chis.iter().map(|&c| f(c)).collect::<negpt::Result<_>>()?
    };
    let rows: Vec<(f64, f64)> = chis.into_iter().zip(values).collect();
    scan_output(&a.output, "chi", "x_sc", &rows)
}

fn chi_values(a: &SpongeArgs) -> Result<Vec<f64>, Failure> {
    match (&a.chi, &a.chi_grid) {
        (Some(c), None) => Ok(vec![*c]),
        (None, Some(g)) => parse_grid(g),
        (None, None) => Err(usage("need --chi or --chi-grid")),
        (Some(_), Some(_)) => Err(usage("--chi and --chi-grid are exclusive")),
    }
}

fn cmd_critical(a: CriticalArgs) -> Run {
    let mut report = serde_json::Map::new();
    report.insert("k".into(), json!(a.k));
    if let Some(p) = rule_params(a.eta_s, a.eta_p)? {
        report.insert("params".into(), json!(p));
        report.insert("phase".into(), json!(generalized_phase_classify(a.k, p)?));
    } else {
        let cp = critical_point(a.k)?;
        report.insert("chi_th".into(), json!(cp.chi_th));
        report.insert("x_plus".into(), json!(cp.x_plus));
        report.insert("x1_plus".into(), json!(cp.x1_plus));
    }
    if let Some(fit) = a.fit {
        let (name, f) = match fit {
            Fit::Beta => ("beta", beta_fit(a.k)?),
            Fit::Zeta => ("z_nu", correlation_fit(a.k, a.crossing)?),
            Fit::Saturation => ("saturation", saturation_exponent(a.k)?),
            Fit::Shift => {
                let (lo, hi) = a
                    .depths
                    .split_once(':')
                    .and_then(|(l, h)| Some((l.parse::<u64>().ok()?, h.parse::<u64>().ok()?)))
                    .filter(|(l, h)| l < h)
                    .ok_or_else(|| usage(format!("bad depth range `{}`", a.depths)))?;
                ("shift", shift_fit(a.k, &(lo..=hi).collect::<Vec<_>>())?)
            }
        };
        report.insert("fit".into(), json!({ "kind": name, "result": f }));
    }
    emit(&a.out, &json_line(&report))
}

fn feedback_config(a: &FeedbackArgs) -> Result<FeedbackConfig, Failure> {
    let response = match (a.preset, a.response) {
        (Some(FeedbackPreset::Fig2Cv), _) => Response::Cv(3),
        (Some(FeedbackPreset::Fig2Dv), _) => Response::Dv(3),
        (None, Network::Cv) => Response::Cv(a.k),
        (None, Network::Dv) => Response::Dv(a.k),
    };
    let mut c = FeedbackConfig::contrast(response)?;
    let set = |dst: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut c.tau, a.tau);
    set(&mut c.t0, a.t0);
    set(&mut c.kp, a.kp);
    set(&mut c.ki, a.ki);
    set(&mut c.kd, a.kd);
    set(&mut c.alpha, a.alpha);
    set(&mut c.target, a.target);
    set(&mut c.chi0, a.chi0);
    set(&mut c.dt, a.dt);
    set(&mut c.horizon, a.horizon);
    if a.activation.is_some() {
        c.activation = a.activation;
    }
    c.validate()?;
    Ok(c)
}

fn cmd_feedback(a: FeedbackArgs) -> Run {
    let cfg = feedback_config(&a)?;
    if a.every == 0 {
        return Err(usage("--every must be >= 1"));
    }
    if let Some(axis) = a.sweep {
        let values = parse_list(
            a.values
                .as_deref()
                .ok_or_else(|| usage("--sweep needs --values"))?,
        )?;
        let axis = match axis {
            Axis::T0 => SweepAxis::T0,
            Axis::Alpha => SweepAxis::Alpha,
            Axis::Target => SweepAxis::Target,
        };
        let rows = parameter_sweep(&cfg, axis, &values, a.band, a.window)?;
        let text: String = rows.iter().map(json_line).collect();
        return emit(&a.output.out, &text);
    }
    let traj = simulate(&cfg)?;
    let report = classify_stability(&traj, a.band, a.window)?;
    let mut summary = json!({ "config": cfg, "report": report });
    if a.waste {
        let chi_target = response_table(cfg.response)?.inverse(cfg.target)?;
        summary["chi_target"] = json!(chi_target);
        summary["resource_waste"] = json!(resource_waste(&traj, chi_target)?);
    }
    match a.output.format {
        Format::Json => emit(&a.output.out, &json_line(&summary)),
        Format::Csv => {
            eprintln!("{summary}");
            let mut s = String::from("t,chi,output,u,error\n");
            for p in traj.samples.iter().step_by(a.every) {
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    p.t, p.chi, p.output, p.u, p.error
                ));
            }
            emit(&a.output.out, &s)
        }
    }
}

fn cmd_locc(c: LoccCommand) -> Run {
    match c {
        LoccCommand::VerifyConcentration(a) => {
            let rep = verify_concentration(a.r1, a.r2, a.nmax)?;
            emit(&a.out, &json_line(&rep))?;
            if rep.pass {
                Ok(())
            } else {
                Err(Failure::Numeric("concentration check did not pass".into()))
            }
        }
        LoccCommand::Stochasticity(a) => {
            let rep =
                tensor_stochasticity(&loss_matrix(a.eta, a.nmax)?, &amp_matrix(a.gain, a.nmax)?);
            emit(&a.out, &json_line(&rep))
        }
        LoccCommand::Swap(a) => emit(&a.out, &json_line(&gpovm_swap(a.r1, a.r2, a.r0)?)),
    }
}

fn cmd_baseline(c: BaselineCommand) -> Run {
    match c {
        BaselineCommand::Interdependent(a) => match &a.p_grid {
            Some(g) => {
                let mut rows = Vec::new();
                for p in parse_grid(g)? {
                    rows.push((p, interdependent_branch(a.k, a.m, p)?));
                }
                scan_output(&a.output, "p", "branch", &rows)
            }
            None => {
                let (p_th, branch) = interdependent_critical(a.k, a.m)?;
                emit(
                    &a.output.out,
                    &json_line(&json!({ "k": a.k, "M": a.m, "p_th": p_th, "branch": branch })),
                )
            }
        },
        BaselineCommand::Conpt(a) => match &a.c_grid {
            Some(g) => {
                let mut rows = Vec::new();
                for c in parse_grid(g)? {
                    rows.push((c, conpt_sponge_bethe(a.k, c)?));
                }
                scan_output(&a.output, "c", "c_sc", &rows)
            }
            None => {
                let cc = conpt_critical(a.k)?;
                emit(
                    &a.output.out,
                    &json_line(&json!({ "k": a.k, "c_th": cc.c_th, "c_sat": cc.c_sat })),
                )
            }
        },
        BaselineCommand::Expansion(a) => {
            let e = match a.m {
                Some(m) => interdependent_expansion(a.k, m)?,
                None => negpt_expansion(a.k)?,
            };
            emit(
                &a.out,
                &json_line(&json!({ "check": e, "remainder": e.remainder() })),
            )
        }
    }
}

fn dispatch(cli: Cli) -> Run {
    match cli.command {
        Command::Sponge(a) => cmd_sponge(a),
        Command::Critical(a) => cmd_critical(a),
        Command::Feedback(a) => cmd_feedback(a),
        Command::Locc(c) => cmd_locc(c),
        Command::Baseline(c) => cmd_baseline(c),
        Command::Preset(a) => emit(&a.out, &presets::run(&a.name)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match config::expand(std::env::args().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
