//! Command-line front end. Everything returns a [`CommandOutcome`] so the
//! commands can be driven from tests without a process boundary.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::catalog::{builtin, builtin_names, Scenario};
use crate::flow::{gauge_sides, n_bar_half_weight, reduction_report, FlowTensorSet, Residual};
use crate::geometry::Geometry;
use crate::identities::run_suite;
use crate::integrator::{integrate, IntegratorConfig, SchemeRegistry, Termination};
use crate::scenario_file::parse_scenario;
use crate::tensor::Tensor;
use crate::trajectory_io::{write_trajectory, TrajectoryFormat};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const TOL_ENV: &str = "HERMIFLOW_TOL";
pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_RANDOM: usize = 10;
pub const REDUCE_TOL: f64 = 1e-10;
pub const GAUGE_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(
    name = "hermiflow",
    version,
    about = "Almost Hermitian curvature flow on left-invariant geometries"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the tensor-identity suite on a scenario plus seeded random pairs.
    Verify {
        /// Builtin name or scenario file.
        scenario: String,
        /// Number of random compatible pairs on the same algebra.
        #[arg(long, default_value_t = DEFAULT_RANDOM)]
        random: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Residual tolerance (default: $HERMIFLOW_TOL, else 1e-10).
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Check the almost Kahler and integrable reductions of the flow.
    Reduce { scenario: String },
    /// Check the Lee-form gauge identity.
    Gauge { scenario: String },
    /// Integrate the flow and write the trajectory.
    Flow {
        scenario: String,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        /// Use the step-halving scheme (same as --scheme rk4-halving).
        #[arg(long)]
        adaptive: bool,
        /// Integration scheme by registered name.
        #[arg(long)]
        scheme: Option<String>,
        /// Trajectory output file; `-` writes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv or json; inferred from the --out extension when omitted.
        #[arg(long)]
        format: Option<TrajectoryFormat>,
        /// Highest derivative order in the diagnostics.
        #[arg(long, default_value_t = 2)]
        kmax: usize,
        /// Record every n-th step.
        #[arg(long, default_value_t = 10)]
        stride: usize,
        #[arg(long, default_value_t = 1e6)]
        blowup_threshold: f64,
        #[arg(long, default_value_t = 1e-8)]
        drift_tol: f64,
    },
}

impl clap::ValueEnum for TrajectoryFormat {
    fn value_variants<'a>() -> &'a [Self] {
        &[TrajectoryFormat::Csv, TrajectoryFormat::Json]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            TrajectoryFormat::Csv => "csv",
            TrajectoryFormat::Json => "json",
        }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    /// 0 all checks passed, 1 a check failed or the run stopped early, 2 usage or input error.
    pub exit_code: i32,
    pub report: String,
    pub json: Option<serde_json::Value>,
}

impl CommandOutcome {
    fn input_error(message: impl Into<String>) -> Self {
        let mut report = message.into();
        if !report.ends_with('\n') {
            report.push('\n');
        }
        CommandOutcome {
            exit_code: 2,
            report,
            json: None,
        }
    }
}

/// Parse arguments and run. `env_tol` is the raw value of `HERMIFLOW_TOL`.
pub fn run_args<I, T>(args: I, env_tol: Option<String>) -> CommandOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, env_tol),
        Err(e) => CommandOutcome {
            exit_code: if e.use_stderr() { 2 } else { 0 },
            report: e.render().to_string(),
            json: None,
        },
    }
}

pub fn run(cli: Cli, env_tol: Option<String>) -> CommandOutcome {
    match cli.command {
        Command::Verify {
            scenario,
            random,
            seed,
            tol,
        } => {
            let tol = match resolve_tol(tol, env_tol) {
                Ok(t) => t,
                Err(msg) => return CommandOutcome::input_error(msg),
            };
            with_scenario(&scenario, |s| cmd_verify(s, random, seed, tol))
        }
        Command::Reduce { scenario } => with_scenario(&scenario, cmd_reduce),
        Command::Gauge { scenario } => with_scenario(&scenario, cmd_gauge),
        Command::Flow {
            scenario,
            dt,
            t_end,
            adaptive,
            scheme,
            out,
            format,
            kmax,
            stride,
            blowup_threshold,
            drift_tol,
        } => {
            let scheme = match (scheme, adaptive) {
                (Some(s), false) => s,
                (Some(s), true) if s == "rk4-halving" => s,
                (Some(_), true) => return CommandOutcome::input_error("--adaptive conflicts with --scheme"),
                (None, adaptive) => if adaptive { "rk4-halving" } else { "rk4" }.to_string(),
            };
            let config = IntegratorConfig {
                dt,
                t_end,
                scheme,
                blowup_threshold,
                drift_tolerance: drift_tol,
                sample_stride: stride,
                k_max: kmax,
                ..IntegratorConfig::default()
            };
            let format = format.unwrap_or_else(|| infer_format(out.as_deref()));
            with_scenario(&scenario, |s| cmd_flow(s, &config, out.as_deref(), format))
        }
    }
}

fn resolve_tol(flag: Option<f64>, env: Option<String>) -> Result<f64, String> {
    let tol = match (flag, env) {
        (Some(t), _) => t,
        (None, Some(raw)) => raw
            .trim()
            .parse::<f64>()
            .map_err(|_| format!("{TOL_ENV}='{raw}' is not a number"))?,
        (None, None) => DEFAULT_TOL,
    };
    if tol > 0.0 && tol.is_finite() {
        Ok(tol)
    } else {
        Err(format!("tolerance must be positive and finite, got {tol}"))
    }
}

fn infer_format(out: Option<&Path>) -> TrajectoryFormat {
    match out.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("json") => TrajectoryFormat::Json,
        _ => TrajectoryFormat::Csv,
    }
}

/// A builtin name, else a file path.
pub fn load_scenario(reference: &str) -> Result<Scenario, String> {
    if builtin_names().contains(&reference) {
        return builtin(reference).map_err(|e| e.to_string());
    }
    let path = Path::new(reference);
    if !path.exists() {
        return Err(format!(
            "'{reference}' is neither a builtin scenario nor a file; builtins: {}",
            builtin_names().join(", ")
        ));
    }
    let text = std::fs::read_to_string(path).map_err(|e| format!("{reference}: {e}"))?;
    parse_scenario(&text).map_err(|e| format!("{reference}: {e}"))
}

fn with_scenario(reference: &str, f: impl FnOnce(&Scenario) -> CommandOutcome) -> CommandOutcome {
    match load_scenario(reference) {
        Ok(s) => f(&s),
        Err(msg) => CommandOutcome::input_error(msg),
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn header(s: &Scenario) -> String {
    format!(
        "scenario {} (algebra {}, dim {}, class {})\n",
        s.label,
        s.algebra.name(),
        s.algebra.dim(),
        s.expected_class
    )
}

pub fn cmd_verify(s: &Scenario, random: usize, seed: u64, tol: f64) -> CommandOutcome {
    let summary = run_suite(&s.algebra, &s.pair, random, seed);
    let mut report = header(s);
    let _ = writeln!(
        report,
        "pairs: scenario + {random} random (seed {seed}), tolerance {tol:e}"
    );
    let width = summary.worst.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut rows = Vec::new();
    for r in &summary.worst {
        let pass = r.value <= tol;
        let _ = writeln!(report, "  {}  {:width$}  {:.3e}", verdict(pass), r.name, r.value);
        rows.push(json!({"name": r.name, "worst": r.value, "pass": pass}));
    }
    let failures = summary.failures(tol).len();
    let pass = failures == 0;
    let _ = writeln!(
        report,
        "result: {} ({} identities, {failures} failing, worst {:.3e})",
        verdict(pass),
        summary.worst.len(),
        summary.max()
    );
    CommandOutcome {
        exit_code: if pass { 0 } else { 1 },
        report,
        json: Some(json!({
            "command": "verify",
            "scenario": s.label,
            "random": random,
            "seed": seed,
            "tol": tol,
            "residuals": rows,
            "pass": pass,
        })),
    }
}

fn residual_block(report: &mut String, title: &str, rows: &[Residual], tol: f64) -> Vec<serde_json::Value> {
    let _ = writeln!(report, "{title}");
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
    rows.iter()
        .map(|r| {
            let pass = r.value <= tol;
            let _ = writeln!(report, "  {}  {:width$}  {:.3e}", verdict(pass), r.name, r.value);
            json!({"name": r.name, "value": r.value, "pass": pass})
        })
        .collect()
}

pub fn cmd_reduce(s: &Scenario) -> CommandOutcome {
    let geo = Geometry::new(&s.algebra, &s.pair, 2);
    let set = FlowTensorSet::assemble(&geo);
    let rep = reduction_report(&geo, &set);
    let mut report = header(s);
    let _ = writeln!(report, "|d omega| = {:.3e}, |N| = {:.3e}", rep.norm_d_omega, rep.norm_n);
    let symplectic = rep
        .symplectic
        .as_ref()
        .map(|rows| residual_block(&mut report, "d omega = 0 branch:", rows, REDUCE_TOL));
    let integrable = rep
        .integrable
        .as_ref()
        .map(|rows| residual_block(&mut report, "N = 0 branch:", rows, REDUCE_TOL));
    let pass = rep.passes(REDUCE_TOL);
    if rep.applies() {
        let _ = writeln!(report, "result: {} (worst {:.3e})", verdict(pass), rep.worst());
    } else {
        let _ = writeln!(report, "result: no branch applies (d omega and N both nonzero)");
    }
    CommandOutcome {
        exit_code: if pass { 0 } else { 1 },
        report,
        json: Some(json!({
            "command": "reduce",
            "scenario": s.label,
            "norm_d_omega": rep.norm_d_omega,
            "norm_N": rep.norm_n,
            "symplectic": symplectic,
            "integrable": integrable,
            "applies": rep.applies(),
            "pass": pass,
        })),
    }
}

pub fn cmd_gauge(s: &Scenario) -> CommandOutcome {
    let geo = Geometry::new(&s.algebra, &s.pair, 2);
    let set = FlowTensorSet::assemble(&geo);
    let (lhs, rhs) = gauge_sides(&geo, &set);
    let residual = lhs.max_abs_diff(&rhs);
    let half_rhs =
        Tensor::combine(&[(1.0, &rhs), (-1.0, &set.n_bar), (1.0, &n_bar_half_weight(&geo))]).expect("bilinear forms");
    let half = lhs.max_abs_diff(&half_rhs);
    let pass = residual <= GAUGE_TOL;
    let mut report = header(s);
    let _ = writeln!(
        report,
        "  {}  L_theta J - (Delta J + Q + R + K + Nbar)  {residual:.3e}",
        verdict(pass)
    );
    let _ = writeln!(report, "  info  same with the -1/2 weight in Nbar        {half:.3e}");
    let _ = writeln!(report, "result: {} (tolerance {GAUGE_TOL:e})", verdict(pass));
    CommandOutcome {
        exit_code: if pass { 0 } else { 1 },
        report,
        json: Some(json!({
            "command": "gauge",
            "scenario": s.label,
            "residual": residual,
            "half_weight_residual": half,
            "pass": pass,
        })),
    }
}

pub fn cmd_flow(
    s: &Scenario,
    config: &IntegratorConfig,
    out: Option<&Path>,
    format: TrajectoryFormat,
) -> CommandOutcome {
    if let Err(e) = config
        .validate()
        .and_then(|_| SchemeRegistry::default().build(config).map(|_| ()))
    {
        return CommandOutcome::input_error(e.to_string());
    }
    let traj = match integrate(s, config) {
        Ok(t) => t,
        Err(e) => return CommandOutcome::input_error(e.to_string()),
    };
    let text = write_trajectory(&traj, format);
    let mut report = String::new();
    match out {
        Some(p) if p == Path::new("-") => report.push_str(&text),
        Some(p) => {
            if let Err(e) = std::fs::write(p, &text) {
                return CommandOutcome::input_error(format!("{}: {e}", p.display()));
            }
        }
        None => {}
    }
    report.push_str(&header(s));
    let last = traj.last();
    let _ = writeln!(
        report,
        "scheme {}, dt {:e}, {} steps, {} samples",
        config.scheme,
        config.dt,
        traj.steps,
        traj.samples.len()
    );
    let _ = writeln!(report, "status: {}", traj.status);
    let _ = writeln!(
        report,
        "final t = {}: |Rm| {:.6e}  |DJ| {:.6e}  |N| {:.3e}  |d omega| {:.3e}  compat {:.3e}  J^2+1 {:.3e}  min eig g {:.6e}",
        last.t, last.rm, last.dj, last.norm_n, last.norm_domega, last.compat_residual, last.jsq_residual, last.min_eig_g
    );
    let completed = matches!(traj.status, Termination::Completed);
    CommandOutcome {
        exit_code: if completed { 0 } else { 1 },
        report,
        json: Some(json!({
            "command": "flow",
            "scenario": s.label,
            "status": traj.status.code(),
            "steps": traj.steps,
            "t_final": last.t,
        })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn go(args: &[&str]) -> CommandOutcome {
        let mut v = vec!["hermiflow"];
        v.extend_from_slice(args);
        run_args(v, None)
    }

    #[test]
    fn tolerance_precedence() {
        assert_eq!(resolve_tol(None, None), Ok(DEFAULT_TOL));
        assert_eq!(resolve_tol(None, Some("1e-6".into())), Ok(1e-6));
        assert_eq!(resolve_tol(Some(1e-3), Some("1e-6".into())), Ok(1e-3));
        assert!(resolve_tol(None, Some("tight".into())).is_err());
        assert!(resolve_tol(Some(-1.0), None).is_err());
    }

    #[test]
    fn env_tolerance_reaches_verify() {
        let out = run_args(
            ["hermiflow", "verify", "flat_torus_4", "--random", "0"],
            Some("1e-4".into()),
        );
        assert_eq!(out.exit_code, 0);
        assert_eq!(out.json.unwrap()["tol"], 1e-4);
        let out = run_args(["hermiflow", "verify", "flat_torus_4"], Some("nope".into()));
        assert_eq!(out.exit_code, 2);
    }

    #[test]
    fn unknown_scenario_is_an_input_error() {
        let out = go(&["reduce", "no_such_thing"]);
        assert_eq!(out.exit_code, 2);
        assert!(out.report.contains("kodaira_thurston"));
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(go(&["flow"]).exit_code, 2);
        assert_eq!(go(&["flow", "flat_torus_4", "--dt", "fast"]).exit_code, 2);
        assert_eq!(go(&["flow", "flat_torus_4", "--dt", "-1"]).exit_code, 2);
        assert_eq!(go(&["flow", "flat_torus_4", "--scheme", "euler"]).exit_code, 2);
        assert_eq!(go(&["--help"]).exit_code, 0);
    }

    #[test]
    fn format_inference() {
        assert_eq!(infer_format(Some(Path::new("a.json"))), TrajectoryFormat::Json);
        assert_eq!(infer_format(Some(Path::new("a.csv"))), TrajectoryFormat::Csv);
        assert_eq!(infer_format(None), TrajectoryFormat::Csv);
    }
}
