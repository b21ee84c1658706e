//! The `sqc` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dynamics::{
    check_gauge_invariance, initial_state, integrate, reduced_initial_state, regularized_oracle, EomSet, Trajectory,
};
use crate::error::{Error, Result};
use crate::expr::AffineForm;
use crate::parser::{parse_model, CircuitModel, Coef, Observable};
use crate::pipeline::{run_pipeline, Pipeline, PipelineOptions};
use crate::report::{
    build_report, compare_reports, nonzero_brackets, AnalysisReport, DynamicsSection, GaugeRun, GaugeSweepSection,
    ObservableSummary, OracleSection,
};
use crate::scalar;

#[derive(Parser, Debug)]
#[command(name = "sqc", version, about = "Constraint analysis and reduction of superconducting circuit Lagrangians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Constraints, classification, degrees of freedom and brackets.
    Analyze(Common),
    /// Adds elimination, canonical chart, reduced Hamiltonian and commutators.
    Reduce(Common),
    /// Integrates the reduced equations from the model's simulate block.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also integrate the ε-regularized Lagrangian and compare.
        #[arg(long, value_name = "EPSILON")]
        oracle: Option<f64>,
        /// Write the trajectory (CSV, or JSON for a .json path).
        #[arg(long, value_name = "PATH")]
        trajectory: Option<PathBuf>,
    },
    /// Runs the pipeline and dynamics once per gauge set and compares observables.
    GaugeSweep {
        #[command(flatten)]
        common: Common,
        /// Gauge sets separated by `;`. Each set is a comma-separated list of
        /// gauge expressions, or of parameter values with --gauge-params.
        #[arg(long)]
        gauges: String,
        /// Parameters that the values in --gauges bind, in order.
        #[arg(long, value_delimiter = ',')]
        gauge_params: Vec<String>,
        /// Observable to compare (repeatable); defaults to the simulate block's.
        #[arg(long)]
        observe: Vec<String>,
    },
}

#[derive(Args, Debug)]
struct Common {
    file: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Md)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the randomized bracket checks included in the report.
    #[arg(long)]
    seed: Option<u64>,
    /// Expected report (JSON) to compare against.
    #[arg(long, value_name = "PATH")]
    golden: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Md,
}

/// Exit status for an engine error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) => 1,
        Error::Inconsistent { .. } => 3,
        Error::UnsupportedNonAffineConstraint { .. } => 4,
        Error::DegenerateGauge(_) | Error::WrongGaugeCount { .. } => 5,
        _ => 2,
    }
}

fn read_model(path: &Path) -> Result<CircuitModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    parse_model(&text)
}

fn observables(model: &CircuitModel, system_names: &[String], explicit: &[String]) -> Result<Vec<Observable>> {
    if !explicit.is_empty() {
        return explicit.iter().map(|t| Ok(Observable { label: t.clone(), form: model.phase_form(t)? })).collect();
    }
    if let Some(sim) = &model.simulate {
        if !sim.observe.is_empty() {
            return Ok(sim.observe.clone());
        }
    }
    system_names.iter().map(|n| Ok(Observable { label: n.clone(), form: model.phase_form(n)? })).collect()
}

fn summarize(label: &str, series: &[f64]) -> ObservableSummary {
    ObservableSummary {
        label: label.to_string(),
        initial: series.first().copied().unwrap_or(f64::NAN),
        last: series.last().copied().unwrap_or(f64::NAN),
        min: series.iter().copied().fold(f64::INFINITY, f64::min),
        max: series.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let text = if path.extension().is_some_and(|e| e == "json") {
        serde_json::to_string_pretty(&traj.to_json()).expect("trajectory serializes")
    } else {
        traj.to_csv()
    };
    std::fs::write(path, text).map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))
}

fn reduced_pipeline(model: &CircuitModel) -> Result<Pipeline> {
    let p = run_pipeline(model, &PipelineOptions::default())?;
    if p.reduced.is_none() {
        return Err(Error::FirstClassRemaining(p.warnings.join("; ")));
    }
    Ok(p)
}

fn simulate(
    model: &CircuitModel,
    p: &Pipeline,
    oracle: Option<f64>,
    trajectory: Option<&Path>,
) -> Result<DynamicsSection> {
    let sim = model
        .simulate
        .as_ref()
        .ok_or_else(|| Error::InvalidModel("simulate needs a `simulate { ... }` block".into()))?;
    let system = p.reduced.as_ref().expect("reduced pipeline");
    let eom = EomSet::reduced(system)?;
    let z0 = reduced_initial_state(p.final_analysis(), system, &sim.init)?;
    let traj = integrate(&eom, &z0, sim.dt, sim.t_end)?;
    if let Some(path) = trajectory {
        write_trajectory(path, &traj)?;
    }
    let obs = observables(model, &system.retained_names(), &[])?;
    let reduced_forms: Vec<AffineForm> = obs.iter().map(|o| system.reduce_form(&o.form)).collect::<Result<_>>()?;
    let series: Vec<Vec<f64>> = reduced_forms.iter().map(|f| traj.observe(f)).collect();
    let oracle = match oracle {
        None => None,
        Some(eps) => {
            let full = initial_state(p.final_analysis(), &sim.init)?;
            let unreduced = EomSet::unreduced(p.final_analysis(), &system.full_structure)?;
            let o = regularized_oracle(&model.lagrangian, &unreduced, &full, eps, sim.dt, sim.t_end)?;
            let errors: Vec<f64> = obs
                .iter()
                .zip(&series)
                .map(|(ob, s)| o.observe(&ob.form).iter().zip(s).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .collect();
            Some(OracleSection { epsilon: eps, sup_error: errors.iter().copied().fold(0.0, f64::max), errors })
        }
    };
    Ok(DynamicsSection {
        dt: sim.dt,
        t_end: sim.t_end,
        steps: traj.len() - 1,
        variables: traj.names.clone(),
        initial: z0,
        last: traj.states.last().cloned().unwrap_or_default(),
        energy_initial: traj.energy[0],
        energy_drift: traj.energy_drift(),
        observables: obs.iter().zip(&series).map(|(o, s)| summarize(&o.label, s)).collect(),
        oracle,
        gauge_sweep: None,
    })
}

/// Gauge sets from the `--gauges` text.
fn gauge_models(model: &CircuitModel, gauges: &str, params: &[String]) -> Result<Vec<Vec<AffineForm>>> {
    let mut out = Vec::new();
    for set in gauges.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let items: Vec<&str> = set.split(',').map(str::trim).collect();
        if params.is_empty() {
            out.push(items.iter().map(|t| model.phase_form(t)).collect::<Result<_>>()?);
            continue;
        }
        if items.len() != params.len() {
            return Err(Error::InvalidArgument(format!(
                "gauge set `{set}` has {} values for {} parameters",
                items.len(),
                params.len()
            )));
        }
        let mut bindings = Vec::new();
        for (name, text) in params.iter().zip(&items) {
            if model.param(name).is_none() {
                return Err(Error::InvalidArgument(format!("unknown parameter `{name}`")));
            }
            let v = scalar::parse_scalar(text)
                .ok_or_else(|| Error::InvalidArgument(format!("`{text}` is not a rational number")))?;
            bindings.push((name.as_str(), Coef::exact(v)));
        }
        let m = model.with_params(&bindings)?;
        if m.gauges.is_empty() {
            return Err(Error::InvalidArgument("--gauge-params needs `gauge` statements in the model".into()));
        }
        out.push(m.gauges.iter().map(|g| g.form.clone()).collect());
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("--gauges lists no gauge sets".into()));
    }
    Ok(out)
}

fn gauge_sweep(model: &CircuitModel, gauges: &str, params: &[String], observe: &[String]) -> Result<(Pipeline, DynamicsSection)> {
    let sets = gauge_models(model, gauges, params)?;
    let sim = model
        .simulate
        .as_ref()
        .ok_or_else(|| Error::InvalidModel("gauge-sweep needs a `simulate { ... }` block".into()))?;
    let mut runs = Vec::new();
    let mut first = None;
    for set in &sets {
        let p = run_pipeline(model, &PipelineOptions { gauges: Some(set.clone()), ..Default::default() })?;
        let system = p.reduced.as_ref().ok_or_else(|| Error::FirstClassRemaining(p.warnings.join("; ")))?;
        let names = model.space.names();
        runs.push(GaugeRun {
            gauges: set.iter().map(|g| format!("{} = 0", g.format(&names))).collect(),
            nonzero: nonzero_brackets(&system.full_structure),
        });
        if first.is_none() {
            first = Some(p);
        }
    }
    let first = first.expect("at least one gauge set");
    let obs = observables(model, &first.reduced.as_ref().expect("reduced").retained_names(), observe)?;
    let forms: Vec<AffineForm> = obs.iter().map(|o| o.form.clone()).collect();
    let report = check_gauge_invariance(model, &sets, &forms, &sim.init, sim.dt, sim.t_end)?;
    let mut dynamics = simulate(model, &first, None, None)?;
    dynamics.observables = obs.iter().zip(&report.series[0]).map(|(o, s)| summarize(&o.label, s)).collect();
    dynamics.gauge_sweep = Some(GaugeSweepSection {
        runs,
        observables: obs.iter().map(|o| o.label.clone()).collect(),
        max_deviation: report.max_deviation,
    });
    Ok((first, dynamics))
}

fn execute(command: &Command) -> Result<(AnalysisReport, &Common)> {
    let (common, model, pipeline, dynamics) = match command {
        Command::Analyze(c) => {
            let model = read_model(&c.file)?;
            let p = run_pipeline(&model, &PipelineOptions { analysis_only: true, ..Default::default() })?;
            (c, model, p, None)
        }
        Command::Reduce(c) => {
            let model = read_model(&c.file)?;
            let p = run_pipeline(&model, &PipelineOptions::default())?;
            (c, model, p, None)
        }
        Command::Simulate { common, oracle, trajectory } => {
            if let Some(eps) = oracle {
                if !(*eps > 0.0 && eps.is_finite()) {
                    return Err(Error::InvalidArgument(format!("--oracle needs a positive epsilon, got {eps}")));
                }
            }
            let model = read_model(&common.file)?;
            let p = reduced_pipeline(&model)?;
            let d = simulate(&model, &p, *oracle, trajectory.as_deref())?;
            (common, model, p, Some(d))
        }
        Command::GaugeSweep { common, gauges, gauge_params, observe } => {
            let model = read_model(&common.file)?;
            let (p, d) = gauge_sweep(&model, gauges, gauge_params, observe)?;
            (common, model, p, Some(d))
        }
    };
    let mut report = build_report(&model, &pipeline, common.seed)?;
    report.dynamics = dynamics;
    if let Some(path) = &common.golden {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        let golden = AnalysisReport::from_json(&text)?;
        let structure = pipeline.reduced.as_ref().map(|r| &r.structure);
        report.comparison = Some(compare_reports(&report, &golden, structure));
    }
    Ok((report, common))
}

/// Runs one command line; returns the exit status.
pub fn run_command<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    let (report, common) = match execute(&cli.command) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return exit_code(&e);
        }
    };
    let text = match common.format {
        Format::Json => report.to_json(),
        Format::Md => report.to_markdown(),
    };
    for w in &report.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    match &common.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                let _ = writeln!(stderr, "error: cannot write {}: {e}", path.display());
                return 1;
            }
        }
        None => {
            let _ = stdout.write_all(text.as_bytes());
        }
    }
    0
}
