//! Command-line driver: simulation runs, conformance reports, dense operator
//! dumps and time-step convergence studies.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure
//! (integrator failure or a failed conformance check).

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mimetic_core::audit::{
    self, ConformanceOptions, Fault, SAMPLE_CSV_HEADER,
};
use mimetic_core::dense::DENSE_LIMIT;
use mimetic_core::operators::{self, DensityKind};
use mimetic_core::sampling::SmoothSampler;
use mimetic_core::{
    adjoint_residual, assemble_dense, CellField, FaceField, LinearOperator, Location,
    OperatorMatrix, StaggeredGrid, StateLaw,
};

pub mod config;

pub use config::{RunConfig, Setup};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 1,
            Self::Runtime(_) | Self::Io(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mimetic", version, about = "Energy-conserving staggered-grid wave and flow models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a configured model and write the conservation time series.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; defaults to `output` in the config, then stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check every operator identity and conservation property.
    Conformance {
        #[arg(long, value_delimiter = ',', default_values_t = [4usize, 8, 16])]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [1.4f64, 2.0])]
        gammas: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random draws per randomized check.
        #[arg(long, default_value_t = 5)]
        samples: usize,
        /// Also write the report as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "break", value_enum, hide = true)]
        fault: Option<FaultArg>,
    },
    /// Dump the dense matrix of an operator and its weighted adjoint.
    Assemble {
        #[arg(value_enum)]
        operator: OperatorArg,
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        length: f64,
        /// Power-law exponent for the face densities of `r-grad` and `div-r`.
        #[arg(long, default_value_t = 2.0)]
        gamma: f64,
        /// Which chain rule the face density of `r-grad` and `div-r` realizes.
        #[arg(long, value_enum, default_value_t = DensityArg::Euler)]
        density: DensityArg,
        /// Seed for the random pressure or flux fields.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Face mass flux for `advec`, one value per face.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        flux: Option<Vec<f64>>,
        /// Write the matrix here and the adjoint next to it as `<stem>.adjoint.<ext>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Terminal energy error against step size, with the fitted order.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        dt: Vec<f64>,
        /// Final time; defaults to `t_end` in the config.
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    Advec,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OperatorArg {
    Grad,
    Div,
    Lapl,
    Interp,
    RGrad,
    DivR,
    Advec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DensityArg {
    Euler,
    CompressibleWave,
}

/// Parses the arguments, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, S>(args: I) -> ExitCode
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn execute(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Run { config, out } => run(&config, out),
        Command::Conformance {
            sizes,
            gammas,
            seed,
            samples,
            out,
            fault,
        } => conformance(
            ConformanceOptions {
                sizes,
                gammas,
                seed,
                samples,
                fault: match fault {
                    None => Fault::None,
                    Some(FaultArg::Advec) => Fault::AdvecHalf,
                    Some(FaultArg::Div) => Fault::DivSign,
                },
            },
            out,
        ),
        Command::Assemble {
            operator,
            n,
            length,
            gamma,
            density,
            seed,
            flux,
            out,
        } => assemble(operator, n, length, gamma, density, seed, flux, out),
        Command::Convergence {
            config,
            dt,
            t_end,
            out,
        } => convergence(&config, &dt, t_end, out),
    }
}

/// Writes `text` to `path`, or to stdout when there is none.
fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Summary lines go to stdout unless stdout carries the CSV.
fn summary(to_file: bool, line: &str) {
    if to_file {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

fn run(config: &Path, out: Option<PathBuf>) -> Result<u8, CliError> {
    let setup = RunConfig::load(config)?.build()?;
    let steps = setup
        .steps
        .ok_or_else(|| CliError::Config("`steps` is required for run".into()))?;
    let out = out.or(setup.output.clone());
    let (series, failure) = match audit::conservation_run(&setup.model, &setup.state, &setup.integrator, steps, setup.stride) {
        Ok(s) => (s, None),
        Err(f) => (f.partial, Some((f.step, f.error))),
    };
    let mut csv = format!("{SAMPLE_CSV_HEADER}\n");
    for s in &series {
        csv.push_str(&s.csv_row());
        csv.push('\n');
    }
    emit(out.as_deref(), &csv)?;
    if let Some((step, error)) = failure {
        return Err(CliError::Runtime(format!(
            "integration failed at step {step}: {error} ({} samples written)",
            series.len()
        )));
    }
    let drift = |f: fn(&audit::Sample) -> f64| {
        let first = f(&series[0]);
        series.iter().map(|s| (f(s) - first).abs()).fold(0.0, f64::max)
    };
    summary(
        out.is_some(),
        &format!(
            "{} {} steps of {}: relative energy drift {:.3e}, mass drift {:.3e}, momentum drift {:.3e}",
            setup.model.kind(),
            steps,
            setup.integrator.scheme,
            audit::relative_energy_drift(&series),
            drift(|s| s.mass),
            drift(|s| s.momentum),
        ),
    );
    Ok(0)
}

fn conformance(options: ConformanceOptions, out: Option<PathBuf>) -> Result<u8, CliError> {
    if let Some(&n) = options.sizes.iter().find(|&&n| n < 3 || 10 * n > DENSE_LIMIT) {
        return Err(CliError::Config(format!(
            "grid size {n} outside the supported range 3..={}",
            DENSE_LIMIT / 10
        )));
    }
    if let Some(&g) = options.gammas.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
        return Err(CliError::Config(format!("gamma must be positive, got {g}")));
    }
    let report = audit::run_conformance(&options);
    print!("{}", report.to_pretty());
    if let Some(path) = out {
        fs::write(path, report.to_csv())?;
    }
    Ok(if report.passed() { 0 } else { 2 })
}

fn matrix_csv(m: &OperatorMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|x| format!("{x:.16e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn adjoint_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.adjoint.{}", ext.to_string_lossy()),
        None => format!("{stem}.adjoint"),
    };
    path.with_file_name(name)
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    operator: OperatorArg,
    n: usize,
    length: f64,
    gamma: f64,
    density: DensityArg,
    seed: u64,
    flux: Option<Vec<f64>>,
    out: Option<PathBuf>,
) -> Result<u8, CliError> {
    let config = |e: mimetic_core::Error| CliError::Config(e.to_string());
    let runtime = |e: mimetic_core::Error| CliError::Runtime(e.to_string());
    let g = StaggeredGrid::new_1d(n, length).map_err(config)?;
    if n > DENSE_LIMIT {
        return Err(CliError::Config(format!("N = {n} exceeds the dense limit {DENSE_LIMIT}")));
    }
    if flux.is_some() && operator != OperatorArg::Advec {
        return Err(CliError::Config("--flux only applies to advec".into()));
    }
    let mut sampler = SmoothSampler::new(seed);
    let uniform = |s: &mut SmoothSampler, lo: f64, hi: f64, count: usize| -> Vec<f64> {
        (0..count).map(|_| s.uniform(lo, hi)).collect()
    };
    let coefficient: Option<FaceField> = match operator {
        OperatorArg::RGrad | OperatorArg::DivR => {
            let law = StateLaw::power(gamma, 1.0).map_err(config)?;
            let p = CellField::new(&g, uniform(&mut sampler, 0.2, 4.0, n)).map_err(runtime)?;
            let kind = match density {
                DensityArg::Euler => DensityKind::Euler,
                DensityArg::CompressibleWave => DensityKind::CompressibleWave,
            };
            Some(operators::face_density(&g, &p, &law, kind).map_err(runtime)?)
        }
        OperatorArg::Advec => {
            let values = match flux {
                Some(v) if v.len() != n => {
                    return Err(CliError::Config(format!("--flux needs {n} values, got {}", v.len())))
                }
                Some(v) => v,
                None => uniform(&mut sampler, -1.0, 1.0, n),
            };
            Some(FaceField::new(&g, values).map_err(config)?)
        }
        _ => None,
    };
    let op = |arg: OperatorArg| match arg {
        OperatorArg::Grad => LinearOperator::Grad,
        OperatorArg::Div => LinearOperator::Div,
        OperatorArg::Lapl => LinearOperator::Lapl,
        OperatorArg::Interp => LinearOperator::Interp,
        OperatorArg::RGrad => LinearOperator::RGrad(coefficient.as_ref().expect("set above")),
        OperatorArg::DivR => LinearOperator::DivR(coefficient.as_ref().expect("set above")),
        OperatorArg::Advec => LinearOperator::Advec(coefficient.as_ref().expect("set above")),
    };
    let a = assemble_dense(op(operator), &g).map_err(runtime)?;
    let adjoint = a.adjoint();
    let partner = match operator {
        OperatorArg::Grad => Some((OperatorArg::Div, -1.0)),
        OperatorArg::Div => Some((OperatorArg::Grad, -1.0)),
        OperatorArg::Lapl => Some((OperatorArg::Lapl, 1.0)),
        OperatorArg::RGrad => Some((OperatorArg::DivR, -1.0)),
        OperatorArg::DivR => Some((OperatorArg::RGrad, -1.0)),
        OperatorArg::Interp | OperatorArg::Advec => None,
    };
    let residual_line = if let Some((other, sign)) = partner {
        let b = assemble_dense(op(other), &g).map_err(runtime)?;
        let r = adjoint_residual(&a, &b, sign).map_err(runtime)?;
        let name = |o: OperatorArg| op(o).name();
        let rel = r / a.max_abs().max(b.max_abs());
        Some(format!(
            "residual max|{}* {} {}| = {r:.3e} (relative {rel:.3e})",
            name(operator),
            if sign < 0.0 { "+" } else { "-" },
            name(other)
        ))
    } else if operator == OperatorArg::Advec {
        let m = coefficient.as_ref().expect("set above");
        let diag = operators::interp_c2f(&g, &operators::div(&g, m).map_err(runtime)?).map_err(runtime)?;
        let sym = a
            .add_scaled(1.0, &adjoint)
            .and_then(|s| s.sub_diagonal(diag.values()))
            .map_err(runtime)?;
        let r = sym.max_abs();
        let scale = m.max_abs() / g.spacing(0);
        Some(format!(
            "residual max|advec + advec* - diag(interp div m)| = {r:.3e} (relative {:.3e})",
            if r == 0.0 { 0.0 } else { r / scale }
        ))
    } else {
        None
    };
    // rows = output space, columns = input space
    let shape = |m: &OperatorMatrix| {
        let loc = |l: Location| match l {
            Location::Cells => "cells",
            Location::Faces => "faces",
        };
        format!("{}x{} ({} <- {})", m.rows(), m.cols(), loc(m.codomain()), loc(m.domain()))
    };
    match &out {
        Some(path) => {
            fs::write(path, matrix_csv(&a))?;
            fs::write(adjoint_path(path), matrix_csv(&adjoint))?;
            println!("{} {}: wrote {} and {}", op(operator).name(), shape(&a), path.display(), adjoint_path(path).display());
        }
        None => {
            println!("# {} {}", op(operator).name(), shape(&a));
            print!("{}", matrix_csv(&a));
            println!("# adjoint");
            print!("{}", matrix_csv(&adjoint));
        }
    }
    if let Some(line) = residual_line {
        println!("{line}");
    }
    Ok(0)
}

fn convergence(config: &Path, dts: &[f64], t_end: Option<f64>, out: Option<PathBuf>) -> Result<u8, CliError> {
    audit::validate_dt_sequence(dts).map_err(|e| {
        CliError::Config(format!(
            "convergence needs at least three step sizes forming a geometric sequence ({e})"
        ))
    })?;
    let setup = RunConfig::load(config)?.build()?;
    let t_end = t_end
        .or(setup.t_end)
        .ok_or_else(|| CliError::Config("no final time: set t_end in the config or pass --t-end".into()))?;
    let (table, failure) = match audit::convergence_study(&setup.model, &setup.state, &setup.integrator, dts, t_end) {
        Ok(t) => (t, None),
        Err(f) => (f.partial, Some(f.dt)),
    };
    emit(out.as_deref(), &table.to_csv())?;
    if let Some(dt) = failure {
        return Err(CliError::Runtime(format!(
            "integration with dt = {dt} failed; {} rows written",
            table.rows.len()
        )));
    }
    let fitted = match table.fitted_order {
        Some(p) => format!("fitted order {p:.4}"),
        None => "fitted order saturated".into(),
    };
    summary(
        out.is_some(),
        &format!("{} {} to t = {t_end}: {fitted}", setup.model.kind(), table.scheme),
    );
    Ok(0)
}
