//! `thermwave`: lock-in thermography coating analysis from the command
//! line.
//!
//! Five verbs cover the pipeline: `forward` evaluates phase spectra of a
//! configured stack, `synth` adds reproducible measurement noise, `fit`
//! recovers unknown layer thicknesses from a phase CSV, `calibrate` runs
//! the two-step property/thickness procedure on a sample batch, and
//! `oracle-check` verifies the closed-form model against brute-force
//! wave-train sums.
//!
//! Exit codes: 0 on success, 1 for input or parse errors, 2 for numerical
//! non-convergence.

use std::f64::consts::FRAC_PI_4;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use thermwave::calibration::calibrate;
use thermwave::forward::{
    forward_phases, synthesize_measurement, FrequencyGrid, NoiseModel, PhaseSpectrum,
};
use thermwave::inverse::{
    default_start_count, latin_hypercube_starts, solve, FitProblem, SolveSettings,
};
use thermwave::io::{
    load_manifest, read_phase_csv, write_phase_csv, write_plot_data, write_toml_report,
    CalibrationReportFile, FitReportFile, StackConfig,
};
use thermwave::oracle::{recursive_truncated_stack, truncated_surface_temperature, TruncationPolicy};
use thermwave::wavecore::{effective_reflection, surface_response, wrap_phase, CoatingStack};
use thermwave::Error;

#[derive(Parser)]
#[command(
    name = "thermwave",
    version,
    about = "Thermal-wave phase modeling and coating-thickness estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the model phase spectrum of a configured stack
    Forward {
        /// Stack configuration (TOML)
        #[arg(long)]
        stack: PathBuf,
        /// Output phase CSV
        #[arg(long)]
        out: PathBuf,
        /// Emit the relative-amplitude column as well
        #[arg(long)]
        with_amplitude: bool,
        /// Report raw phases including the -pi/4 excitation lag
        #[arg(long)]
        raw_phase: bool,
        /// Also write a bare two-column frequency/phase file
        #[arg(long)]
        emit_plot_data: Option<PathBuf>,
    },
    /// Generate a synthetic measurement with seeded Gaussian phase noise
    Synth {
        #[arg(long)]
        stack: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Noise standard deviation in degrees (overrides the config)
        #[arg(long)]
        noise_sigma_deg: Option<f64>,
        /// Noise seed (overrides the config)
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recover thicknesses marked "?" in the template from measured phases
    Fit {
        /// Stack template with unknown thicknesses marked "?"
        #[arg(long)]
        stack: PathBuf,
        /// Measured phase CSV
        #[arg(long)]
        data: PathBuf,
        /// Thickness search box in meters, as "lower,upper"
        #[arg(long, value_parser = parse_bounds)]
        bounds: Option<(f64, f64)>,
        /// Number of multi-start points
        #[arg(long)]
        starts: Option<usize>,
        /// Seed for the start-point sampler
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Iteration cap per start
        #[arg(long)]
        max_iters: Option<usize>,
        /// Output fit report (TOML)
        #[arg(long)]
        out: PathBuf,
        /// Also write the fitted model phases for plotting
        #[arg(long)]
        emit_plot_data: Option<PathBuf>,
    },
    /// Run the two-step calibration over a sample batch manifest
    Calibrate {
        /// Batch manifest (TOML)
        #[arg(long)]
        manifest: PathBuf,
        /// Output calibration report (TOML)
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare brute-force wave-train sums against the closed-form model
    OracleCheck {
        #[arg(long)]
        stack: PathBuf,
        /// Number of reflection orders to sum
        #[arg(long, default_value_t = 10_000)]
        orders: usize,
        /// Maximum allowed deviation
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

fn parse_bounds(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected \"lower,upper\"".into());
    }
    let lo: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse \"{}\" as a number", parts[0].trim()))?;
    let hi: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse \"{}\" as a number", parts[1].trim()))?;
    let ordered = lo > 0.0 && hi > lo;
    if !ordered {
        return Err(format!("bounds must satisfy 0 < lower < upper, got {lo},{hi}"));
    }
    Ok((lo, hi))
}

enum CliError {
    /// Bad input: config, data, or arguments. Exit code 1.
    Input(String),
    /// The numerics did not meet their target. Exit code 2.
    Numerical(String),
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        match err {
            Error::SingularDenominator { .. } | Error::DivergentSeries { .. } => {
                CliError::Numerical(err.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

fn warn_degenerate(stack: &CoatingStack) {
    for i in stack.degenerate_layer_indices() {
        eprintln!(
            "warning: layer {} has zero thickness; adjacent interfaces are collapsed",
            i + 1
        );
    }
}

fn required_grid(config: &StackConfig, path: &std::path::Path) -> Result<FrequencyGrid, CliError> {
    config.grid()?.ok_or_else(|| {
        CliError::Input(format!(
            "{}: frequencies_hz is required for this command",
            path.display()
        ))
    })
}

fn run_forward(
    stack_path: PathBuf,
    out: PathBuf,
    with_amplitude: bool,
    raw_phase: bool,
    emit_plot_data: Option<PathBuf>,
) -> Result<(), CliError> {
    let config = StackConfig::load(&stack_path)?;
    let stack = config.stack()?;
    warn_degenerate(&stack);
    let grid = required_grid(&config, &stack_path)?;
    let mut spectrum = forward_phases(&stack, &grid)?;
    if raw_phase {
        let phases = spectrum
            .phases()
            .iter()
            .map(|&p| wrap_phase(p - FRAC_PI_4))
            .collect();
        let amplitudes = spectrum.amplitudes().map(|a| a.to_vec());
        spectrum = PhaseSpectrum::new(grid, phases, amplitudes)?;
    }
    write_phase_csv(&out, &spectrum, with_amplitude)?;
    if let Some(plot) = emit_plot_data {
        write_plot_data(&plot, &spectrum)?;
    }
    println!("wrote {} phases to {}", spectrum.len(), out.display());
    Ok(())
}

fn run_synth(
    stack_path: PathBuf,
    out: PathBuf,
    noise_sigma_deg: Option<f64>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let config = StackConfig::load(&stack_path)?;
    let stack = config.stack()?;
    warn_degenerate(&stack);
    let grid = required_grid(&config, &stack_path)?;
    let sigma_deg = noise_sigma_deg
        .or(config.noise.map(|n| n.sigma_deg))
        .unwrap_or(0.0);
    let seed = seed.or(config.noise.map(|n| n.seed)).unwrap_or(0);
    let spectrum = synthesize_measurement(
        &stack,
        &grid,
        NoiseModel::Gaussian {
            sigma: sigma_deg.to_radians(),
            seed,
        },
    )?;
    write_phase_csv(&out, &spectrum, false)?;
    println!(
        "wrote {} noisy phases (sigma {} deg, seed {}) to {}",
        spectrum.len(),
        sigma_deg,
        seed,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_fit(
    stack_path: PathBuf,
    data_path: PathBuf,
    bounds: Option<(f64, f64)>,
    starts: Option<usize>,
    seed: u64,
    max_iters: Option<usize>,
    out: PathBuf,
    emit_plot_data: Option<PathBuf>,
) -> Result<(), CliError> {
    let config = StackConfig::load(&stack_path)?;
    let (template, free) = config.template()?;
    if free.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no layer thickness is marked \"?\"; nothing to fit",
            stack_path.display()
        )));
    }
    warn_degenerate(&template);
    let data = read_phase_csv(&data_path)?;
    if let Some(grid) = config.grid()? {
        if grid.frequencies_hz() != data.grid().frequencies_hz() {
            let detail = if grid.len() != data.grid().len() {
                format!(
                    "template declares {} frequencies, data file has {}",
                    grid.len(),
                    data.grid().len()
                )
            } else {
                "template and data frequencies differ".to_string()
            };
            return Err(CliError::Input(format!(
                "frequency grid mismatch: {detail}"
            )));
        }
    }

    let (lo, hi) = bounds.unwrap_or((1e-7, 1e-2));
    let lower = vec![lo; free.len()];
    let upper = vec![hi; free.len()];
    let count = starts.unwrap_or_else(|| default_start_count(template.layer_count()));
    let start_points = latin_hypercube_starts(&lower, &upper, count, seed)?;
    let mut problem = FitProblem::partial_thickness_fit(
        template.clone(),
        free.clone(),
        data.clone(),
        lower,
        upper,
        start_points,
    )?;
    if let Some(cap) = max_iters {
        problem.set_settings(SolveSettings {
            max_iterations: cap,
            ..SolveSettings::default()
        });
    }
    let result = solve(&problem)?;

    let names: Vec<Option<String>> = config.layers.iter().map(|l| l.name.clone()).collect();
    let report = FitReportFile::from_result(&result, &free, &names);
    write_toml_report(&out, &report)?;

    if let Some(plot) = emit_plot_data {
        let mut thicknesses = template.thicknesses();
        for (slot, &layer) in free.iter().enumerate() {
            thicknesses[layer] = result.parameters[slot];
        }
        let fitted = template.with_thicknesses(&thicknesses)?;
        let model = forward_phases(&fitted, data.grid())?;
        write_plot_data(&plot, &model)?;
    }

    for (slot, &layer) in free.iter().enumerate() {
        println!(
            "layer {}: {:.6e} m",
            layer + 1,
            result.parameters[slot]
        );
    }
    println!(
        "objective {:e}, condition {:.3e}, report written to {}",
        result.objective,
        result.jacobian_condition,
        out.display()
    );
    if !result.converged {
        return Err(CliError::Numerical(
            "no start met the convergence criteria; report written with converged = false".into(),
        ));
    }
    Ok(())
}

fn run_calibrate(manifest_path: PathBuf, out: PathBuf) -> Result<(), CliError> {
    let load = load_manifest(&manifest_path)?;
    let report = calibrate(&load.batch, &load.settings)?;
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    let known: Vec<Vec<f64>> = load
        .batch
        .confirmation()
        .iter()
        .map(|s| s.known_thicknesses.clone())
        .collect();
    let file = CalibrationReportFile::from_report(
        &report,
        load.settings.acceptance_threshold,
        load.batch.split(),
        &known,
    );
    write_toml_report(&out, &file)?;
    println!(
        "validation error {:e} m^2 (threshold {:e}): {}",
        report.validation.total_squared_error,
        load.settings.acceptance_threshold,
        if report.passed { "pass" } else { "fail" }
    );
    println!("report written to {}", out.display());
    let all_converged =
        report.estimate.converged && report.sample_fits.iter().all(|f| f.converged);
    if !all_converged {
        return Err(CliError::Numerical(
            "calibration fits did not all converge; see report warnings".into(),
        ));
    }
    Ok(())
}

fn run_oracle_check(stack_path: PathBuf, orders: usize, tol: f64) -> Result<(), CliError> {
    let tol_valid = tol > 0.0;
    if !tol_valid {
        return Err(CliError::Input(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let config = StackConfig::load(&stack_path)?;
    let stack = config.stack()?;
    warn_degenerate(&stack);
    let grid = match config.grid()? {
        Some(grid) => grid,
        None => FrequencyGrid::log_spaced(0.5, 20.0, 10)?,
    };
    let policy = TruncationPolicy::fixed(orders);
    let mut max_gamma = 0.0f64;
    let mut max_temp = 0.0f64;
    for omega in grid.angular() {
        let gamma_series = recursive_truncated_stack(&stack, omega, policy)?;
        let gamma_closed = effective_reflection(&stack, omega)?;
        max_gamma = max_gamma.max((gamma_series - gamma_closed).norm());
        let temp_series = truncated_surface_temperature(&stack, omega, policy)?;
        let temp_closed = surface_response(&stack, omega, 1.0)?.complex_amplitude;
        max_temp = max_temp.max((temp_series - temp_closed).norm());
    }
    println!("max effective-reflection deviation: {max_gamma:e}");
    println!("max surface-temperature deviation:  {max_temp:e}");
    println!("orders: {orders}, tolerance: {tol:e}");
    if max_gamma <= tol && max_temp <= tol {
        println!("series and closed forms agree");
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "series/closed-form deviation exceeds tolerance {tol:e}"
        )))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Forward {
            stack,
            out,
            with_amplitude,
            raw_phase,
            emit_plot_data,
        } => run_forward(stack, out, with_amplitude, raw_phase, emit_plot_data),
        Command::Synth {
            stack,
            out,
            noise_sigma_deg,
            seed,
        } => run_synth(stack, out, noise_sigma_deg, seed),
        Command::Fit {
            stack,
            data,
            bounds,
            starts,
            seed,
            max_iters,
            out,
            emit_plot_data,
        } => run_fit(
            stack,
            data,
            bounds,
            starts,
            seed,
            max_iters,
            out,
            emit_plot_data,
        ),
        Command::Calibrate { manifest, out } => run_calibrate(manifest, out),
        Command::OracleCheck { stack, orders, tol } => run_oracle_check(stack, orders, tol),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(CliError::Numerical(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
