//! Phase CSV files: `frequency_hz,phase_rad[,amplitude]`.
//!
//! UTF-8, `.` decimal separator, `#`-prefixed comment lines permitted
//! anywhere, frequencies strictly increasing, phases in (-pi, pi]. Floats
//! are written with 17 significant digits so the numeric payload survives a
//! write/read round trip exactly.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use crate::error::{positive_finite, Error, ParseError};
use crate::forward::{FrequencyGrid, PhaseSpectrum};
use crate::Result;

const HEADER_2: &str = "frequency_hz,phase_rad";
const HEADER_3: &str = "frequency_hz,phase_rad,amplitude";

fn fmt(value: f64) -> String {
    format!("{value:.16e}")
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write a spectrum; the amplitude column is emitted only when requested
/// and available.
pub fn write_phase_csv(
    path: impl AsRef<Path>,
    spectrum: &PhaseSpectrum,
    with_amplitude: bool,
) -> Result<()> {
    let path = path.as_ref();
    let amplitudes = if with_amplitude {
        spectrum.amplitudes()
    } else {
        None
    };
    let mut out = Vec::new();
    writeln!(
        out,
        "{}",
        if amplitudes.is_some() { HEADER_3 } else { HEADER_2 }
    )
    .expect("write to vec");
    for (k, (&f, &phi)) in spectrum
        .grid()
        .frequencies_hz()
        .iter()
        .zip(spectrum.phases())
        .enumerate()
    {
        match amplitudes {
            Some(amps) => writeln!(out, "{},{},{}", fmt(f), fmt(phi), fmt(amps[k])),
            None => writeln!(out, "{},{}", fmt(f), fmt(phi)),
        }
        .expect("write to vec");
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Write the bare two-column `frequency phase` file used for external
/// plotting tools.
pub fn write_plot_data(path: impl AsRef<Path>, spectrum: &PhaseSpectrum) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (&f, &phi) in spectrum
        .grid()
        .frequencies_hz()
        .iter()
        .zip(spectrum.phases())
    {
        writeln!(out, "{} {}", fmt(f), fmt(phi)).expect("write to vec");
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

fn parse_field(path: &Path, line_no: usize, column: usize, field: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| {
        ParseError::new(path, format!("cannot parse \"{}\" as a number", field.trim()))
            .at(line_no, column)
            .into()
    })
}

/// Read a phase CSV back into a spectrum.
pub fn read_phase_csv(path: impl AsRef<Path>) -> Result<PhaseSpectrum> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;

    let mut header_cols: Option<usize> = None;
    let mut frequencies = Vec::new();
    let mut phases = Vec::new();
    let mut amplitudes = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some(cols) = header_cols else {
            header_cols = match line {
                HEADER_2 => Some(2),
                HEADER_3 => Some(3),
                other => {
                    return Err(ParseError::new(
                        path,
                        format!(
                            "expected header \"{HEADER_2}\" or \"{HEADER_3}\", got \"{other}\""
                        ),
                    )
                    .at_line(line_no)
                    .into());
                }
            };
            continue;
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(ParseError::new(
                path,
                format!("expected {cols} comma-separated fields, got {}", fields.len()),
            )
            .at_line(line_no)
            .into());
        }
        let f = parse_field(path, line_no, 1, fields[0])?;
        let phi = parse_field(path, line_no, 2, fields[1])?;
        if !positive_finite(f) {
            return Err(ParseError::new(path, format!("frequency must be positive, got {f}"))
                .at(line_no, 1)
                .into());
        }
        if let Some(&prev) = frequencies.last() {
            if f <= prev {
                return Err(ParseError::new(
                    path,
                    format!("frequencies must be strictly increasing ({prev} then {f})"),
                )
                .at(line_no, 1)
                .into());
            }
        }
        if !phi.is_finite() || phi <= -PI || phi > PI {
            return Err(ParseError::new(
                path,
                format!("phase must lie in (-pi, pi], got {phi}"),
            )
            .at(line_no, 2)
            .into());
        }
        frequencies.push(f);
        phases.push(phi);
        if cols == 3 {
            amplitudes.push(parse_field(path, line_no, 3, fields[2])?);
        }
    }

    if header_cols.is_none() {
        return Err(ParseError::new(path, "empty file: missing header row").into());
    }
    if frequencies.is_empty() {
        return Err(ParseError::new(path, "no data rows").into());
    }
    let grid = FrequencyGrid::new(frequencies)?;
    let amplitudes = if amplitudes.is_empty() {
        None
    } else {
        Some(amplitudes)
    };
    PhaseSpectrum::new(grid, phases, amplitudes)
}
