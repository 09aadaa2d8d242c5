//! Waveform CSV files: `t,re_u0,im_u0,re_u1,im_u1` in, `t,re_v,im_v` out.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use okd_core::modes::Complex64;
use okd_core::{ModePair, TemporalEnvelope};
use thiserror::Error;

pub const PAIR_HEADER: [&str; 5] = ["t", "re_u0", "im_u0", "re_u1", "im_u1"];
pub const COMPLEMENT_HEADER: [&str; 3] = ["t", "re_v", "im_v"];

#[derive(Debug, Error)]
pub enum WaveformError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("line 1: expected header `{}`, found `{found}`", PAIR_HEADER.join(","))]
    Header { found: String },
    #[error("line {line}: expected 5 fields, found {found}")]
    FieldCount { line: u64, found: usize },
    #[error("line {line}: column `{column}` is not a number: `{value}`")]
    Number {
        line: u64,
        column: &'static str,
        value: String,
    },
    #[error("line {line}: times must be strictly increasing")]
    Unsorted { line: u64 },
    #[error("line {line}: time grid is not uniform")]
    NonUniform { line: u64 },
    #[error(transparent)]
    Mode(#[from] okd_core::Error),
}

fn csv_error(e: csv::Error) -> WaveformError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    let message = e.to_string();
    match e.into_kind() {
        csv::ErrorKind::Io(io) => WaveformError::Io(io),
        _ => WaveformError::Csv { line, message },
    }
}

/// Reads the two raw (not necessarily normalised) envelopes of a file.
pub fn read_envelopes<R: Read>(input: R) -> Result<(TemporalEnvelope, TemporalEnvelope), WaveformError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.iter().ne(PAIR_HEADER.iter().copied()) {
        return Err(WaveformError::Header {
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut t = Vec::new();
    let mut u0 = Vec::new();
    let mut u1 = Vec::new();
    let mut lines = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != PAIR_HEADER.len() {
            return Err(WaveformError::FieldCount { line, found: row.len() });
        }
        let mut v = [0.0; 5];
        for (i, field) in row.iter().enumerate() {
            v[i] = field.parse().map_err(|_| WaveformError::Number {
                line,
                column: PAIR_HEADER[i],
                value: field.to_owned(),
            })?;
        }
        if v.iter().any(|x: &f64| !x.is_finite()) {
            return Err(WaveformError::Number {
                line,
                column: PAIR_HEADER[v.iter().position(|x| !x.is_finite()).unwrap_or(0)],
                value: row.iter().collect::<Vec<_>>().join(","),
            });
        }
        if t.last().is_some_and(|&prev| v[0] <= prev) {
            return Err(WaveformError::Unsorted { line });
        }
        t.push(v[0]);
        u0.push(Complex64::new(v[1], v[2]));
        u1.push(Complex64::new(v[3], v[4]));
        lines.push(line);
    }
    let located = |e: okd_core::Error| match e {
        okd_core::Error::NonUniformGrid { index } => WaveformError::NonUniform {
            line: lines.get(index).copied().unwrap_or(0),
        },
        e => WaveformError::Mode(e),
    };
    let a = TemporalEnvelope::new(t.clone(), u0).map_err(located)?;
    let b = TemporalEnvelope::new(t, u1).map_err(located)?;
    Ok((a, b))
}

/// Reads a file and normalises both envelopes.
pub fn load_pair(path: &Path) -> Result<ModePair, WaveformError> {
    let (u0, u1) = read_envelopes(File::open(path)?)?;
    Ok(ModePair::from_raw(&u0, &u1)?)
}

pub fn write_pair<W: Write>(out: W, pair: &ModePair) -> Result<(), WaveformError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PAIR_HEADER).map_err(csv_error)?;
    let (u0, u1) = (pair.u0(), pair.u1());
    for ((t, a), b) in u0.times().iter().zip(u0.amplitudes()).zip(u1.amplitudes()) {
        w.write_record([t, &a.re, &a.im, &b.re, &b.im].map(|x| format!("{x:?}")))
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_complement<W: Write>(out: W, v: &TemporalEnvelope) -> Result<(), WaveformError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COMPLEMENT_HEADER).map_err(csv_error)?;
    for (t, a) in v.times().iter().zip(v.amplitudes()) {
        w.write_record([t, &a.re, &a.im].map(|x| format!("{x:?}")))
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes two unit-norm Gaussians with intensity width `sigma` whose
/// centres are `delta_t` apart.
pub fn generate_gaussian_file(path: &Path, delta_t: f64, sigma: f64, points: usize) -> Result<ModePair, WaveformError> {
    let pair = ModePair::offset_gaussians(delta_t, sigma, points)?;
    write_pair(BufWriter::new(File::create(path)?), &pair)?;
    Ok(pair)
}
