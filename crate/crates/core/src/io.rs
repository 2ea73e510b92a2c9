//! Trace and fit-table file formats.
//!
//! Two trace representations are supported:
//!
//! * **CSV** — human-readable interchange, header `time_s,value`, one row
//!   per sample.  Values are written with 9 significant digits; import
//!   validates that the time column is uniform.
//! * **Binary** — exact round-trip format: magic `WVTRACE1`, then `dt`
//!   (f64), `t0` (f64), channel code (u32), sample count (u64), and the
//!   samples as little-endian f64.  Bit-identical across platforms.
//!
//! Fit tables are CSV with the schema
//! `pulse_index,amplitude,center_s,sigma_s,baseline,residual_rms,converged`.

use crate::estimator::GaussianFit;
use crate::instrument::{Channel, SampledTrace};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

/// Magic bytes opening every binary trace file.
pub const TRACE_MAGIC: &[u8; 8] = b"WVTRACE1";

/// Errors from reading or writing trace and fit files.
#[derive(Debug, Error)]
pub enum IoError {
    /// Underlying I/O failure.
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    /// CSV syntax or structure failure.
    #[error("csv failure: {0}")]
    Csv(#[from] csv::Error),
    /// The file content is not a valid trace.
    #[error("malformed trace: {0}")]
    Malformed(String),
}

/// Write a trace as `time_s,value` CSV.
pub fn write_trace_csv<W: Write>(writer: W, trace: &SampledTrace) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["time_s", "value"])?;
    for (i, &v) in trace.samples.iter().enumerate() {
        // 17 significant digits: the time base must survive the round trip
        // exactly, or the reconstructed sampling interval drifts.
        w.write_record([format!("{:.16e}", trace.time(i)), format!("{v:.9e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Read a `time_s,value` CSV trace, validating a uniform time base.
///
/// The channel is not part of the CSV schema, so the caller names it.
pub fn read_trace_csv<R: Read>(reader: R, channel: Channel) -> Result<SampledTrace, IoError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    {
        let headers = r.headers()?;
        if headers.len() < 2 || &headers[0] != "time_s" || &headers[1] != "value" {
            return Err(IoError::Malformed(format!(
                "expected header time_s,value, got {headers:?}"
            )));
        }
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let t: f64 = rec
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| IoError::Malformed(format!("bad time field in {rec:?}")))?;
        let v: f64 = rec
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| IoError::Malformed(format!("bad value field in {rec:?}")))?;
        times.push(t);
        values.push(v);
    }
    if times.len() < 2 {
        return Err(IoError::Malformed(
            "trace needs at least two samples".into(),
        ));
    }
    // Averaging over the whole span beats subtracting two neighbors: the
    // per-sample decimal rounding is divided by the sample count.
    let n = times.len();
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(IoError::Malformed(format!("non-positive dt {dt}")));
    }
    for (i, w) in times.windows(2).enumerate() {
        let step = w[1] - w[0];
        if (step - dt).abs() > 1e-6 * dt {
            return Err(IoError::Malformed(format!(
                "non-uniform time base at row {i}: step {step} vs {dt}"
            )));
        }
    }
    SampledTrace::new(times[0], dt, channel, values)
        .map_err(|e| IoError::Malformed(e.to_string()))
}

/// Write a trace in the exact binary format.
pub fn write_trace_bin<W: Write>(mut writer: W, trace: &SampledTrace) -> Result<(), IoError> {
    writer.write_all(TRACE_MAGIC)?;
    writer.write_all(&trace.dt.to_le_bytes())?;
    writer.write_all(&trace.t0.to_le_bytes())?;
    writer.write_all(&trace.channel.code().to_le_bytes())?;
    writer.write_all(&(trace.len() as u64).to_le_bytes())?;
    for v in &trace.samples {
        writer.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Read a binary trace, validating magic, channel code, and length.
pub fn read_trace_bin<R: Read>(mut reader: R) -> Result<SampledTrace, IoError> {
    let mut magic = [0u8; 8];
    reader.read_exact(&mut magic)?;
    if &magic != TRACE_MAGIC {
        return Err(IoError::Malformed(format!(
            "bad magic {magic:?}, expected {TRACE_MAGIC:?}"
        )));
    }
    let mut f8 = [0u8; 8];
    reader.read_exact(&mut f8)?;
    let dt = f64::from_le_bytes(f8);
    reader.read_exact(&mut f8)?;
    let t0 = f64::from_le_bytes(f8);
    let mut f4 = [0u8; 4];
    reader.read_exact(&mut f4)?;
    let code = u32::from_le_bytes(f4);
    let channel = Channel::from_code(code)
        .ok_or_else(|| IoError::Malformed(format!("unknown channel code {code}")))?;
    reader.read_exact(&mut f8)?;
    let count = u64::from_le_bytes(f8);
    if count == 0 || count > (1 << 32) {
        return Err(IoError::Malformed(format!("implausible sample count {count}")));
    }
    let mut samples = Vec::with_capacity(count as usize);
    for _ in 0..count {
        reader.read_exact(&mut f8)?;
        samples.push(f64::from_le_bytes(f8));
    }
    SampledTrace::new(t0, dt, channel, samples).map_err(|e| IoError::Malformed(e.to_string()))
}

/// Convenience: write a trace to a path, choosing the format from the
/// extension (`.bin` exact binary, anything else CSV).
pub fn save_trace(path: &Path, trace: &SampledTrace) -> Result<(), IoError> {
    let file = std::fs::File::create(path)?;
    let buf = std::io::BufWriter::new(file);
    if path.extension().map(|e| e == "bin").unwrap_or(false) {
        write_trace_bin(buf, trace)
    } else {
        write_trace_csv(buf, trace)
    }
}

/// Convenience: load a trace from a path by extension, naming the channel
/// for CSV input (binary input carries its own).
pub fn load_trace(path: &Path, csv_channel: Channel) -> Result<SampledTrace, IoError> {
    let file = std::fs::File::open(path)?;
    let buf = std::io::BufReader::new(file);
    if path.extension().map(|e| e == "bin").unwrap_or(false) {
        read_trace_bin(buf)
    } else {
        read_trace_csv(buf, csv_channel)
    }
}

/// Write a fit table with the schema
/// `pulse_index,amplitude,center_s,sigma_s,baseline,residual_rms,converged`.
pub fn write_fits_csv<W: Write>(writer: W, fits: &[GaussianFit]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "pulse_index",
        "amplitude",
        "center_s",
        "sigma_s",
        "baseline",
        "residual_rms",
        "converged",
    ])?;
    for (i, f) in fits.iter().enumerate() {
        w.write_record([
            i.to_string(),
            format!("{:.9e}", f.amplitude),
            format!("{:.9e}", f.center),
            format!("{:.9e}", f.sigma),
            format!("{:.9e}", f.baseline),
            format!("{:.9e}", f.residual_rms),
            f.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_trace() -> SampledTrace {
        let samples = vec![0.1, 0.5, 1.0, 0.5, 0.1, -0.3];
        SampledTrace::new(0.25, 2e-5, Channel::Difference, samples).unwrap()
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let trace = sample_trace();
        let mut buf = Vec::new();
        write_trace_bin(&mut buf, &trace).unwrap();
        assert_eq!(&buf[..8], TRACE_MAGIC);
        let back = read_trace_bin(buf.as_slice()).unwrap();
        assert_eq!(back.dt.to_bits(), trace.dt.to_bits());
        assert_eq!(back.t0.to_bits(), trace.t0.to_bits());
        assert_eq!(back.channel, trace.channel);
        let bits = |t: &SampledTrace| t.samples.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&trace));
    }

    #[test]
    fn binary_rejects_corruption() {
        let trace = sample_trace();
        let mut buf = Vec::new();
        write_trace_bin(&mut buf, &trace).unwrap();

        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            read_trace_bin(bad_magic.as_slice()),
            Err(IoError::Malformed(_))
        ));

        let mut bad_channel = buf.clone();
        bad_channel[24] = 42;
        assert!(matches!(
            read_trace_bin(bad_channel.as_slice()),
            Err(IoError::Malformed(_))
        ));

        let truncated = &buf[..buf.len() - 4];
        assert!(matches!(read_trace_bin(truncated), Err(IoError::Io(_))));
    }

    #[test]
    fn csv_round_trip_preserves_structure() {
        let trace = sample_trace();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time_s,value\n"));
        let back = read_trace_csv(buf.as_slice(), Channel::Difference).unwrap();
        assert_eq!(back.len(), trace.len());
        assert!((back.dt - trace.dt).abs() < 1e-12 * trace.dt);
        assert!((back.t0 - trace.t0).abs() < 1e-9);
        for (a, b) in back.samples.iter().zip(&trace.samples) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn csv_rejects_malformed_input() {
        let bad_header = "t,v\n0,1\n1,2\n";
        assert!(matches!(
            read_trace_csv(bad_header.as_bytes(), Channel::Sum),
            Err(IoError::Malformed(_))
        ));

        let non_uniform = "time_s,value\n0.0,1.0\n1.0,2.0\n3.0,2.0\n";
        assert!(matches!(
            read_trace_csv(non_uniform.as_bytes(), Channel::Sum),
            Err(IoError::Malformed(_))
        ));

        let too_short = "time_s,value\n0.0,1.0\n";
        assert!(matches!(
            read_trace_csv(too_short.as_bytes(), Channel::Sum),
            Err(IoError::Malformed(_))
        ));

        let bad_field = "time_s,value\n0.0,one\n1.0,2.0\n";
        assert!(matches!(
            read_trace_csv(bad_field.as_bytes(), Channel::Sum),
            Err(IoError::Malformed(_))
        ));
    }

    #[test]
    fn fit_table_schema_is_stable() {
        let fit = GaussianFit {
            amplitude: 0.0074,
            center: 0.5188,
            sigma: 0.1,
            baseline: 0.001,
            covariance: [[0.0; 4]; 4],
            residual_rms: 1e-5,
            iterations: 9,
            converged: true,
        };
        let mut buf = Vec::new();
        write_fits_csv(&mut buf, &[fit.clone(), fit]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "pulse_index,amplitude,center_s,sigma_s,baseline,residual_rms,converged"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("0,"));
        assert!(row.ends_with(",true"));
        assert_eq!(lines.count(), 1);
    }

    #[test]
    fn save_and_load_choose_format_by_extension() {
        let dir = std::env::temp_dir().join(format!("wvsim-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let trace = sample_trace();

        let bin = dir.join("trace.bin");
        save_trace(&bin, &trace).unwrap();
        let back = load_trace(&bin, Channel::Sum).unwrap();
        assert_eq!(back.channel, Channel::Difference);
        assert_eq!(back.samples, trace.samples);

        let csv_path = dir.join("trace.csv");
        save_trace(&csv_path, &trace).unwrap();
        let back = load_trace(&csv_path, Channel::Difference).unwrap();
        assert_eq!(back.len(), trace.len());

        std::fs::remove_dir_all(&dir).ok();
    }
}
