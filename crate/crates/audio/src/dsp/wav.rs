use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};
use crate::SAMPLE_RATE;

const SCALE: f64 = 32768.0;

fn format_err(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other}", path.display())),
    }
}

/// Reads a mono 16-bit PCM WAV at the system rate, scaled to `[-1, 1)`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<(Vec<f64>, u32)> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(|e| format_err(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Format(format!("{}: {} channels, expected mono", path.display(), spec.channels)));
    }
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Format(format!(
            "{}: {}-bit {:?} samples, expected 16-bit PCM",
            path.display(),
            spec.bits_per_sample,
            spec.sample_format
        )));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::Format(format!(
            "{}: sample rate {} Hz, expected {SAMPLE_RATE} Hz",
            path.display(),
            spec.sample_rate
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / SCALE))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| format_err(path, e))?;
    Ok((samples, spec.sample_rate))
}

/// Writes a mono 16-bit PCM WAV. Samples outside `[-1, 1]` are clamped.
pub fn write_wav(path: impl AsRef<Path>, x: &[f64], rate: u32) -> Result<()> {
    let path = path.as_ref();
    if rate != SAMPLE_RATE {
        return Err(Error::Format(format!("refusing to write {rate} Hz audio, expected {SAMPLE_RATE} Hz")));
    }
    let spec = WavSpec { channels: 1, sample_rate: rate, bits_per_sample: 16, sample_format: SampleFormat::Int };
    let mut w = WavWriter::create(path, spec).map_err(|e| format_err(path, e))?;
    let clipped = x.iter().filter(|v| v.abs() > 1.0).count();
    if clipped > 0 {
        log::warn!("{}: clamped {clipped} samples outside [-1, 1]", path.display());
    }
    for &v in x {
        let q = (v * SCALE).round().clamp(-SCALE, SCALE - 1.0) as i16;
        w.write_sample(q).map_err(|e| format_err(path, e))?;
    }
    w.finalize().map_err(|e| format_err(path, e))
}
