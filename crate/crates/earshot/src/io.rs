//! WAV helpers: all audio moves on disk as 32-bit float WAV so that
//! round-trips are bit-exact at f32 precision.

use crate::error::{Error, Result};
use std::path::Path;

fn f32_spec(channels: u16, sample_rate: u32) -> hound::WavSpec {
    hound::WavSpec {
        channels,
        sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    }
}

/// Write a mono signal as 32-bit float WAV.
pub fn write_wav_mono(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let mut w = hound::WavWriter::create(path, f32_spec(1, sample_rate))?;
    for &s in samples {
        w.write_sample(s as f32)?;
    }
    w.finalize()?;
    Ok(())
}

/// Write an interleaved stereo pair as 32-bit float WAV.
pub fn write_wav_stereo(path: &Path, left: &[f64], right: &[f64], sample_rate: u32) -> Result<()> {
    if left.len() != right.len() {
        return Err(Error::ShapeMismatch(format!(
            "stereo channels differ in length: {} vs {}",
            left.len(),
            right.len()
        )));
    }
    let mut w = hound::WavWriter::create(path, f32_spec(2, sample_rate))?;
    for (&l, &r) in left.iter().zip(right.iter()) {
        w.write_sample(l as f32)?;
        w.write_sample(r as f32)?;
    }
    w.finalize()?;
    Ok(())
}

/// Read a mono 32-bit float WAV. Returns (samples, sample_rate).
pub fn read_wav_mono(path: &Path) -> Result<(Vec<f64>, u32)> {
    let mut r = hound::WavReader::open(path)?;
    let spec = r.spec();
    if spec.channels != 1 {
        return Err(Error::Format(format!(
            "{}: expected mono, found {} channels",
            path.display(),
            spec.channels
        )));
    }
    let samples = read_f32_samples(&mut r, path)?;
    Ok((samples, spec.sample_rate))
}

/// Read a stereo 32-bit float WAV. Returns (left, right, sample_rate).
pub fn read_wav_stereo(path: &Path) -> Result<(Vec<f64>, Vec<f64>, u32)> {
    let mut r = hound::WavReader::open(path)?;
    let spec = r.spec();
    if spec.channels != 2 {
        return Err(Error::Format(format!(
            "{}: expected stereo, found {} channels",
            path.display(),
            spec.channels
        )));
    }
    let inter = read_f32_samples(&mut r, path)?;
    let n = inter.len() / 2;
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for pair in inter.chunks_exact(2) {
        left.push(pair[0]);
        right.push(pair[1]);
    }
    Ok((left, right, spec.sample_rate))
}

fn read_f32_samples<R: std::io::Read>(
    r: &mut hound::WavReader<R>,
    path: &Path,
) -> Result<Vec<f64>> {
    let spec = r.spec();
    match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => r.samples::<f32>().map(|s| Ok(s? as f64)).collect(),
        (hound::SampleFormat::Int, bits) if bits <= 16 => {
            let scale = 1.0 / (1i64 << (bits - 1)) as f64;
            r.samples::<i16>().map(|s| Ok(s? as f64 * scale)).collect()
        }
        (hound::SampleFormat::Int, bits) if bits <= 32 => {
            let scale = 1.0 / (1i64 << (bits - 1)) as f64;
            r.samples::<i32>().map(|s| Ok(s? as f64 * scale)).collect()
        }
        (fmt, bits) => Err(Error::Format(format!(
            "{}: unsupported WAV sample format {fmt:?}/{bits}-bit",
            path.display()
        ))),
    }
}

/// Atomic file write: write to a sibling temp path, then rename into place,
/// so interrupted runs never leave half-written files.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
