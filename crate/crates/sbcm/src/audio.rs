//! 16-bit PCM mono WAV input and output.

use std::path::Path;

use sbcm_core::Waveform;

use crate::error::{Error, Result};

pub fn read_wav(path: &Path) -> Result<Waveform> {
    let wav = |e| Error::Wav { path: path.to_path_buf(), source: e };
    let mut reader = hound::WavReader::open(path).map_err(wav)?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::format(
            path,
            format!("expected 16-bit PCM mono, got {} channel(s) of {}-bit {:?}", spec.channels, spec.bits_per_sample, spec.sample_format),
        ));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<Vec<f64>, _>>()
        .map_err(wav)?;
    Ok(Waveform::new(samples, spec.sample_rate)?)
}

/// Quantises samples in [-1, 1] to 16 bits; values outside are clipped.
pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let wav = |e| Error::Wav { path: path.to_path_buf(), source: e };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let spec = hound::WavSpec { channels: 1, sample_rate, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
    let mut w = hound::WavWriter::create(path, spec).map_err(wav)?;
    for &s in samples {
        w.write_sample((s * 32767.0).round().clamp(-32768.0, 32767.0) as i16).map_err(wav)?;
    }
    w.finalize().map_err(wav)
}
