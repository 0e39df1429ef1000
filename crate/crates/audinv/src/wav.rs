//! Mono WAV input and output.

use std::path::Path;

use anyhow::{bail, Context, Result};
use audinv_core::audio::{AudioClip, SAMPLE_RATE};
use hound::{SampleFormat, WavSpec};

/// Load a mono WAV file, scale it to `[-1, 1]` and zero-pad or truncate it to `length` samples.
/// Integer PCM of any width and 32-bit float are accepted.
pub fn load_wav(path: &Path, length: usize) -> Result<AudioClip> {
    let mut reader = hound::WavReader::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        bail!("{}: unsupported channel count {} (mono required)", path.display(), spec.channels);
    }
    if spec.sample_rate != SAMPLE_RATE {
        log::warn!(
            "{}: sample rate {} Hz, expected {SAMPLE_RATE} Hz; samples used as-is",
            path.display(),
            spec.sample_rate
        );
    }
    let samples: Vec<f32> = match spec.sample_format {
        SampleFormat::Float => reader.samples::<f32>().collect::<Result<_, _>>()?,
        SampleFormat::Int => {
            let scale = (1u64 << (spec.bits_per_sample - 1)) as f32;
            reader.samples::<i32>().map(|s| s.map(|v| v as f32 / scale)).collect::<Result<_, _>>()?
        }
    };
    let samples = samples.into_iter().map(|s| if s.is_finite() { s.clamp(-1.0, 1.0) } else { 0.0 }).collect();
    Ok(AudioClip::fit(samples, spec.sample_rate, length)?)
}

/// Write a clip as 16-bit PCM.
pub fn save_wav(path: &Path, clip: &AudioClip) -> Result<()> {
    let spec =
        WavSpec { channels: 1, sample_rate: clip.sample_rate(), bits_per_sample: 16, sample_format: SampleFormat::Int };
    let mut w = hound::WavWriter::create(path, spec).with_context(|| format!("cannot create {}", path.display()))?;
    for &s in clip.samples() {
        w.write_sample((s * 32768.0).round().clamp(-32768.0, 32767.0) as i16)?;
    }
    w.finalize()?;
    Ok(())
}
