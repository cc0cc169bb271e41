use std::path::Path;

use super::{AudioBuffer, DspError, SAMPLE_RATE};

const FULL_SCALE: f64 = 32768.0;

pub fn quantize_i16(x: f64) -> i16 {
    (x * FULL_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

pub fn dequantize_i16(s: i16) -> f64 {
    s as f64 / FULL_SCALE
}

/// Reads a mono 16-bit PCM 16 kHz WAV. Anything else is rejected.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, DspError> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let bad = |reason: String| DspError::WavFormat {
        path: path.display().to_string(),
        reason,
    };
    if spec.channels != 1 {
        return Err(bad(format!("{} channels, expected mono", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(bad(format!(
            "{:?} {}-bit samples, expected 16-bit PCM",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(DspError::SampleRate(spec.sample_rate));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(dequantize_i16))
        .collect::<Result<Vec<_>, _>>()?;
    AudioBuffer::new(samples)
}

/// Writes mono 16-bit PCM at 16 kHz; samples are rounded and clipped.
pub fn write_wav(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<(), DspError> {
    let quantized: Vec<i16> = audio.samples().iter().map(|&x| quantize_i16(x)).collect();
    write_wav_i16(path, &quantized)
}

pub(crate) fn write_wav_i16(path: impl AsRef<Path>, samples: &[i16]) -> Result<(), DspError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in samples {
        writer.write_sample(s)?;
    }
    writer.finalize()?;
    Ok(())
}
