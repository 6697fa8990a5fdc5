//! Mono WAV I/O: 16-bit PCM or 32-bit float, fixed sample rate, no resampling.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavEncoding {
    Pcm16,
    #[default]
    Float32,
}

/// Reads a mono file and checks its sample rate.
pub fn read_wav(path: impl AsRef<Path>, sample_rate: u32) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let mut reader = WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedWav(format!(
            "{}: {} channels, expected mono",
            path.display(),
            spec.channels
        )));
    }
    if spec.sample_rate != sample_rate {
        return Err(Error::UnsupportedWav(format!(
            "{}: {} Hz, expected {sample_rate} Hz",
            path.display(),
            spec.sample_rate
        )));
    }
    match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| Ok(s? as f64 / 32768.0))
            .collect(),
        (SampleFormat::Float, 32) => reader.samples::<f32>().map(|s| Ok(s? as f64)).collect(),
        (format, bits) => Err(Error::UnsupportedWav(format!(
            "{}: {bits}-bit {format:?}, expected 16-bit PCM or 32-bit float",
            path.display()
        ))),
    }
}

pub fn write_wav(path: impl AsRef<Path>, samples: &[f64], sample_rate: u32, encoding: WavEncoding) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => SampleFormat::Int,
            WavEncoding::Float32 => SampleFormat::Float,
        },
    };
    let mut writer = WavWriter::create(path, spec)?;
    for &x in samples {
        match encoding {
            WavEncoding::Pcm16 => writer.write_sample((x * 32768.0).round().clamp(-32768.0, 32767.0) as i16)?,
            WavEncoding::Float32 => writer.write_sample(x as f32)?,
        }
    }
    writer.finalize()?;
    Ok(())
}
