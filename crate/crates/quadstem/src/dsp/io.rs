use std::path::Path;

use crate::dsp::wave::Waveform;
use crate::error::{QuadstemError, Result};

fn io_err(path: &Path, message: impl ToString) -> QuadstemError {
    QuadstemError::AudioIo { path: path.display().to_string(), message: message.to_string() }
}

/// Reads a WAV (PCM 16/24-bit or IEEE float) or FLAC file, downmixing
/// multichannel content to mono by averaging.
pub fn read_audio(path: &Path) -> Result<Waveform> {
    match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
        Some(ext) if ext == "wav" => read_wav(path),
        Some(ext) if ext == "flac" => read_flac(path),
        other => Err(io_err(path, format!("unsupported audio format {other:?}"))),
    }
}

fn read_wav(path: &Path) -> Result<Waveform> {
    let mut reader = hound::WavReader::open(path).map_err(|e| io_err(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| io_err(path, e))?,
        (hound::SampleFormat::Int, bits @ (16 | 24 | 32)) => {
            let scale = (1i64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| io_err(path, e))?
        }
        (fmt, bits) => {
            return Err(io_err(path, format!("unsupported WAV encoding {fmt:?}/{bits}-bit")))
        }
    };
    Waveform::new(downmix(&interleaved, channels), spec.sample_rate)
}

fn read_flac(path: &Path) -> Result<Waveform> {
    let mut reader = claxon::FlacReader::open(path).map_err(|e| io_err(path, e))?;
    let info = reader.streaminfo();
    let channels = info.channels as usize;
    let scale = (1i64 << (info.bits_per_sample - 1)) as f64;
    let interleaved: Vec<f64> = reader
        .samples()
        .map(|s| s.map(|v| v as f64 / scale))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| io_err(path, e))?;
    Waveform::new(downmix(&interleaved, channels), info.sample_rate)
}

fn downmix(interleaved: &[f64], channels: usize) -> Vec<f64> {
    if channels <= 1 {
        return interleaved.to_vec();
    }
    interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect()
}

/// Writes a mono 32-bit float WAV file.
pub fn write_wav(path: &Path, wave: &Waveform) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| io_err(path, e))?;
    for &s in &wave.samples {
        writer.write_sample(s as f32).map_err(|e| io_err(path, e))?;
    }
    writer.finalize().map_err(|e| io_err(path, e))?;
    Ok(())
}
