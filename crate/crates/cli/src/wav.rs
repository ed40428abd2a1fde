use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use paragse::dsp::AudioBuffer;

use crate::CliError;

const SCALE: f64 = 32768.0;

/// Reads a mono 16-bit PCM WAV file into `[-1, 1)`.
pub fn read_wav(path: &Path) -> Result<AudioBuffer, CliError> {
    let wav = |e| CliError::wav(path, e);
    let mut r = WavReader::open(path).map_err(wav)?;
    let spec = r.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != SampleFormat::Int {
        return Err(CliError::Data(format!(
            "{}: need mono 16-bit PCM, got {} channel(s) of {}-bit {:?}",
            path.display(),
            spec.channels,
            spec.bits_per_sample,
            spec.sample_format
        )));
    }
    let samples = r
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / SCALE))
        .collect::<Result<Vec<_>, _>>()
        .map_err(wav)?;
    Ok(AudioBuffer::new(samples, spec.sample_rate)?)
}

/// Writes mono 16-bit PCM, clipping to the representable range.
pub fn write_wav(path: &Path, audio: &AudioBuffer) -> Result<(), CliError> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let wav = |e| CliError::wav(path, e);
    let mut w = WavWriter::create(path, spec).map_err(wav)?;
    for &x in audio.samples() {
        let v = (x * SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        w.write_sample(v).map_err(wav)?;
    }
    w.finalize().map_err(wav)
}

/// The audio exactly as [`write_wav`] would store it.
pub fn quantize(audio: &AudioBuffer) -> Result<AudioBuffer, CliError> {
    let q = audio
        .samples()
        .iter()
        .map(|&x| (x * SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) / SCALE)
        .collect();
    Ok(AudioBuffer::new(q, audio.sample_rate())?)
}
