use super::{window, AudioBuffer};
use crate::error::{invalid, Result};

// Zero crossings of the interpolation kernel on each side, measured at the
// lower of the two rates.
const ZERO_CROSSINGS: f64 = 64.0;
const KAISER_BETA: f64 = 9.0;
// Cutoff as a fraction of the lower Nyquist frequency.
const ROLLOFF: f64 = 0.92;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Windowed-sinc sample-rate conversion.
///
/// Output length is `round(len * target / source)`. A Kaiser-windowed sinc
/// low-pass with cutoff just below `min(source, target) / 2` is applied; the
/// kernel is evaluated per output phase, so any rational ratio is
/// supported. Same-rate conversion returns an exact copy.
pub fn resample(audio: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(invalid("target sample rate must be positive"));
    }
    let source_rate = audio.sample_rate();
    if source_rate == target_rate {
        return Ok(audio.clone());
    }
    let g = gcd(source_rate as u64, target_rate as u64);
    let up = target_rate as u64 / g;
    let down = source_rate as u64 / g;
    let x = audio.samples();
    let out_len = ((x.len() as f64) * target_rate as f64 / source_rate as f64).round() as usize;

    // Cutoff in cycles per input sample, relative to the input Nyquist.
    let cutoff = ROLLOFF * (target_rate as f64 / source_rate as f64).min(1.0);
    let half_width = ZERO_CROSSINGS / cutoff;
    let reach = half_width.ceil() as i64;

    let kernel = |tau: f64| cutoff * sinc(cutoff * tau) * window::kaiser(tau / half_width, KAISER_BETA);

    // Precompute one tap table per output phase.
    let phases = up as usize;
    let taps = (2 * reach + 1) as usize;
    let mut table = vec![0.0; phases * taps];
    for p in 0..phases {
        let frac = p as f64 / up as f64;
        for t in 0..taps {
            let offset = t as i64 - reach;
            table[p * taps + t] = kernel(frac - offset as f64);
        }
    }

    let mut out = Vec::with_capacity(out_len);
    for j in 0..out_len as u64 {
        let num = j * down;
        let base = (num / up) as i64;
        let phase = (num % up) as usize;
        let row = &table[phase * taps..(phase + 1) * taps];
        let mut acc = 0.0;
        let lo = (base - reach).max(0);
        let hi = (base + reach).min(x.len() as i64 - 1);
        for i in lo..=hi {
            acc += x[i as usize] * row[(i - base + reach) as usize];
        }
        out.push(acc);
    }
    Ok(AudioBuffer::from_finite(out, target_rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_rate_is_identity() {
        let a = AudioBuffer::new(vec![0.1, -0.4, 0.9, 0.3], 16000).unwrap();
        assert_eq!(resample(&a, 16000).unwrap(), a);
    }

    #[test]
    fn zero_target_rejected() {
        let a = AudioBuffer::zeros(10, 16000).unwrap();
        assert!(resample(&a, 0).is_err());
    }

    #[test]
    fn output_length_rounds() {
        let a = AudioBuffer::zeros(16001, 16000).unwrap();
        assert_eq!(resample(&a, 8000).unwrap().len(), 8001); // 8000.5 rounds up
        let a = AudioBuffer::zeros(441, 44100).unwrap();
        assert_eq!(resample(&a, 16000).unwrap().len(), 160);
    }

    #[test]
    fn dc_gain_is_unity_in_the_interior() {
        let a = AudioBuffer::new(vec![0.5; 4000], 16000).unwrap();
        let b = resample(&a, 8000).unwrap();
        for &v in &b.samples()[200..1800] {
            assert!((v - 0.5).abs() < 1e-4, "{v}");
        }
    }
}
