//! Discrete Fourier spectra of real signals.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// `|X_k|` for `k = 0..=N/2`.
pub fn magnitude_spectrum(signal: &[f64]) -> Result<Vec<f64>> {
    if signal.len() < 2 {
        return Err(Error::invalid("spectrum needs at least two samples"));
    }
    let n = signal.len();
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    Ok(buf[..=n / 2].iter().map(|c| c.norm()).collect())
}

/// Index of the largest positive-frequency magnitude (DC excluded).
pub fn dominant_bin(signal: &[f64]) -> Result<usize> {
    let mag = magnitude_spectrum(signal)?;
    Ok((1..mag.len())
        .max_by(|&a, &b| mag[a].total_cmp(&mag[b]).then(b.cmp(&a)))
        .expect("at least one positive bin"))
}

/// Amplitude of the sinusoid at `bin`: `2 |X_k| / N` (`|X_k| / N` at
/// Nyquist).
pub fn bin_amplitude(signal: &[f64], bin: usize) -> Result<f64> {
    let n = signal.len();
    let mag = magnitude_spectrum(signal)?;
    let m = *mag
        .get(bin)
        .ok_or_else(|| Error::invalid(format!("bin {bin} above Nyquist")))?;
    let scale = if bin == 0 || 2 * bin == n { 1.0 } else { 2.0 };
    Ok(scale * m / n as f64)
}

/// One-sided power per bin `1..=N/2`, bins below Nyquist doubled so the sum
/// equals the signal energy without its DC component (Parseval).
fn one_sided_power(signal: &[f64]) -> Result<Vec<f64>> {
    let n = signal.len();
    let mag = magnitude_spectrum(signal)?;
    Ok((0..mag.len())
        .map(|k| {
            if k == 0 {
                0.0
            } else if 2 * k == n {
                mag[k] * mag[k]
            } else {
                2.0 * mag[k] * mag[k]
            }
        })
        .collect())
}

/// Mean over samples of the fraction of non-DC spectral energy lying
/// outside `band`. A zero-energy sample contributes 0.
pub fn spectral_artifact_ratio(samples: &[&[f64]], band: &[usize]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("artifact ratio of an empty batch"));
    }
    let n = samples[0].len();
    let mut acc = 0.0;
    for s in samples {
        if s.len() != n {
            return Err(Error::shape("spectral_artifact_ratio", &[s.len()], &[n]));
        }
        let p = one_sided_power(s)?;
        let total: f64 = p.iter().sum();
        if total > 0.0 {
            let inside: f64 = band.iter().filter_map(|&k| p.get(k)).sum();
            acc += ((total - inside) / total).clamp(0.0, 1.0);
        }
    }
    Ok(acc / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn pure_tone() {
        let s: Vec<f64> = (0..64)
            .map(|t| 1.3 * (2.0 * PI * 5.0 * t as f64 / 64.0 + 0.4).sin())
            .collect();
        assert_eq!(dominant_bin(&s).unwrap(), 5);
        assert!((bin_amplitude(&s, 5).unwrap() - 1.3).abs() < 1e-12);
        assert!(spectral_artifact_ratio(&[&s], &[5]).unwrap() < 1e-20);
    }

    #[test]
    fn parseval() {
        let s: Vec<f64> = (0..64).map(|t| ((t * 7919) % 13) as f64 - 6.0).collect();
        let mean = s.iter().sum::<f64>() / 64.0;
        let energy: f64 = s.iter().map(|v| (v - mean).powi(2)).sum();
        let p: f64 = one_sided_power(&s).unwrap().iter().sum();
        assert!((p / 64.0 - energy).abs() < 1e-9 * energy);
    }
}
