//! Short-time Fourier magnitude spectrograms.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    /// Periodic Hann window `0.5 - 0.5 cos(2πi/n)`.
    Hanning,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Hanning => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hanning" | "hann" => Ok(Window::Hanning),
            other => Err(Error::Config(format!("unknown window `{other}`"))),
        }
    }
}

/// Magnitudes of all `n_fft` DFT bins of windowed frames starting every
/// `hop` samples. Frame `t` covers samples `t·hop .. t·hop + n_fft`.
pub fn stft_spectrogram(samples: &[f64], n_fft: usize, window: Window, hop: usize) -> Result<Dataset> {
    if n_fft == 0 || hop == 0 {
        return Err(Error::Config(format!("n_fft ({n_fft}) and hop ({hop}) must be positive")));
    }
    if samples.len() < n_fft {
        return Err(Error::Domain(format!(
            "{} samples are fewer than one frame of {n_fft}",
            samples.len()
        )));
    }
    let frames = (samples.len() - n_fft) / hop + 1;
    let w = window.coefficients(n_fft);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut out = DMatrix::zeros(frames, n_fft);
    for t in 0..frames {
        let frame = &samples[t * hop..t * hop + n_fft];
        for ((b, &s), &wi) in buf.iter_mut().zip(frame).zip(&w) {
            *b = Complex::new(s * wi, 0.0);
        }
        fft.process(&mut buf);
        for (f, c) in buf.iter().enumerate() {
            out[(t, f)] = c.norm();
        }
    }
    Dataset::fully_observed(out)
}

/// Loads a mono waveform: `.csv`/`.txt` files hold one sample per line (the
/// first field of each line; a non-numeric first line is skipped), anything
/// else is raw little-endian signed 16-bit PCM scaled to `[-1, 1)`.
pub fn load_waveform(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    if matches!(ext, "csv" | "txt") {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let cell = line.split(',').next().unwrap_or("").trim();
            if cell.is_empty() {
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => out.push(v),
                _ if i == 0 => {}
                _ => {
                    return Err(Error::Parse {
                        line: i + 1,
                        column: 1,
                        message: format!("`{cell}` is not a sample value"),
                    })
                }
            }
        }
        Ok(out)
    } else {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() % 2 != 0 {
            return Err(Error::Domain("16-bit PCM data has an odd byte count".into()));
        }
        Ok(bytes
            .chunks_exact(2)
            .map(|b| f64::from(i16::from_le_bytes([b[0], b[1]])) / 32768.0)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_input_zero_output() {
        let s = stft_spectrogram(&[0.0; 300], 128, Window::Hanning, 64).unwrap();
        assert_eq!(s.n_rows(), 3);
        assert!(s.x().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn frame_count() {
        let s = stft_spectrogram(&[1.0; 256], 128, Window::Hanning, 128).unwrap();
        assert_eq!((s.n_rows(), s.n_dims()), (2, 128));
    }

    #[test]
    fn invalid_parameters() {
        assert!(matches!(stft_spectrogram(&[0.0; 10], 0, Window::Hanning, 1), Err(Error::Config(_))));
        assert!(matches!(stft_spectrogram(&[0.0; 10], 4, Window::Hanning, 0), Err(Error::Config(_))));
        assert!(stft_spectrogram(&[0.0; 10], 16, Window::Hanning, 4).is_err());
    }

    #[test]
    fn hann_is_periodic() {
        let w = Window::Hanning.coefficients(4);
        assert_eq!(w[0], 0.0);
        assert!((w[2] - 1.0).abs() < 1e-15);
        assert!((w[1] - 0.5).abs() < 1e-15);
    }
}
