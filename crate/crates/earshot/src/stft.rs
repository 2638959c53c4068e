//! Short-time Fourier transform producing one-sided complex spectrograms.

use crate::dsp::hann_periodic;
use crate::error::{Error, Result};
use rustfft::{num_complex::Complex, FftPlanner};

/// One-sided complex spectrogram: `n_bins` = window_length/2 + 1 frequency
/// rows by `n_frames` time columns, stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub n_bins: usize,
    pub n_frames: usize,
    pub sample_rate: f64,
    /// Analysis window length in samples.
    pub window_length: usize,
    /// Frame advance in samples.
    pub hop: usize,
    /// Frame-major values: bin `f` of frame `t` lives at `t · n_bins + f`.
    pub values: Vec<Complex<f64>>,
}

impl Spectrogram {
    pub fn at(&self, bin: usize, frame: usize) -> Complex<f64> {
        self.values[frame * self.n_bins + bin]
    }

    /// Center frequency (Hz) of a bin: bin · sample_rate / window_length.
    pub fn bin_hz(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate / self.window_length as f64
    }

    /// Frequency spacing between adjacent bins.
    pub fn bin_spacing_hz(&self) -> f64 {
        self.sample_rate / self.window_length as f64
    }

    pub fn same_shape(&self, other: &Spectrogram) -> bool {
        self.n_bins == other.n_bins
            && self.n_frames == other.n_frames
            && self.window_length == other.window_length
            && (self.sample_rate - other.sample_rate).abs() < 1e-9
    }
}

/// Hann-windowed one-sided STFT. `window_ms` is converted to samples at
/// `sample_rate`; `overlap` is the fraction of each window shared with the
/// next (0.5 → hop of half a window). Frame count is
/// floor((len − window)/hop) + 1; a signal shorter than one window errors.
pub fn stft(signal: &[f64], sample_rate: f64, window_ms: f64, overlap: f64) -> Result<Spectrogram> {
    if !(sample_rate > 0.0) || !(window_ms > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "sample rate {sample_rate} and window {window_ms} ms must be positive"
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidConfig(format!(
            "overlap {overlap} must lie in [0, 1)"
        )));
    }
    let win = (window_ms / 1000.0 * sample_rate).round() as usize;
    if win < 2 {
        return Err(Error::InvalidConfig(format!(
            "window of {window_ms} ms at {sample_rate} Hz is shorter than 2 samples"
        )));
    }
    let hop = ((win as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    if signal.len() < win {
        return Err(Error::ShapeMismatch(format!(
            "signal of {} samples is shorter than one {win}-sample window",
            signal.len()
        )));
    }
    let n_frames = (signal.len() - win) / hop + 1;
    let n_bins = win / 2 + 1;
    let window: Vec<f64> = (0..win).map(|i| hann_periodic(i, win)).collect();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(win);
    let mut values = Vec::with_capacity(n_frames * n_bins);
    let mut buf = vec![Complex::new(0.0, 0.0); win];
    for t in 0..n_frames {
        let start = t * hop;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(signal[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        values.extend_from_slice(&buf[..n_bins]);
    }
    Ok(Spectrogram {
        n_bins,
        n_frames,
        sample_rate,
        window_length: win,
        hop,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_second_at_sixteen_khz_gives_thirty_frames() {
        let x = vec![0.5; 16_000];
        let s = stft(&x, 16_000.0, 64.0, 0.5).unwrap();
        assert_eq!(s.window_length, 1024);
        assert_eq!(s.hop, 512);
        assert_eq!(s.n_frames, 30);
        assert_eq!(s.n_bins, 513);
        assert!((s.bin_hz(32) - 500.0).abs() < 1e-9, "bin 32 sits at 500 Hz");
    }

    #[test]
    fn bin_center_sinusoid_concentrates_its_energy() {
        let fs = 16_000.0;
        let win = 1024.0;
        let bin = 10usize;
        let f = bin as f64 * fs / win;
        let x: Vec<f64> = (0..16_000)
            .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / fs).sin())
            .collect();
        let s = stft(&x, fs, 64.0, 0.5).unwrap();
        let band_energy =
            |b: usize| -> f64 { (0..s.n_frames).map(|t| s.at(b, t).norm_sqr()).sum() };
        let total: f64 = (0..s.n_bins).map(band_energy).sum();
        let near: f64 = (bin - 1..=bin + 1).map(band_energy).sum();
        assert!(
            near / total >= 0.95,
            "a bin-centered tone should keep ≥95% of its energy within ±1 bin, got {}",
            near / total
        );
    }

    #[test]
    fn zero_signal_gives_zero_spectrogram() {
        let s = stft(&vec![0.0; 4096], 16_000.0, 64.0, 0.5).unwrap();
        assert!(s.values.iter().all(|c| c.norm_sqr() == 0.0));
    }

    #[test]
    fn short_signal_is_rejected() {
        let err = stft(&[0.0; 100], 16_000.0, 64.0, 0.5).unwrap_err();
        assert!(format!("{err}").contains("shorter than one"));
    }

    #[test]
    fn invalid_overlap_is_rejected() {
        assert!(stft(&[0.0; 4096], 16_000.0, 64.0, 1.0).is_err());
        assert!(stft(&[0.0; 4096], 16_000.0, 64.0, -0.1).is_err());
    }

    #[test]
    fn eight_khz_variant_shapes() {
        let x = vec![0.1; 8000];
        let s = stft(&x, 8000.0, 64.0, 0.5).unwrap();
        assert_eq!(s.window_length, 512);
        assert_eq!(s.n_bins, 257);
        assert_eq!(s.n_frames, 30);
    }
}
