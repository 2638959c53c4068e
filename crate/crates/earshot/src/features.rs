//! Interaural features: level differences (dB) and unit-modulus phase
//! differences per time-frequency bin, assembled into the fixed-layout
//! vector [ILD | Re(IPD) | Im(IPD)] over the retained frequency bins.

use crate::dsp::{fft_convolve, resample};
use crate::error::{Error, Result};
use crate::math::fill_standard_normal;
use crate::render::BinauralRir;
use crate::stft::{stft, Spectrogram};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

/// Magnitude floor applied before ratios and logs so silent bins produce
/// large-but-finite values instead of infinities.
pub const MAG_FLOOR: f64 = 1e-12;

/// Feature-extraction settings. The defaults give 513 one-sided bins of
/// which 481 sit at or above the cutoff, for a 1443-dimensional vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Analysis sample rate (signals are resampled to this).
    pub sample_rate: f64,
    /// STFT window in milliseconds.
    pub window_ms: f64,
    /// Window overlap fraction.
    pub overlap: f64,
    /// Bins with center frequency below this are dropped.
    pub cutoff_hz: f64,
    /// Length of the emitted white-noise probe in seconds.
    pub noise_duration_s: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            sample_rate: 16_000.0,
            window_ms: 64.0,
            overlap: 0.5,
            cutoff_hz: 500.0,
            noise_duration_s: 1.0,
        }
    }
}

impl FeatureConfig {
    /// Dimension of the assembled feature vector under this configuration,
    /// computed without rendering anything. Mirrors the STFT's window and
    /// bin arithmetic.
    pub fn dim(&self) -> Result<usize> {
        if !(self.sample_rate > 0.0) || !(self.window_ms > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sample rate {} and window {} ms must be positive",
                self.sample_rate, self.window_ms
            )));
        }
        let win = (self.window_ms / 1000.0 * self.sample_rate).round() as usize;
        if win < 2 {
            return Err(Error::InvalidConfig(format!(
                "window of {} ms at {} Hz is shorter than 2 samples",
                self.window_ms, self.sample_rate
            )));
        }
        let n_bins = win / 2 + 1;
        let spacing = self.sample_rate / win as f64;
        let first = (0..n_bins)
            .find(|&b| b as f64 * spacing >= self.cutoff_hz)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "cutoff {} Hz removes every frequency bin",
                    self.cutoff_hz
                ))
            })?;
        Ok(3 * (n_bins - first))
    }
}

/// Time-frequency matrix sharing a spectrogram's shape (frame-major).
#[derive(Debug, Clone, PartialEq)]
pub struct TfMatrix<T> {
    pub n_bins: usize,
    pub n_frames: usize,
    /// Frequency spacing between adjacent bins, Hz.
    pub bin_spacing_hz: f64,
    pub values: Vec<T>,
}

impl<T: Copy> TfMatrix<T> {
    pub fn at(&self, bin: usize, frame: usize) -> T {
        self.values[frame * self.n_bins + bin]
    }
}

/// The assembled feature vector: `values` holds the three equal-length
/// blocks [ILD | Re(IPD) | Im(IPD)], each `n_retained` long.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub cutoff_hz: f64,
    /// Number of retained frequency bins (F′).
    pub n_retained: usize,
}

impl FeatureVector {
    /// Total dimension D = 3·F′.
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn ild_block(&self) -> &[f64] {
        &self.values[..self.n_retained]
    }

    pub fn ipd_re_block(&self) -> &[f64] {
        &self.values[self.n_retained..2 * self.n_retained]
    }

    pub fn ipd_im_block(&self) -> &[f64] {
        &self.values[2 * self.n_retained..]
    }
}

fn check_shapes(l: &Spectrogram, r: &Spectrogram) -> Result<()> {
    if !l.same_shape(r) {
        return Err(Error::ShapeMismatch(format!(
            "spectrograms disagree: {}×{} vs {}×{}",
            l.n_bins, l.n_frames, r.n_bins, r.n_frames
        )));
    }
    Ok(())
}

/// Interaural level difference per bin and frame:
/// 20·log10(max(|L|, ε) / max(|R|, ε)).
pub fn ild(l: &Spectrogram, r: &Spectrogram) -> Result<TfMatrix<f64>> {
    check_shapes(l, r)?;
    let values = l
        .values
        .iter()
        .zip(r.values.iter())
        .map(|(a, b)| 20.0 * (a.norm().max(MAG_FLOOR) / b.norm().max(MAG_FLOOR)).log10())
        .collect();
    Ok(TfMatrix {
        n_bins: l.n_bins,
        n_frames: l.n_frames,
        bin_spacing_hz: l.bin_spacing_hz(),
        values,
    })
}

/// Interaural phase difference per bin and frame: the unit-modulus phasor
/// (L/|L|)·conj(R/|R|). Bins where either channel is silent map to 1+0i.
pub fn ipd(l: &Spectrogram, r: &Spectrogram) -> Result<TfMatrix<Complex<f64>>> {
    check_shapes(l, r)?;
    let values = l
        .values
        .iter()
        .zip(r.values.iter())
        .map(|(a, b)| {
            let (ma, mb) = (a.norm(), b.norm());
            if ma <= MAG_FLOOR || mb <= MAG_FLOOR {
                Complex::new(1.0, 0.0)
            } else {
                (a / ma) * (b / mb).conj()
            }
        })
        .collect();
    Ok(TfMatrix {
        n_bins: l.n_bins,
        n_frames: l.n_frames,
        bin_spacing_hz: l.bin_spacing_hz(),
        values,
    })
}

/// Drop bins below the cutoff, average over frames (ILD arithmetically,
/// IPD as a renormalized complex mean — a circular mean that cannot wrap),
/// and concatenate [ILD | Re(IPD) | Im(IPD)].
pub fn assemble_feature(
    ildm: &TfMatrix<f64>,
    ipdm: &TfMatrix<Complex<f64>>,
    cutoff_hz: f64,
) -> Result<FeatureVector> {
    if ildm.n_bins != ipdm.n_bins || ildm.n_frames != ipdm.n_frames {
        return Err(Error::ShapeMismatch(format!(
            "ILD {}×{} vs IPD {}×{}",
            ildm.n_bins, ildm.n_frames, ipdm.n_bins, ipdm.n_frames
        )));
    }
    let first_bin = (0..ildm.n_bins)
        .find(|&b| b as f64 * ildm.bin_spacing_hz >= cutoff_hz)
        .ok_or_else(|| {
            Error::InvalidConfig(format!("cutoff {cutoff_hz} Hz removes every frequency bin"))
        })?;
    let retained = ildm.n_bins - first_bin;
    let t = ildm.n_frames as f64;

    let mut values = vec![0.0f64; 3 * retained];
    for (out_i, b) in (first_bin..ildm.n_bins).enumerate() {
        let mut ild_sum = 0.0;
        let mut ipd_sum = Complex::new(0.0, 0.0);
        for frame in 0..ildm.n_frames {
            ild_sum += ildm.at(b, frame);
            ipd_sum += ipdm.at(b, frame);
        }
        values[out_i] = ild_sum / t;
        let mean = ipd_sum / t;
        let unit = if mean.norm() > MAG_FLOOR {
            mean / mean.norm()
        } else {
            Complex::new(1.0, 0.0) // fully dispersed phases: neutral value
        };
        values[retained + out_i] = unit.re;
        values[2 * retained + out_i] = unit.im;
    }
    Ok(FeatureVector {
        values,
        cutoff_hz,
        n_retained: retained,
    })
}

/// End-to-end feature extraction for one rendered scene: emit seeded white
/// Gaussian noise through both channels of the response, resample to the
/// analysis rate, and run the STFT → ILD/IPD → assembly chain.
pub fn scene_to_feature_with(
    rir: &BinauralRir,
    config: &FeatureConfig,
    seed: u64,
) -> Result<FeatureVector> {
    if rir.left.len() != rir.right.len() {
        return Err(Error::ShapeMismatch("RIR channels differ in length".into()));
    }
    if rir.left.is_empty() {
        return Err(Error::ShapeMismatch("RIR is empty".into()));
    }
    let n_noise = (config.noise_duration_s * rir.sample_rate).round() as usize;
    if n_noise == 0 {
        return Err(Error::InvalidConfig(format!(
            "noise duration {} s yields no samples",
            config.noise_duration_s
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut noise = vec![0.0f64; n_noise];
    fill_standard_normal(&mut rng, &mut noise);

    let mut spectra = Vec::with_capacity(2);
    for ch in [&rir.left, &rir.right] {
        let heard = fft_convolve(&noise, ch);
        let heard = resample(&heard, rir.sample_rate, config.sample_rate);
        spectra.push(stft(
            &heard,
            config.sample_rate,
            config.window_ms,
            config.overlap,
        )?);
    }
    let r = spectra.pop().unwrap();
    let l = spectra.pop().unwrap();
    let ildm = ild(&l, &r)?;
    let ipdm = ipd(&l, &r)?;
    assemble_feature(&ildm, &ipdm, config.cutoff_hz)
}

/// [`scene_to_feature_with`] using the default configuration except for
/// the probe-noise duration.
pub fn scene_to_feature(
    rir: &BinauralRir,
    noise_duration_s: f64,
    seed: u64,
) -> Result<FeatureVector> {
    let config = FeatureConfig {
        noise_duration_s,
        ..FeatureConfig::default()
    };
    scene_to_feature_with(rir, &config, seed)
}
