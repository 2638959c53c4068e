//! Signal-processing primitives shared by the simulator and the feature
//! extractor: linear-phase FIR design from magnitude samples, windowed-sinc
//! fractional delays, FFT convolution, band splitting, and resampling.

use crate::room::{ANCHOR_HZ, N_BANDS};
use rustfft::{num_complex::Complex, FftPlanner};

/// Sum of squared samples.
pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Periodic Hann window value for index n of an N-point window.
pub fn hann_periodic(n: usize, len: usize) -> f64 {
    0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
}

/// Normalized sinc: sin(πx)/(πx).
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

// ── linear-phase FIR design ──────────────────────────────────────────────

/// Number of taps used for per-reflection magnitude-shaping filters.
pub const BAND_FIR_TAPS: usize = 64;

/// Reusable linear-phase FIR designer with a precomputed cosine table.
///
/// Designing one filter is a small matrix–vector product, so callers that
/// need thousands of filters (one per reflection and ear) amortize all the
/// trigonometry. See [`design_magnitude_fir`] for the design itself.
pub struct MagnitudeFirDesigner {
    n: usize,
    half: usize,
    /// Frequencies (Hz) of the one-sided design grid, length `half + 1`.
    freqs: Vec<f64>,
    /// cos(2πk(i − half)/n) for tap i, grid index k in 1..=half,
    /// flattened as `[i * half + (k − 1)]`.
    cos_table: Vec<f64>,
    /// Periodic Hann window times 1/n, per tap.
    win_scale: Vec<f64>,
}

impl MagnitudeFirDesigner {
    pub fn new(n_taps: usize, sample_rate: f64) -> Self {
        assert!(
            n_taps >= 4 && n_taps % 2 == 0,
            "n_taps must be even and >= 4"
        );
        let n = n_taps;
        let half = n / 2;
        let freqs = (0..=half)
            .map(|k| k as f64 * sample_rate / n as f64)
            .collect();
        let mut cos_table = Vec::with_capacity(n * half);
        for i in 0..n {
            let m = i as f64 - half as f64;
            for k in 1..=half {
                cos_table.push((2.0 * std::f64::consts::PI * k as f64 * m / n as f64).cos());
            }
        }
        let scale = 1.0 / n as f64;
        let win_scale = (0..n).map(|i| scale * hann_periodic(i, n)).collect();
        MagnitudeFirDesigner {
            n,
            half,
            freqs,
            cos_table,
            win_scale,
        }
    }

    /// Frequencies (Hz) at which [`design`](Self::design) samples the
    /// desired magnitude; length `n_taps/2 + 1`.
    pub fn grid(&self) -> &[f64] {
        &self.freqs
    }

    /// Design from magnitudes sampled on [`grid`](Self::grid).
    pub fn design(&self, mags: &[f64]) -> Vec<f64> {
        assert_eq!(
            mags.len(),
            self.half + 1,
            "need one magnitude per grid frequency"
        );
        let mut taps = vec![0.0; self.n];
        for (i, t) in taps.iter_mut().enumerate() {
            let row = &self.cos_table[i * self.half..(i + 1) * self.half];
            let mut acc = mags[0];
            for (k, &mk) in mags.iter().enumerate().skip(1) {
                let c = row[k - 1];
                acc += if k == self.half { mk * c } else { 2.0 * mk * c };
            }
            *t = acc * self.win_scale[i];
        }
        taps
    }
}

/// Design a linear-phase FIR whose magnitude response approximates
/// `mag_at(f)` (sampled at the FFT grid of `n_taps` points), using
/// frequency sampling with a periodic Hann window.
///
/// The returned filter is symmetric about tap `n_taps/2`, i.e. it delays
/// the signal by exactly `n_taps/2` samples; callers must compensate.
/// With a constant magnitude the result is an exact scaled impulse, so
/// unit gains pass signals through crisply. The zero-phase response comes
/// from a direct cosine sum — identical to an inverse FFT of the mirrored
/// even-symmetric spectrum, without the FFT plumbing — rotated so the
/// center lands on tap n/2.
pub fn design_magnitude_fir<F: Fn(f64) -> f64>(
    mag_at: F,
    n_taps: usize,
    sample_rate: f64,
) -> Vec<f64> {
    let designer = MagnitudeFirDesigner::new(n_taps, sample_rate);
    let mags: Vec<f64> = designer.grid().iter().map(|&f| mag_at(f)).collect();
    designer.design(&mags)
}

/// Group delay (in samples) of filters from [`design_magnitude_fir`].
pub fn magnitude_fir_delay(n_taps: usize) -> f64 {
    (n_taps / 2) as f64
}

/// Measure the magnitude response of an FIR at one frequency.
pub fn fir_magnitude_at(taps: &[f64], hz: f64, sample_rate: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * hz / sample_rate;
    let mut re = 0.0;
    let mut im = 0.0;
    for (n, &t) in taps.iter().enumerate() {
        re += t * (w * n as f64).cos();
        im -= t * (w * n as f64).sin();
    }
    (re * re + im * im).sqrt()
}

// ── fractional delay ─────────────────────────────────────────────────────

/// Half-width of the windowed-sinc fractional-delay kernel (11 taps total).
pub const FRAC_DELAY_HALF: usize = 5;

/// Windowed-sinc interpolation kernel realizing a delay of `half + frac`
/// samples, `frac` in [0, 1). Kernel length is 2·half + 1. An integral
/// delay (`frac` = 0) yields an exact unit impulse.
pub fn frac_delay_kernel(frac: f64, half: usize) -> Vec<f64> {
    debug_assert!((0.0..1.0).contains(&frac));
    let len = 2 * half + 1;
    let mut k = Vec::with_capacity(len);
    for i in 0..len {
        let x = i as f64 - half as f64 - frac;
        // Hann window over the kernel span, centered on the delayed peak.
        let w = 0.5 * (1.0 + (std::f64::consts::PI * x / (half as f64 + 1.0)).cos());
        k.push(sinc(x) * w.max(0.0));
    }
    k
}

// ── FFT convolution ──────────────────────────────────────────────────────

/// Full linear convolution of two real signals (output length a + b − 1).
pub fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    // Direct convolution is faster below a modest size threshold.
    if a.len().min(b.len()) <= 32 {
        let mut out = vec![0.0; out_len];
        let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
        for (i, &s) in short.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for (j, &l) in long.iter().enumerate() {
                out[i + j] += s * l;
            }
        }
        return out;
    }
    let n = next_pow2(out_len);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let mut fa: Vec<Complex<f64>> = a.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fa.resize(n, Complex::new(0.0, 0.0));
    let mut fb: Vec<Complex<f64>> = b.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fb.resize(n, Complex::new(0.0, 0.0));
    fft.process(&mut fa);
    fft.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(fb.iter()) {
        *x *= *y;
    }
    ifft.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa.truncate(out_len);
    fa.iter().map(|c| c.re * scale).collect()
}

// ── band splitting ───────────────────────────────────────────────────────

/// Band edges (Hz) separating the six anchor bands: geometric midpoints
/// between consecutive anchors. Band 0 spans [0, edge0), band 5 spans
/// [edge4, Nyquist].
pub fn band_edges() -> [f64; N_BANDS - 1] {
    let mut e = [0.0; N_BANDS - 1];
    for i in 0..N_BANDS - 1 {
        e[i] = (ANCHOR_HZ[i] * ANCHOR_HZ[i + 1]).sqrt();
    }
    e
}

/// Smooth step from 0 (below `edge − w`) to 1 (above `edge + w`) with a
/// raised-cosine transition.
fn smooth_step(f: f64, edge: f64, w: f64) -> f64 {
    if f <= edge - w {
        0.0
    } else if f >= edge + w {
        1.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * (f - edge) / (2.0 * w)).sin())
    }
}

/// Per-band spectral masks on a one-sided FFT grid of `n_fft` points at
/// `sample_rate`. The masks sum to exactly 1 at every bin (complementary
/// raised-cosine crossovers), so splitting and re-summing is lossless.
pub fn band_masks(n_fft: usize, sample_rate: f64) -> Vec<Vec<f64>> {
    let edges = band_edges();
    let half = n_fft / 2;
    let mut steps = vec![vec![0.0; half + 1]; edges.len()];
    for (ei, &edge) in edges.iter().enumerate() {
        let w = 0.15 * edge;
        for k in 0..=half {
            let f = k as f64 * sample_rate / n_fft as f64;
            steps[ei][k] = smooth_step(f, edge, w);
        }
    }
    let mut masks = vec![vec![0.0; half + 1]; N_BANDS];
    for k in 0..=half {
        // Telescoping: band 0 = 1 − s0, band i = s_{i−1} − s_i, band 5 = s4.
        masks[0][k] = 1.0 - steps[0][k];
        for b in 1..N_BANDS - 1 {
            masks[b][k] = steps[b - 1][k] - steps[b][k];
        }
        masks[N_BANDS - 1][k] = steps[N_BANDS - 2][k];
    }
    masks
}

/// Split a real signal into the six anchor bands using FFT masking.
/// The bands sum back to the input within round-off.
pub fn split_into_bands(x: &[f64], sample_rate: f64) -> Vec<Vec<f64>> {
    let n = next_pow2(x.len().max(2));
    let masks = band_masks(n, sample_rate);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(n, Complex::new(0.0, 0.0));
    fft.process(&mut buf);
    let scale = 1.0 / n as f64;
    let mut out = Vec::with_capacity(N_BANDS);
    for mask in &masks {
        let mut band: Vec<Complex<f64>> = buf.clone();
        for k in 0..n {
            // One-sided mask index: bins above Nyquist mirror below it.
            let ki = if k <= n / 2 { k } else { n - k };
            band[k] *= mask[ki];
        }
        ifft.process(&mut band);
        out.push(band[..x.len()].iter().map(|c| c.re * scale).collect());
    }
    out
}

// ── resampling ───────────────────────────────────────────────────────────

/// Windowed-sinc resampler. Passes the input through untouched when the
/// rates already match; otherwise interpolates with a 49-tap kernel and an
/// anti-aliasing cutoff at 90% of the lower Nyquist frequency.
pub fn resample(x: &[f64], from_hz: f64, to_hz: f64) -> Vec<f64> {
    assert!(
        from_hz > 0.0 && to_hz > 0.0,
        "sample rates must be positive"
    );
    if (from_hz - to_hz).abs() < 1e-9 {
        return x.to_vec();
    }
    if x.is_empty() {
        return Vec::new();
    }
    let ratio = to_hz / from_hz;
    let out_len = ((x.len() as f64) * ratio).floor().max(1.0) as usize;
    let cutoff = 0.9 * (from_hz.min(to_hz) / from_hz) * 0.5; // cycles per input sample
    let half = 24i64;
    let mut out = Vec::with_capacity(out_len);
    for m in 0..out_len {
        let center = m as f64 / ratio;
        let i0 = center.floor() as i64;
        let mut acc = 0.0;
        for i in (i0 - half)..=(i0 + half) {
            if i < 0 || i as usize >= x.len() {
                continue;
            }
            let d = center - i as f64;
            let w = 0.5 * (1.0 + (std::f64::consts::PI * d / (half as f64 + 1.0)).cos());
            acc += x[i as usize] * 2.0 * cutoff * sinc(2.0 * cutoff * d) * w.max(0.0);
        }
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn flat_magnitude_fir_is_an_exact_delayed_impulse() {
        let taps = design_magnitude_fir(|_| 1.0, BAND_FIR_TAPS, 16000.0);
        let center = BAND_FIR_TAPS / 2;
        assert_abs_diff_eq!(taps[center], 1.0, epsilon = 1e-9);
        for (i, &t) in taps.iter().enumerate() {
            if i != center {
                assert!(t.abs() < 1e-9, "tap {i} should vanish, got {t}");
            }
        }
    }

    #[test]
    fn magnitude_fir_tracks_a_band_profile() {
        // A gentle high-shelf cut: 1.0 below 1 kHz tapering to 0.4 at 8 kHz.
        let fs = 16000.0;
        let mag = |f: f64| {
            if f < 1000.0 {
                1.0
            } else {
                1.0 - 0.6 * (f - 1000.0) / 7000.0
            }
        };
        let taps = design_magnitude_fir(mag, BAND_FIR_TAPS, fs);
        for &f in &[250.0, 500.0, 2000.0, 4000.0, 6000.0] {
            let got = fir_magnitude_at(&taps, f, fs);
            let want = mag(f);
            assert!(
                (got - want).abs() < 0.08,
                "magnitude at {f} Hz: want {want:.3}, got {got:.3}"
            );
        }
    }

    #[test]
    fn frac_delay_kernel_is_identity_at_zero_fraction() {
        let k = frac_delay_kernel(0.0, FRAC_DELAY_HALF);
        assert_abs_diff_eq!(k[FRAC_DELAY_HALF], 1.0, epsilon = 1e-12);
        for (i, &v) in k.iter().enumerate() {
            if i != FRAC_DELAY_HALF {
                assert!(v.abs() < 1e-12, "tap {i} should vanish, got {v}");
            }
        }
    }

    #[test]
    fn frac_delay_shifts_a_sine_by_the_requested_amount() {
        // Delay a sampled sine by 0.37 samples and check against the
        // analytically shifted signal away from the edges.
        let n = 256;
        let freq = 0.07; // cycles per sample, well inside the passband
        let frac = 0.37;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64).sin())
            .collect();
        let k = frac_delay_kernel(frac, FRAC_DELAY_HALF);
        let y = fft_convolve(&x, &k);
        let delay = FRAC_DELAY_HALF as f64 + frac;
        for i in 40..n - 40 {
            let want = (2.0 * std::f64::consts::PI * freq * (i as f64 - delay)).sin();
            assert!(
                (y[i] - want).abs() < 2e-3,
                "sample {i}: want {want:.5}, got {:.5}",
                y[i]
            );
        }
    }

    #[test]
    fn fft_convolve_matches_direct_convolution() {
        let a: Vec<f64> = (0..83).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let b: Vec<f64> = (0..64).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
        let direct = {
            let mut out = vec![0.0; a.len() + b.len() - 1];
            for (i, &x) in a.iter().enumerate() {
                for (j, &y) in b.iter().enumerate() {
                    out[i + j] += x * y;
                }
            }
            out
        };
        let fast = fft_convolve(&a, &b);
        assert_eq!(fast.len(), direct.len());
        for (f, d) in fast.iter().zip(direct.iter()) {
            assert_abs_diff_eq!(f, d, epsilon = 1e-9);
        }
    }

    #[test]
    fn band_masks_sum_to_one_everywhere() {
        let masks = band_masks(1024, 16000.0);
        for k in 0..=512 {
            let total: f64 = masks.iter().map(|m| m[k]).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn band_split_reconstructs_the_signal() {
        let x: Vec<f64> = (0..500)
            .map(|i| (0.013 * i as f64).sin() + 0.3 * (0.21 * i as f64).cos())
            .collect();
        let bands = split_into_bands(&x, 16000.0);
        assert_eq!(bands.len(), N_BANDS);
        for i in 0..x.len() {
            let sum: f64 = bands.iter().map(|b| b[i]).sum();
            assert_abs_diff_eq!(sum, x[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn band_split_isolates_a_pure_tone() {
        // 1 kHz sits in band 3 ([707, 1414) Hz).
        let fs = 16000.0;
        let x: Vec<f64> = (0..2048)
            .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / fs).sin())
            .collect();
        let bands = split_into_bands(&x, fs);
        let energies: Vec<f64> = bands.iter().map(|b| energy(b)).collect();
        let total: f64 = energies.iter().sum();
        assert!(
            energies[3] / total > 0.98,
            "1 kHz tone should live in band 3: {energies:?}"
        );
    }

    #[test]
    fn resample_is_identity_at_equal_rates() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.1).sin()).collect();
        let y = resample(&x, 16000.0, 16000.0);
        assert_eq!(x, y, "equal-rate resampling must be bit-exact passthrough");
    }

    #[test]
    fn downsampling_preserves_an_in_band_tone() {
        let from = 16000.0;
        let to = 8000.0;
        let f = 440.0;
        let x: Vec<f64> = (0..3200)
            .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / from).sin())
            .collect();
        let y = resample(&x, from, to);
        assert_eq!(y.len(), 1600);
        for i in 100..y.len() - 100 {
            let want = (2.0 * std::f64::consts::PI * f * i as f64 / to).sin();
            assert!(
                (y[i] - want).abs() < 0.02,
                "sample {i}: want {want:.4}, got {:.4}",
                y[i]
            );
        }
    }
}
