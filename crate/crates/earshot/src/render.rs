//! Binaural room-impulse-response synthesis: specular reflections rendered
//! through the head model with per-reflection magnitude filters and
//! fractional delays, plus a stochastic diffuse tail shaped from the
//! energy histogram of the diffusion pass.

use crate::dsp::{
    energy, frac_delay_kernel, magnitude_fir_delay, split_into_bands, MagnitudeFirDesigner,
    BAND_FIR_TAPS, FRAC_DELAY_HALF,
};
use crate::error::{Error, Result};
use crate::head::{ear_filters, HeadModel};
use crate::image_source::{adaptive_max_order, enumerate_from_position, ImageSource};
use crate::math::{derive_seed, fill_standard_normal, lerp_table, Vec3};
use crate::rain::{rain_diffusion_binned, EnergyHistogram, DEFAULT_BIN_WIDTH_S, DEFAULT_N_RAYS};
use crate::room::{RoomSpec, SourceSpec, ANCHOR_HZ};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::path::Path;

/// Simulation controls. `Default` gives the settings used by the presets
/// at full fidelity; scale presets shrink `n_rays` and set an explicit
/// `duration` to trade accuracy for speed.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Output sample rate in Hz.
    pub sample_rate: f64,
    /// Impulse-response length in seconds; `None` derives a length from
    /// the room's predicted decay.
    pub duration: Option<f64>,
    /// Maximum specular reflection order; `None` chooses adaptively so
    /// that everything audible within the duration is included.
    pub max_order: Option<u32>,
    /// Rays for the diffuse-energy pass.
    pub n_rays: usize,
    /// Master switch for the diffuse pass; `false` renders specular-only.
    pub diffusion: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            sample_rate: 16_000.0,
            duration: None,
            max_order: None,
            n_rays: DEFAULT_N_RAYS,
            diffusion: true,
        }
    }
}

/// Scene descriptors carried alongside a rendered response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RirMetadata {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub range_m: f64,
    /// Mean wall absorption over the four walls and all anchor bands.
    pub wall_absorption: f64,
    pub seed: u64,
}

/// A two-channel impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct BinauralRir {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub sample_rate: f64,
    pub metadata: Option<RirMetadata>,
}

impl BinauralRir {
    pub fn n_samples(&self) -> usize {
        self.left.len()
    }

    pub fn duration_s(&self) -> f64 {
        self.left.len() as f64 / self.sample_rate
    }

    /// Total energy summed over both channels.
    pub fn total_energy(&self) -> f64 {
        energy(&self.left) + energy(&self.right)
    }

    /// Write as a stereo float WAV.
    pub fn save_wav(&self, path: &Path) -> Result<()> {
        crate::io::write_wav_stereo(
            path,
            &self.left,
            &self.right,
            self.sample_rate.round() as u32,
        )
    }
}

/// Reflections whose strongest band falls more than this far below the
/// loudest provided image are skipped by the renderer.
const PRUNE_DB: f64 = 60.0;

/// Accumulate `amp · (a ⊛ b)` into `out` starting at sample `start`
/// (clipping anything that falls outside the buffer).
fn add_product(out: &mut [f64], start: isize, amp: f64, a: &[f64], b: &[f64]) {
    let n = out.len() as isize;
    for (i, &av) in a.iter().enumerate() {
        if av == 0.0 {
            continue;
        }
        let base = start + i as isize;
        if base >= n {
            break;
        }
        let av = av * amp;
        for (j, &bv) in b.iter().enumerate() {
            let idx = base + j as isize;
            if idx < 0 {
                continue;
            }
            if idx >= n {
                break;
            }
            out[idx as usize] += av * bv;
        }
    }
}

/// Render the specular part of a binaural response from a list of image
/// sources. Each image contributes, per ear, a fractional-delay kernel at
/// its exact arrival time and a linear-phase FIR realizing its reflection
/// band gains combined with the head model's direction-dependent shadow;
/// amplitudes fall off as 1/distance. Reflections more than 60 dB below
/// the loudest one are skipped.
pub fn render_specular_rir(
    images: &[ImageSource],
    room: &RoomSpec,
    head: &HeadModel,
    sample_rate: f64,
    duration: f64,
) -> Result<BinauralRir> {
    if !(sample_rate > 0.0) || !(duration > 0.0) {
        return Err(Error::InvalidConfig(
            "sample rate and duration must be positive".into(),
        ));
    }
    let n = (duration * sample_rate).round() as usize;
    let rp: Vec3 = room.receiver_position.into();
    let c = room.speed_of_sound;
    if let Some(min_d) = images
        .iter()
        .map(|im| im.position.distance(rp))
        .min_by(|a, b| a.partial_cmp(b).unwrap())
    {
        if min_d / c >= duration {
            return Err(Error::InvalidConfig(format!(
                "duration {duration} s ends before the first arrival at {:.4} s",
                min_d / c
            )));
        }
    }

    let mut left = vec![0.0f64; n];
    let mut right = vec![0.0f64; n];
    let designer = MagnitudeFirDesigner::new(BAND_FIR_TAPS, sample_rate);
    let grid = designer.grid().to_vec();
    let fir_delay = magnitude_fir_delay(BAND_FIR_TAPS);

    // Strongest possible contribution, for relative pruning.
    let mut peak_amp = 0.0f64;
    for im in images {
        let d = im.position.distance(rp).max(1e-3);
        let g = im.band_gains.iter().cloned().fold(0.0f64, f64::max);
        peak_amp = peak_amp.max(g / d);
    }
    let prune_at = peak_amp * 10f64.powf(-PRUNE_DB / 20.0);

    // Measured sets are resampled once so per-reflection lookups are cheap.
    let head_rs;
    let head = match head {
        HeadModel::Measured(set) => {
            head_rs = HeadModel::Measured(set.resampled_to(sample_rate));
            &head_rs
        }
        other => other,
    };

    let mut mags = vec![0.0f64; grid.len()];
    for im in images {
        let d = im.position.distance(rp).max(1e-3);
        let amp = 1.0 / d;
        let max_gain = im.band_gains.iter().cloned().fold(0.0f64, f64::max);
        if amp * max_gain <= prune_at && prune_at > 0.0 {
            continue;
        }
        let base = (d / c) * sample_rate;
        if base >= (n + BAND_FIR_TAPS) as f64 {
            continue; // entire contribution lands past the buffer
        }
        let (az, el) = room.direction_of(im.position);
        // Reflection band gains interpolated onto the FIR design grid.
        for (k, &f) in grid.iter().enumerate() {
            mags[k] = lerp_table(&ANCHOR_HZ, &im.band_gains, f);
        }
        match head {
            HeadModel::Sphere(s) => {
                let itd = s.itd(az, el);
                let (al, ar) = s.shadow_alphas(az, el);
                for (out, alpha, delay_s) in
                    [(&mut left, al, -itd / 2.0), (&mut right, ar, itd / 2.0)]
                {
                    let ear_mags: Vec<f64> = grid
                        .iter()
                        .zip(mags.iter())
                        .map(|(&f, &m)| m * s.shadow_magnitude(alpha, f))
                        .collect();
                    let fir = designer.design(&ear_mags);
                    place(out, base + delay_s * sample_rate, amp, &fir, fir_delay);
                }
            }
            HeadModel::Measured(_) => {
                let (fl, fr) = ear_filters(head, az, el, sample_rate)?;
                let band_fir = designer.design(&mags);
                for (out, ear) in [(&mut left, &fl), (&mut right, &fr)] {
                    // Compose band FIR and fractional delay, then convolve
                    // with the measured response during placement.
                    let target = base + ear.delay_s * sample_rate - fir_delay;
                    let u = target - FRAC_DELAY_HALF as f64;
                    let s0 = u.floor();
                    let kernel = frac_delay_kernel(u - s0, FRAC_DELAY_HALF);
                    let mut composed = vec![0.0f64; band_fir.len() + kernel.len() - 1];
                    for (i, &a) in band_fir.iter().enumerate() {
                        for (j, &b) in kernel.iter().enumerate() {
                            composed[i + j] += a * b;
                        }
                    }
                    add_product(out, s0 as isize, amp, &composed, &ear.taps);
                }
            }
        }
    }
    Ok(BinauralRir {
        left,
        right,
        sample_rate,
        metadata: None,
    })
}

/// Place `amp · fir` so that its group-delay center lands at fractional
/// sample position `base`, using a windowed-sinc fractional delay.
fn place(out: &mut [f64], base: f64, amp: f64, fir: &[f64], fir_delay: f64) {
    let u = base - fir_delay - FRAC_DELAY_HALF as f64;
    let s0 = u.floor();
    let kernel = frac_delay_kernel(u - s0, FRAC_DELAY_HALF);
    add_product(out, s0 as isize, amp, fir, &kernel);
}

/// Shape seeded white noise to the diffuse-energy histogram: the noise is
/// split into the anchor bands, every (time bin × band) segment is scaled
/// to carry exactly half the histogram's energy for that cell, and the
/// bands are summed. Left and right use independent noise streams.
pub fn synthesize_diffuse_tail(
    hist: &EnergyHistogram,
    sample_rate: f64,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let len = ((hist.n_bins() as f64) * hist.bin_width_s * sample_rate).round() as usize;
    let mut channels = Vec::with_capacity(2);
    for ch in 0..2u64 {
        let mut out = vec![0.0f64; len];
        if len == 0 || hist.is_zero() {
            channels.push(out);
            continue;
        }
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, &[ch]));
        let mut noise = vec![0.0f64; len];
        fill_standard_normal(&mut rng, &mut noise);
        let bands = split_into_bands(&noise, sample_rate);
        for (b, band) in bands.iter().enumerate() {
            for (i, bins) in hist.bins.iter().enumerate() {
                let start = ((i as f64 * hist.bin_width_s * sample_rate).round() as usize).min(len);
                let end =
                    (((i + 1) as f64 * hist.bin_width_s * sample_rate).round() as usize).min(len);
                if start >= end {
                    continue;
                }
                let target = bins[b] * 0.5; // equal split across ears
                let actual = energy(&band[start..end]);
                if target <= 0.0 || actual <= 0.0 {
                    continue;
                }
                let scale = (target / actual).sqrt();
                for (o, &v) in out[start..end].iter_mut().zip(band[start..end].iter()) {
                    *o += scale * v;
                }
            }
        }
        channels.push(out);
    }
    let right = channels.pop().unwrap();
    let left = channels.pop().unwrap();
    (left, right)
}

/// Runs the diffuse-energy pass for a scene and mixes the shaped noise
/// tail into an already-rendered response — exactly the step
/// [`simulate_brir`] performs when diffusion is enabled. Exposed so
/// callers studying many seeds can cache the seed-independent specular
/// render and re-run only this stage; the result is bit-identical to a
/// fresh [`simulate_brir`] call with the same scene, settings, and seed.
///
/// `duration_s` must match the duration the response was rendered with.
pub fn add_diffuse_tail(
    rir: &mut BinauralRir,
    room: &RoomSpec,
    source: &SourceSpec,
    duration_s: f64,
    n_rays: usize,
    seed: u64,
) -> Result<()> {
    let rp: Vec3 = room.receiver_position.into();
    let hist = rain_diffusion_binned(
        room,
        source,
        rp,
        n_rays,
        duration_s,
        DEFAULT_BIN_WIDTH_S,
        derive_seed(seed, &[0x5261]),
    )?;
    if !hist.is_zero() {
        let (tl, tr) =
            synthesize_diffuse_tail(&hist, rir.sample_rate, derive_seed(seed, &[0x5454]));
        for (o, v) in rir.left.iter_mut().zip(tl.iter()) {
            *o += v;
        }
        for (o, v) in rir.right.iter_mut().zip(tr.iter()) {
            *o += v;
        }
    }
    Ok(())
}

/// Duration chosen when the caller does not fix one: a margin over the
/// classical volume/absorption decay estimate, bounded to a sane range.
pub fn auto_duration(room: &RoomSpec) -> f64 {
    let mut absorbing_area = 0.0;
    for (i, s) in room.surfaces.iter().enumerate() {
        let mean_a = s.absorption.iter().sum::<f64>() / s.absorption.len() as f64;
        absorbing_area += room.surface_area(crate::room::SurfaceId::ALL[i]) * mean_a;
    }
    if absorbing_area <= 1e-9 {
        return 1.5;
    }
    let t = 0.161 * room.volume() / absorbing_area;
    (1.25 * t).clamp(0.1, 1.5)
}

/// Simulate a complete binaural room impulse response: enumerate image
/// sources, render the specular part through the head model, run the
/// diffuse-energy pass, and add the shaped noise tail. Deterministic in
/// (scene, config, seed).
pub fn simulate_brir(
    room: &RoomSpec,
    source: &SourceSpec,
    head: &HeadModel,
    config: &SimConfig,
    seed: u64,
) -> Result<BinauralRir> {
    room.validate()?;
    let src_pos = source.validate_in(room)?;
    let rp: Vec3 = room.receiver_position.into();
    let fs = config.sample_rate;
    if !(fs > 0.0) || !fs.is_finite() {
        return Err(Error::InvalidConfig(format!("bad sample rate {fs}")));
    }
    let duration = match config.duration {
        Some(d) if d > 0.0 && d.is_finite() => d,
        Some(d) => return Err(Error::InvalidConfig(format!("bad duration {d}"))),
        None => auto_duration(room),
    };
    let direct_delay = src_pos.distance(rp) / room.speed_of_sound;
    if duration <= direct_delay {
        return Err(Error::InvalidConfig(format!(
            "duration {duration} s ends before the direct arrival at {direct_delay:.4} s"
        )));
    }

    let max_order = config
        .max_order
        .unwrap_or_else(|| adaptive_max_order(room, src_pos, duration));
    // Images beyond the render window (plus filter tails) cannot be heard.
    let reach =
        room.speed_of_sound * (duration + (BAND_FIR_TAPS + 2 * FRAC_DELAY_HALF + 2) as f64 / fs);
    let images = enumerate_from_position(room, src_pos, max_order, reach);
    let mut rir = render_specular_rir(&images, room, head, fs, duration)?;

    if config.diffusion {
        add_diffuse_tail(&mut rir, room, source, duration, config.n_rays, seed)?;
    }

    rir.metadata = Some(RirMetadata {
        azimuth_deg: source.azimuth,
        elevation_deg: source.elevation,
        range_m: source.range,
        wall_absorption: room.mean_wall_absorption(),
        seed,
    });
    Ok(rir)
}
