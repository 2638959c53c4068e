//! Reverberation-time estimation (backward-integrated energy decay) and
//! classical room-acoustics formulas.

use crate::error::{Error, Result};
use crate::render::BinauralRir;
use crate::room::{RoomSpec, SurfaceId};

/// Decibel range of the decay curve used for the slope fit: from −5 dB
/// (skipping the direct sound's plateau) down to −25 dB.
const FIT_TOP_DB: f64 = -5.0;
const FIT_BOTTOM_DB: f64 = -25.0;

/// Estimate the 60 dB reverberation time of an impulse response.
///
/// Per channel the energy decay curve is the backward integral of the
/// squared response, in dB relative to its start. A least-squares line is
/// fit to the −5…−25 dB stretch and extrapolated to −60 dB; the channel
/// estimates are averaged. Errors when a channel never reaches −25 dB
/// (not enough usable decay) or the fitted slope is not a decay.
pub fn estimate_rt60(rir: &BinauralRir) -> Result<f64> {
    let mut total = 0.0;
    let channels = [&rir.left, &rir.right];
    for ch in channels {
        total += channel_rt60(ch, rir.sample_rate)?;
    }
    Ok(total / channels.len() as f64)
}

fn channel_rt60(h: &[f64], sample_rate: f64) -> Result<f64> {
    if h.is_empty() {
        return Err(Error::Unreliable("empty impulse response".into()));
    }
    // Backward integration (summed back-to-front for stability).
    let mut curve = vec![0.0f64; h.len()];
    let mut acc = 0.0;
    for i in (0..h.len()).rev() {
        acc += h[i] * h[i];
        curve[i] = acc;
    }
    let total = curve[0];
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Unreliable(
            "response carries no energy to measure a decay from".into(),
        ));
    }

    // The last stretch of a backward-integrated curve always plunges
    // because the integral runs out of window (truncation cliff), so only
    // the first 90% is trustworthy: the decay must genuinely reach the
    // bottom of the fit range in there.
    let usable = ((h.len() as f64) * 0.9).floor() as usize;

    // Least-squares line through the (time, dB) points inside the fit range.
    let mut n = 0.0f64;
    let mut reached_bottom = false;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0f64, 0.0, 0.0, 0.0);
    for (i, &e) in curve.iter().enumerate().take(usable) {
        if e <= 0.0 {
            break; // the curve is non-increasing; the tail is silence
        }
        let db = 10.0 * (e / total).log10();
        if db > FIT_TOP_DB {
            continue;
        }
        if db < FIT_BOTTOM_DB {
            reached_bottom = true;
            break;
        }
        let t = i as f64 / sample_rate;
        n += 1.0;
        sx += t;
        sy += db;
        sxx += t * t;
        sxy += t * db;
    }
    if n < 4.0 || !reached_bottom {
        return Err(Error::Unreliable(format!(
            "decay curve never spans {FIT_TOP_DB} to {FIT_BOTTOM_DB} dB; cannot extrapolate"
        )));
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return Err(Error::Unreliable("degenerate decay fit".into()));
    }
    let slope = (n * sxy - sx * sy) / denom; // dB per second
    if !(slope < 0.0) {
        return Err(Error::Unreliable(format!(
            "fitted decay slope {slope:.3} dB/s is not a decay"
        )));
    }
    Ok(-60.0 / slope)
}

/// Classical volume/absorption reverberation estimate:
/// 0.161·V / Σᵢ Sᵢ·ᾱᵢ with ᾱᵢ each surface's band-mean absorption.
pub fn sabine_rt60(room: &RoomSpec) -> f64 {
    let mut absorbing_area = 0.0;
    for (i, s) in room.surfaces.iter().enumerate() {
        let mean_a = s.absorption.iter().sum::<f64>() / s.absorption.len() as f64;
        absorbing_area += room.surface_area(SurfaceId::ALL[i]) * mean_a;
    }
    if absorbing_area <= 0.0 {
        return f64::INFINITY;
    }
    0.161 * room.volume() / absorbing_area
}

/// Frequency above which a room's sound field behaves diffusely:
/// 2000·√(RT60/V).
pub fn schroeder_frequency(rt60: f64, volume: f64) -> Result<f64> {
    if !(rt60 > 0.0) || !(volume > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "schroeder_frequency needs positive inputs, got rt60 {rt60}, volume {volume}"
        )));
    }
    Ok(2000.0 * (rt60 / volume).sqrt())
}
