//! Direction-dependent ear filtering: a parametric rigid-sphere head model
//! (interaural time difference + first-order head shadow) and a loader for
//! measured HRIR sets stored on disk.

use crate::dsp::{design_magnitude_fir, magnitude_fir_delay, resample, BAND_FIR_TAPS};
use crate::error::{Error, Result};
use crate::io::{read_wav_mono, write_wav_mono};
use crate::math::{deg_to_rad, Vec3};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Speed of sound used inside the head model's time-difference formula.
/// Kept fixed (rather than tied to a room's configurable value) so a given
/// head model always produces the same filters.
const HEAD_C: f64 = 343.0;

/// Head model variants.
#[derive(Debug, Clone)]
pub enum HeadModel {
    /// Parametric rigid sphere.
    Sphere(SphereHead),
    /// Measured HRIR table loaded from disk.
    Measured(HrirSet),
}

impl HeadModel {
    /// The default head used by all presets: a 8.75 cm-radius sphere with
    /// ears on the interaural axis.
    pub fn default_sphere() -> HeadModel {
        HeadModel::Sphere(SphereHead::default())
    }
}

/// Rigid-sphere head parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SphereHead {
    /// Sphere radius in meters.
    pub radius_m: f64,
    /// Ears sit at azimuth ±ear_azimuth_deg, elevation 0, in head.
    pub ear_azimuth_deg: f64,
}

impl Default for SphereHead {
    fn default() -> Self {
        SphereHead {
            radius_m: 0.0875,
            ear_azimuth_deg: 90.0,
        }
    }
}

impl SphereHead {
    /// Interaural time difference in seconds for a source direction,
    /// positive when the left ear leads (source on the left):
    /// ITD = (r/c)·(λ + sin λ) with λ the lateral angle.
    pub fn itd(&self, azimuth_deg: f64, elevation_deg: f64) -> f64 {
        let lateral = (deg_to_rad(azimuth_deg).sin() * deg_to_rad(elevation_deg).cos())
            .clamp(-1.0, 1.0)
            .asin();
        (self.radius_m / HEAD_C) * (lateral + lateral.sin())
    }

    /// Angle (radians) between the source direction and each ear's
    /// direction, as (left, right).
    fn ear_angles(&self, azimuth_deg: f64, elevation_deg: f64) -> (f64, f64) {
        let az = deg_to_rad(azimuth_deg);
        let el = deg_to_rad(elevation_deg);
        let src = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
        let ear = deg_to_rad(self.ear_azimuth_deg);
        let left = Vec3::new(ear.cos(), ear.sin(), 0.0);
        let right = Vec3::new(ear.cos(), -ear.sin(), 0.0);
        (
            src.dot(left).clamp(-1.0, 1.0).acos(),
            src.dot(right).clamp(-1.0, 1.0).acos(),
        )
    }

    /// High-frequency emphasis factor of the first-order shadow filter for
    /// an incidence angle θ away from an ear: ≈2 toward the ear (bright),
    /// ≈0.1 at the deepest shadow near 150°, partial recovery behind
    /// (the rigid-sphere bright spot).
    fn shadow_alpha(theta_rad: f64) -> f64 {
        1.05 + 0.95 * (theta_rad * 180.0 / 150.0).cos()
    }

    /// Per-ear shadow emphasis factors (left, right) for a direction.
    pub fn shadow_alphas(&self, azimuth_deg: f64, elevation_deg: f64) -> (f64, f64) {
        let (tl, tr) = self.ear_angles(azimuth_deg, elevation_deg);
        (Self::shadow_alpha(tl), Self::shadow_alpha(tr))
    }

    /// Magnitude of the first-order shadow filter at frequency `hz` for
    /// emphasis factor `alpha`: |H| = √((1 + (αx)²)/(1 + x²)) with
    /// x = πf·r/c. Unity at DC for every direction.
    pub fn shadow_magnitude(&self, alpha: f64, hz: f64) -> f64 {
        let x = std::f64::consts::PI * hz * self.radius_m / HEAD_C;
        ((1.0 + (alpha * x).powi(2)) / (1.0 + x * x)).sqrt()
    }
}

/// One ear's filter: FIR taps plus the signal delay to apply, with the
/// taps' own group delay reported so renderers can compensate it.
#[derive(Debug, Clone, PartialEq)]
pub struct EarFilter {
    pub taps: Vec<f64>,
    /// Extra delay in seconds this ear receives (±ITD/2 for the sphere).
    pub delay_s: f64,
    /// Delay in samples already baked into `taps` by the filter design.
    pub group_delay_samples: f64,
}

/// Direction-dependent left/right filters for a head model at the given
/// sample rate.
///
/// Sphere model: the interaural time difference is split evenly between
/// the ears as ±ITD/2 `delay_s`, and each ear gets a linear-phase FIR
/// realizing its first-order shadow magnitude. Measured model: the stored
/// (resampled if needed) HRIR pair for the nearest direction, delays left
/// at zero since measured responses embed their own timing.
pub fn ear_filters(
    head: &HeadModel,
    azimuth_deg: f64,
    elevation_deg: f64,
    sample_rate: f64,
) -> Result<(EarFilter, EarFilter)> {
    match head {
        HeadModel::Sphere(s) => {
            let itd = s.itd(azimuth_deg, elevation_deg);
            let (al, ar) = s.shadow_alphas(azimuth_deg, elevation_deg);
            let make = |alpha: f64, delay: f64| EarFilter {
                taps: design_magnitude_fir(
                    |f| s.shadow_magnitude(alpha, f),
                    BAND_FIR_TAPS,
                    sample_rate,
                ),
                delay_s: delay,
                group_delay_samples: magnitude_fir_delay(BAND_FIR_TAPS),
            };
            // Positive ITD = left ear leads = left delay is negative.
            Ok((make(al, -itd / 2.0), make(ar, itd / 2.0)))
        }
        HeadModel::Measured(set) => {
            let (l, r) = set.filters_for(azimuth_deg, elevation_deg, sample_rate)?;
            Ok((
                EarFilter {
                    taps: l,
                    delay_s: 0.0,
                    group_delay_samples: 0.0,
                },
                EarFilter {
                    taps: r,
                    delay_s: 0.0,
                    group_delay_samples: 0.0,
                },
            ))
        }
    }
}

// ── measured HRIR sets ───────────────────────────────────────────────────

/// A measured HRIR pair for one direction (integer degrees).
#[derive(Debug, Clone)]
pub struct HrirEntry {
    pub azimuth_deg: i32,
    pub elevation_deg: i32,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// A direction-indexed table of measured HRIR pairs.
#[derive(Debug, Clone)]
pub struct HrirSet {
    pub sample_rate: f64,
    pub entries: Vec<HrirEntry>,
    /// When true, blend the four surrounding grid directions bilinearly;
    /// when false (default), use the nearest measured direction.
    pub interpolate: bool,
}

#[derive(Serialize, Deserialize)]
struct HrirIndex {
    sample_rate: f64,
    directions: Vec<HrirDirection>,
}

#[derive(Serialize, Deserialize)]
struct HrirDirection {
    az: i32,
    el: i32,
}

fn hrir_file_name(az: i32, el: i32, channel: char) -> String {
    format!("az{az:+04}_el{el:+04}_{channel}.wav")
}

impl HrirSet {
    /// Load a set from a directory holding `index.json` plus one mono WAV
    /// per direction and channel, named like `az+030_el-015_L.wav`.
    pub fn load(dir: &Path) -> Result<HrirSet> {
        let index_path = dir.join("index.json");
        if !index_path.exists() {
            return Err(Error::NotFound(format!(
                "HRIR index {} does not exist",
                index_path.display()
            )));
        }
        let index: HrirIndex = serde_json::from_str(&std::fs::read_to_string(&index_path)?)?;
        if index.directions.is_empty() {
            return Err(Error::Format("HRIR index lists no directions".into()));
        }
        let mut entries = Vec::with_capacity(index.directions.len());
        for d in &index.directions {
            let mut channels = Vec::with_capacity(2);
            for ch in ['L', 'R'] {
                let path = dir.join(hrir_file_name(d.az, d.el, ch));
                let (samples, fs) = read_wav_mono(&path)?;
                if (fs as f64 - index.sample_rate).abs() > 0.5 {
                    return Err(Error::Format(format!(
                        "{}: sample rate {} disagrees with index rate {}",
                        path.display(),
                        fs,
                        index.sample_rate
                    )));
                }
                channels.push(samples);
            }
            let right = channels.pop().unwrap();
            let left = channels.pop().unwrap();
            if left.len() != right.len() {
                return Err(Error::Format(format!(
                    "HRIR pair at az {} el {} has unequal channel lengths",
                    d.az, d.el
                )));
            }
            entries.push(HrirEntry {
                azimuth_deg: d.az,
                elevation_deg: d.el,
                left,
                right,
            });
        }
        Ok(HrirSet {
            sample_rate: index.sample_rate,
            entries,
            interpolate: false,
        })
    }

    /// Write the set to a directory in the exact format [`load`](Self::load)
    /// reads.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let index = HrirIndex {
            sample_rate: self.sample_rate,
            directions: self
                .entries
                .iter()
                .map(|e| HrirDirection {
                    az: e.azimuth_deg,
                    el: e.elevation_deg,
                })
                .collect(),
        };
        std::fs::write(
            dir.join("index.json"),
            serde_json::to_string_pretty(&index)?,
        )?;
        for e in &self.entries {
            write_wav_mono(
                &dir.join(hrir_file_name(e.azimuth_deg, e.elevation_deg, 'L')),
                &e.left,
                self.sample_rate.round() as u32,
            )?;
            write_wav_mono(
                &dir.join(hrir_file_name(e.azimuth_deg, e.elevation_deg, 'R')),
                &e.right,
                self.sample_rate.round() as u32,
            )?;
        }
        Ok(())
    }

    /// Copy of the set with every response resampled to `sample_rate`.
    /// Renderers call this once up front so per-reflection lookups skip
    /// the resampling cost (a matching rate passes through unchanged).
    pub fn resampled_to(&self, sample_rate: f64) -> HrirSet {
        if (self.sample_rate - sample_rate).abs() < 1e-9 {
            return self.clone();
        }
        HrirSet {
            sample_rate,
            entries: self
                .entries
                .iter()
                .map(|e| HrirEntry {
                    azimuth_deg: e.azimuth_deg,
                    elevation_deg: e.elevation_deg,
                    left: resample(&e.left, self.sample_rate, sample_rate),
                    right: resample(&e.right, self.sample_rate, sample_rate),
                })
                .collect(),
            interpolate: self.interpolate,
        }
    }

    fn angular_distance_sq(&self, e: &HrirEntry, az: f64, el: f64) -> f64 {
        let da = e.azimuth_deg as f64 - az;
        let de = e.elevation_deg as f64 - el;
        da * da + de * de
    }

    /// Index of the nearest direction; ties broken toward the entry with
    /// the smaller (azimuth, elevation) for determinism.
    fn nearest(&self, az: f64, el: f64) -> Result<usize> {
        if self.entries.is_empty() {
            return Err(Error::NotFound("HRIR set has no entries".into()));
        }
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, e) in self.entries.iter().enumerate() {
            let d = self.angular_distance_sq(e, az, el);
            let key = (e.azimuth_deg, e.elevation_deg);
            let best_key = (
                self.entries[best].azimuth_deg,
                self.entries[best].elevation_deg,
            );
            if d < best_d - 1e-12 || ((d - best_d).abs() <= 1e-12 && key < best_key) {
                best = i;
                best_d = d;
            }
        }
        Ok(best)
    }

    /// Left/right FIRs for a direction, resampled to `sample_rate`.
    fn filters_for(&self, az: f64, el: f64, sample_rate: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let (left, right) = if self.interpolate {
            self.bilinear(az, el)?
        } else {
            let e = &self.entries[self.nearest(az, el)?];
            (e.left.clone(), e.right.clone())
        };
        Ok((
            resample(&left, self.sample_rate, sample_rate),
            resample(&right, self.sample_rate, sample_rate),
        ))
    }

    /// Bilinear blend over the surrounding grid cell. Falls back to the
    /// nearest entry when the four corners are not all present (edge of an
    /// irregular set).
    fn bilinear(&self, az: f64, el: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut azs: Vec<i32> = self.entries.iter().map(|e| e.azimuth_deg).collect();
        azs.sort_unstable();
        azs.dedup();
        let mut els: Vec<i32> = self.entries.iter().map(|e| e.elevation_deg).collect();
        els.sort_unstable();
        els.dedup();
        let bracket = |vals: &[i32], x: f64| -> Option<(i32, i32, f64)> {
            if vals.is_empty() {
                return None;
            }
            let lo = vals.iter().rev().find(|&&v| v as f64 <= x);
            let hi = vals.iter().find(|&&v| v as f64 >= x);
            match (lo, hi) {
                (Some(&a), Some(&b)) if a != b => Some((a, b, (x - a as f64) / (b - a) as f64)),
                (Some(&a), Some(_)) => Some((a, a, 0.0)),
                (Some(&a), None) => Some((a, a, 0.0)),
                (None, Some(&b)) => Some((b, b, 0.0)),
                (None, None) => None,
            }
        };
        let (a0, a1, ta) = match bracket(&azs, az) {
            Some(v) => v,
            None => return Err(Error::NotFound("HRIR set has no entries".into())),
        };
        let (e0, e1, te) = match bracket(&els, el) {
            Some(v) => v,
            None => return Err(Error::NotFound("HRIR set has no entries".into())),
        };
        let find = |a: i32, e: i32| {
            self.entries
                .iter()
                .find(|x| x.azimuth_deg == a && x.elevation_deg == e)
        };
        let corners = [find(a0, e0), find(a1, e0), find(a0, e1), find(a1, e1)];
        if corners.iter().any(|c| c.is_none()) {
            let e = &self.entries[self.nearest(az, el)?];
            return Ok((e.left.clone(), e.right.clone()));
        }
        let corners: Vec<&HrirEntry> = corners.into_iter().map(|c| c.unwrap()).collect();
        let len = corners.iter().map(|c| c.left.len()).max().unwrap_or(0);
        let weights = [
            (1.0 - ta) * (1.0 - te),
            ta * (1.0 - te),
            (1.0 - ta) * te,
            ta * te,
        ];
        let mut left = vec![0.0; len];
        let mut right = vec![0.0; len];
        for (c, w) in corners.iter().zip(weights.iter()) {
            for (i, &v) in c.left.iter().enumerate() {
                left[i] += w * v;
            }
            for (i, &v) in c.right.iter().enumerate() {
                right[i] += w * v;
            }
        }
        Ok((left, right))
    }
}
