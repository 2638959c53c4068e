//! Shoebox room geometry: dimensions, receiver pose, per-surface
//! frequency-dependent absorption/diffusion profiles, and the conversion
//! from receiver-relative source coordinates to room coordinates.

use crate::error::{Error, Result};
use crate::math::{deg_to_rad, lerp_table, Vec3};
use serde::{Deserialize, Serialize};

/// Anchor frequencies (Hz) at which surface profiles are tabulated.
/// Values between anchors are linearly interpolated; values outside the
/// anchor range are clamped to the end anchors.
pub const ANCHOR_HZ: [f64; 6] = [125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0];

/// Number of anchor frequencies / energy bands used throughout.
pub const N_BANDS: usize = 6;

/// The six surfaces of a shoebox room, in canonical index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(usize)]
pub enum SurfaceId {
    /// Wall at x = 0.
    WallX0 = 0,
    /// Wall at x = width.
    WallX1 = 1,
    /// Wall at y = 0.
    WallY0 = 2,
    /// Wall at y = depth.
    WallY1 = 3,
    /// Floor (z = 0).
    Floor = 4,
    /// Ceiling (z = height).
    Ceiling = 5,
}

impl SurfaceId {
    pub const ALL: [SurfaceId; 6] = [
        SurfaceId::WallX0,
        SurfaceId::WallX1,
        SurfaceId::WallY0,
        SurfaceId::WallY1,
        SurfaceId::Floor,
        SurfaceId::Ceiling,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Frequency-dependent absorption and diffusion for one surface, tabulated
/// at [`ANCHOR_HZ`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceProfile {
    /// Fraction of incident energy absorbed per reflection, per anchor band.
    pub absorption: [f64; N_BANDS],
    /// Fraction of reflected energy scattered toward the receiver per
    /// bounce, per anchor band.
    pub diffusion: [f64; N_BANDS],
}

impl SurfaceProfile {
    /// Profile with the same absorption at every anchor and zero diffusion.
    pub fn flat(absorption: f64) -> Self {
        SurfaceProfile {
            absorption: [absorption; N_BANDS],
            diffusion: [0.0; N_BANDS],
        }
    }

    pub fn with_diffusion(mut self, diffusion: [f64; N_BANDS]) -> Self {
        self.diffusion = diffusion;
        self
    }

    /// Absorption at an arbitrary frequency (linear interpolation between
    /// anchors, clamped outside).
    pub fn absorption_at(&self, hz: f64) -> f64 {
        lerp_table(&ANCHOR_HZ, &self.absorption, hz)
    }

    /// Diffusion at an arbitrary frequency.
    pub fn diffusion_at(&self, hz: f64) -> f64 {
        lerp_table(&ANCHOR_HZ, &self.diffusion, hz)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, vals) in [
            ("absorption", &self.absorption),
            ("diffusion", &self.diffusion),
        ] {
            for (i, &v) in vals.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                    return Err(Error::InvalidScene(format!(
                        "surface {name} at anchor {} Hz is {v}, outside [0, 1]",
                        ANCHOR_HZ[i]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Diffusion coefficients per anchor band for a painted plaster surface,
/// used as the default on every surface of the reference room.
pub const DEFAULT_DIFFUSION: [f64; N_BANDS] = [0.003, 0.004, 0.045, 0.077, 0.210, 0.431];

/// Absorption per anchor band for a gypsum-board ceiling.
pub const GYPSUM_BOARD_ABSORPTION: [f64; N_BANDS] = [0.45, 0.55, 0.60, 0.90, 0.86, 0.75];

/// Absorption per anchor band for a thin carpet floor.
pub const THIN_CARPET_ABSORPTION: [f64; N_BANDS] = [0.02, 0.04, 0.08, 0.20, 0.35, 0.40];

/// Shoebox room: axis-aligned box with corner at the origin,
/// x ∈ [0, width], y ∈ [0, depth], z ∈ [0, height].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
    /// Receiver (head center) position in room coordinates, meters.
    pub receiver_position: Vec3Ser,
    /// Receiver yaw in degrees. 0 faces +x; positive turns toward +y
    /// (counterclockwise seen from above).
    pub receiver_yaw: f64,
    /// Surface profiles indexed by [`SurfaceId`].
    pub surfaces: [SurfaceProfile; 6],
    /// Speed of sound in m/s.
    pub speed_of_sound: f64,
}

/// Serializable 3-vector mirror of [`Vec3`] (kept separate so geometry code
/// stays dependency-free).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3Ser {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<Vec3> for Vec3Ser {
    fn from(v: Vec3) -> Self {
        Vec3Ser {
            x: v.x,
            y: v.y,
            z: v.z,
        }
    }
}

impl From<Vec3Ser> for Vec3 {
    fn from(v: Vec3Ser) -> Self {
        Vec3::new(v.x, v.y, v.z)
    }
}

impl RoomSpec {
    /// The reference test room used by the experiment presets:
    /// 6 m × 5 m × 3.3 m, receiver at (2, 2.5, 1.6) facing +x,
    /// gypsum-board ceiling, thin-carpet floor, plaster diffusion on every
    /// surface, and the given flat-or-profiled absorption on all four walls.
    pub fn reference_room(wall_absorption: [f64; N_BANDS]) -> RoomSpec {
        let wall = SurfaceProfile {
            absorption: wall_absorption,
            diffusion: DEFAULT_DIFFUSION,
        };
        let floor = SurfaceProfile {
            absorption: THIN_CARPET_ABSORPTION,
            diffusion: DEFAULT_DIFFUSION,
        };
        let ceiling = SurfaceProfile {
            absorption: GYPSUM_BOARD_ABSORPTION,
            diffusion: DEFAULT_DIFFUSION,
        };
        RoomSpec {
            width: 6.0,
            depth: 5.0,
            height: 3.3,
            receiver_position: Vec3::new(2.0, 2.5, 1.6).into(),
            receiver_yaw: 0.0,
            surfaces: [
                wall.clone(),
                wall.clone(),
                wall.clone(),
                wall,
                floor,
                ceiling,
            ],
            speed_of_sound: 343.0,
        }
    }

    pub fn volume(&self) -> f64 {
        self.width * self.depth * self.height
    }

    /// Surface area of one surface, m².
    pub fn surface_area(&self, id: SurfaceId) -> f64 {
        match id {
            SurfaceId::WallX0 | SurfaceId::WallX1 => self.depth * self.height,
            SurfaceId::WallY0 | SurfaceId::WallY1 => self.width * self.height,
            SurfaceId::Floor | SurfaceId::Ceiling => self.width * self.depth,
        }
    }

    /// Mean absorption of the four walls over all anchor bands — the
    /// scalar absorption label attached to generated datasets.
    pub fn mean_wall_absorption(&self) -> f64 {
        let walls = [
            SurfaceId::WallX0,
            SurfaceId::WallX1,
            SurfaceId::WallY0,
            SurfaceId::WallY1,
        ];
        let sum: f64 = walls
            .iter()
            .map(|&w| self.surfaces[w.index()].absorption.iter().sum::<f64>())
            .sum();
        sum / (walls.len() * N_BANDS) as f64
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x > 0.0
            && p.x < self.width
            && p.y > 0.0
            && p.y < self.depth
            && p.z > 0.0
            && p.z < self.height
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.depth > 0.0 && self.height > 0.0) {
            return Err(Error::InvalidScene(format!(
                "room dimensions must be positive, got {} x {} x {}",
                self.width, self.depth, self.height
            )));
        }
        if !(self.speed_of_sound > 0.0) {
            return Err(Error::InvalidScene(format!(
                "speed of sound must be positive, got {}",
                self.speed_of_sound
            )));
        }
        let rp: Vec3 = self.receiver_position.into();
        if !rp.is_finite() || !self.contains(rp) {
            return Err(Error::InvalidScene(format!(
                "receiver ({}, {}, {}) must lie strictly inside the {} x {} x {} room",
                rp.x, rp.y, rp.z, self.width, self.depth, self.height
            )));
        }
        for (i, s) in self.surfaces.iter().enumerate() {
            s.validate().map_err(|e| {
                Error::InvalidScene(format!("surface {:?}: {e}", SurfaceId::ALL[i]))
            })?;
        }
        Ok(())
    }

    /// Unit vector the receiver is facing.
    pub fn receiver_front(&self) -> Vec3 {
        let yaw = deg_to_rad(self.receiver_yaw);
        Vec3::new(yaw.cos(), yaw.sin(), 0.0)
    }

    /// Convert a receiver-relative direction (azimuth/elevation in degrees,
    /// 0° azimuth = straight ahead, positive azimuth to the receiver's
    /// left, positive elevation up) and range in meters to an absolute
    /// room-coordinate position.
    pub fn source_position(&self, source: &SourceSpec) -> Vec3 {
        let az = deg_to_rad(source.azimuth);
        let el = deg_to_rad(source.elevation);
        let yaw = deg_to_rad(self.receiver_yaw);
        // Direction in the receiver frame: x forward, y left, z up.
        let fx = el.cos() * az.cos();
        let fy = el.cos() * az.sin();
        let fz = el.sin();
        // Rotate by yaw about z into room coordinates.
        let dx = fx * yaw.cos() - fy * yaw.sin();
        let dy = fx * yaw.sin() + fy * yaw.cos();
        let rp: Vec3 = self.receiver_position.into();
        rp + Vec3::new(dx, dy, fz).scale(source.range)
    }

    /// Express an absolute position as (azimuth, elevation) degrees in the
    /// receiver frame. Inverse of the directional part of
    /// [`source_position`](Self::source_position).
    pub fn direction_of(&self, p: Vec3) -> (f64, f64) {
        let rp: Vec3 = self.receiver_position.into();
        let d = (p - rp).normalized();
        let yaw = deg_to_rad(self.receiver_yaw);
        // Rotate back into the receiver frame.
        let fx = d.x * yaw.cos() + d.y * yaw.sin();
        let fy = -d.x * yaw.sin() + d.y * yaw.cos();
        let fz = d.z;
        let az = fy.atan2(fx);
        let el = fz.clamp(-1.0, 1.0).asin();
        (crate::math::rad_to_deg(az), crate::math::rad_to_deg(el))
    }
}

/// Source position in receiver-relative spherical coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    /// Degrees; 0 = straight ahead, positive = to the receiver's left.
    pub azimuth: f64,
    /// Degrees; positive = up.
    pub elevation: f64,
    /// Meters from the receiver.
    pub range: f64,
}

impl SourceSpec {
    pub fn new(azimuth: f64, elevation: f64, range: f64) -> Self {
        SourceSpec {
            azimuth,
            elevation,
            range,
        }
    }

    /// Check that the source maps to a point strictly inside the room.
    pub fn validate_in(&self, room: &RoomSpec) -> Result<Vec3> {
        if !(self.range > 0.0) || !self.range.is_finite() {
            return Err(Error::InvalidScene(format!(
                "source range must be positive, got {}",
                self.range
            )));
        }
        let p = room.source_position(self);
        if !room.contains(p) {
            return Err(Error::InvalidScene(format!(
                "source at azimuth {}°, elevation {}°, range {} m maps to ({:.3}, {:.3}, {:.3}), outside the {} x {} x {} room",
                self.azimuth, self.elevation, self.range, p.x, p.y, p.z, room.width, room.depth, room.height
            )));
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reference_room_matches_published_layout() {
        let room = RoomSpec::reference_room([0.5; N_BANDS]);
        assert_eq!((room.width, room.depth, room.height), (6.0, 5.0, 3.3));
        let rp: Vec3 = room.receiver_position.into();
        assert_eq!((rp.x, rp.y, rp.z), (2.0, 2.5, 1.6));
        assert_eq!(room.speed_of_sound, 343.0);
        assert_abs_diff_eq!(room.volume(), 99.0, epsilon = 1e-12);
        room.validate().expect("reference room must validate");
    }

    #[test]
    fn source_position_follows_receiver_frame_conventions() {
        let room = RoomSpec::reference_room([0.5; N_BANDS]);
        // Straight ahead: +x from the receiver.
        let p = room.source_position(&SourceSpec::new(0.0, 0.0, 1.0));
        assert_abs_diff_eq!(p.x, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.z, 1.6, epsilon = 1e-12);
        // Positive azimuth goes to the receiver's left (+y when facing +x).
        let p = room.source_position(&SourceSpec::new(90.0, 0.0, 1.0));
        assert_abs_diff_eq!(p.x, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 3.5, epsilon = 1e-12);
        // Positive elevation goes up.
        let p = room.source_position(&SourceSpec::new(0.0, 90.0, 1.0));
        assert_abs_diff_eq!(p.z, 2.6, epsilon = 1e-12);
    }

    #[test]
    fn direction_of_inverts_source_position() {
        let mut room = RoomSpec::reference_room([0.3; N_BANDS]);
        room.receiver_yaw = 37.0;
        for &(az, el) in &[(0.0, 0.0), (45.0, -30.0), (-43.5, 28.5), (12.0, 7.0)] {
            let p = room.source_position(&SourceSpec::new(az, el, 1.3));
            let (az2, el2) = room.direction_of(p);
            assert_abs_diff_eq!(az, az2, epsilon = 1e-9);
            assert_abs_diff_eq!(el, el2, epsilon = 1e-9);
        }
    }

    #[test]
    fn profile_interpolation_is_linear_and_clamped() {
        let mut p = SurfaceProfile::flat(0.0);
        p.absorption = [0.1, 0.2, 0.4, 0.6, 0.8, 1.0];
        assert_abs_diff_eq!(p.absorption_at(125.0), 0.1);
        assert_abs_diff_eq!(p.absorption_at(187.5), 0.15, epsilon = 1e-12);
        assert_abs_diff_eq!(p.absorption_at(3000.0), 0.9, epsilon = 1e-12);
        assert_eq!(p.absorption_at(50.0), 0.1, "clamped below the first anchor");
        assert_eq!(
            p.absorption_at(20_000.0),
            1.0,
            "clamped above the last anchor"
        );
    }

    #[test]
    fn validation_rejects_bad_scenes() {
        let mut room = RoomSpec::reference_room([0.5; N_BANDS]);
        room.receiver_position = Vec3::new(7.0, 2.5, 1.6).into();
        assert!(
            room.validate().is_err(),
            "receiver outside the room must fail"
        );

        let mut room = RoomSpec::reference_room([0.5; N_BANDS]);
        room.surfaces[0].absorption[2] = 1.5;
        assert!(room.validate().is_err(), "absorption above 1 must fail");

        let room = RoomSpec::reference_room([0.5; N_BANDS]);
        let err = SourceSpec::new(0.0, 0.0, 10.0)
            .validate_in(&room)
            .unwrap_err();
        let msg = format!("{err}");
        assert!(
            msg.contains("outside"),
            "error should name the problem: {msg}"
        );
    }
}
