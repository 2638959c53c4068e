//! Image-source enumeration for shoebox rooms.
//!
//! Every specular reflection path in a rectangular room corresponds to a
//! mirrored copy of the source on a lattice. Along each axis the mirror
//! positions are `(1 − 2q)·s + 2·m·L` for `q ∈ {0, 1}` and integer `m`,
//! where `s` is the source coordinate and `L` the room extent; the number
//! of boundary crossings along that axis is `|2m − q|`, split between the
//! near wall (`|m − q|` hits) and the far wall (`|m|` hits).

use crate::error::Result;
use crate::math::Vec3;
use crate::room::{RoomSpec, SourceSpec, SurfaceId, N_BANDS};

/// One mirrored source: where it sits, how many bounces produced it, and
/// the per-band amplitude gain accumulated over those bounces.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSource {
    /// Image position in room coordinates (generally outside the room).
    pub position: Vec3,
    /// Total reflection count (0 = the direct source).
    pub order: u32,
    /// Bounce count per surface, indexed by [`SurfaceId`].
    pub bounces: [u16; 6],
    /// Amplitude factor per anchor band: Π over bounces of √(1 − α(f)).
    pub band_gains: [f64; N_BANDS],
}

impl ImageSource {
    /// The surfaces hit along the path, as a canonical (per-surface-sorted)
    /// sequence whose length equals `order`.
    pub fn reflection_sequence(&self) -> Vec<SurfaceId> {
        let mut seq = Vec::with_capacity(self.order as usize);
        for id in SurfaceId::ALL {
            for _ in 0..self.bounces[id.index()] {
                seq.push(id);
            }
        }
        seq
    }
}

/// Per-axis mirror decomposition: positions and wall-hit counts for all
/// lattice indices with axis order ≤ `max_axis_order` and position within
/// `[center − reach, center + reach]`.
struct AxisImages {
    /// (coordinate, axis order, near-wall hits, far-wall hits)
    entries: Vec<(f64, u32, u16, u16)>,
}

fn axis_images(
    source_coord: f64,
    room_len: f64,
    max_axis_order: u32,
    center: f64,
    reach: f64,
) -> AxisImages {
    let mut entries = Vec::new();
    let o = max_axis_order as i64;
    for q in 0..=1i64 {
        // |2m − q| ≤ o  ⇒  m ∈ [(q − o + 1) / 2, (q + o) / 2] (integer div
        // toward −∞ / +∞ respectively handled via floats then rounded).
        let lo = ((q - o) as f64 / 2.0).ceil() as i64;
        let hi = ((q + o) as f64 / 2.0).floor() as i64;
        for m in lo..=hi {
            let coord = (1 - 2 * q) as f64 * source_coord + 2.0 * m as f64 * room_len;
            if (coord - center).abs() > reach {
                continue;
            }
            let order = (2 * m - q).unsigned_abs() as u32;
            let near = (m - q).unsigned_abs() as u16;
            let far = m.unsigned_abs() as u16;
            entries.push((coord, order, near, far));
        }
    }
    AxisImages { entries }
}

/// Enumerate all image sources of order ≤ `max_order`, including the
/// order-0 direct source.
pub fn enumerate_image_sources(
    room: &RoomSpec,
    source: &SourceSpec,
    max_order: u32,
) -> Result<Vec<ImageSource>> {
    let pos = source.validate_in(room)?;
    room.validate()?;
    Ok(enumerate_from_position(room, pos, max_order, f64::INFINITY))
}

/// Enumeration core used by both the public API and the renderer. Images
/// farther than `max_distance` from the room's receiver are skipped (pass
/// infinity to keep everything).
pub(crate) fn enumerate_from_position(
    room: &RoomSpec,
    source_pos: Vec3,
    max_order: u32,
    max_distance: f64,
) -> Vec<ImageSource> {
    let rp: Vec3 = room.receiver_position.into();
    let reach = max_distance;
    let xs = axis_images(source_pos.x, room.width, max_order, rp.x, reach);
    let ys = axis_images(source_pos.y, room.depth, max_order, rp.y, reach);
    let zs = axis_images(source_pos.z, room.height, max_order, rp.z, reach);

    // Per-band per-surface amplitude factor for one bounce.
    let mut refl = [[0.0f64; N_BANDS]; 6];
    for (s, surf) in room.surfaces.iter().enumerate() {
        for b in 0..N_BANDS {
            refl[s][b] = (1.0 - surf.absorption[b]).max(0.0).sqrt();
        }
    }

    let max_dist_sq = if max_distance.is_finite() {
        max_distance * max_distance
    } else {
        f64::INFINITY
    };
    let mut out = Vec::new();
    for &(x, ox, nx0, nx1) in &xs.entries {
        if ox > max_order {
            continue;
        }
        for &(y, oy, ny0, ny1) in &ys.entries {
            if ox + oy > max_order {
                continue;
            }
            let dxy = (x - rp.x) * (x - rp.x) + (y - rp.y) * (y - rp.y);
            if dxy > max_dist_sq {
                continue;
            }
            for &(z, oz, nf, nc) in &zs.entries {
                let order = ox + oy + oz;
                if order > max_order {
                    continue;
                }
                let d_sq = dxy + (z - rp.z) * (z - rp.z);
                if d_sq > max_dist_sq {
                    continue;
                }
                let bounces = [nx0, nx1, ny0, ny1, nf, nc];
                let mut band_gains = [1.0f64; N_BANDS];
                for (s, &n) in bounces.iter().enumerate() {
                    if n > 0 {
                        let r = refl[s];
                        for b in 0..N_BANDS {
                            band_gains[b] *= r[b].powi(n as i32);
                        }
                    }
                }
                out.push(ImageSource {
                    position: Vec3::new(x, y, z),
                    order,
                    bounces,
                    band_gains,
                });
            }
        }
    }
    out
}

/// Smallest reflection order whose strongest image is guaranteed ≥ 60 dB
/// below the direct path, capped by the order needed to cover `duration`
/// seconds of propagation. Used when no explicit order is configured.
pub fn adaptive_max_order(room: &RoomSpec, source_pos: Vec3, duration: f64) -> u32 {
    let rp: Vec3 = room.receiver_position.into();
    let d_direct = source_pos.distance(rp).max(1e-3);
    let min_dim = room.width.min(room.depth).min(room.height);
    // Orders beyond the simulated time window cannot contribute.
    let order_by_time = (room.speed_of_sound * duration / min_dim).ceil() as u32 + 2;
    // Strongest per-bounce amplitude survival across surfaces and bands.
    let mut rho_max: f64 = 0.0;
    for surf in &room.surfaces {
        for b in 0..N_BANDS {
            rho_max = rho_max.max((1.0 - surf.absorption[b]).max(0.0).sqrt());
        }
    }
    let threshold = 1e-3; // −60 dB in amplitude
    for order in 1..order_by_time {
        // Bound on the strongest order-`order` image amplitude relative to
        // the direct path: per-bounce survival^order times the distance
        // ratio (an order-o image lies at least ~o·min_dim/2 away).
        let d_min = d_direct.max(order as f64 * min_dim / 2.0);
        let bound = rho_max.powi(order as i32) * d_direct / d_min;
        if bound < threshold {
            return order;
        }
    }
    order_by_time
}
