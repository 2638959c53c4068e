//! Stochastic diffuse-energy simulation ("rain diffusion"): rays leave the
//! source uniformly over the sphere, bounce specularly around the shoebox,
//! and at every wall impact a diffusion-weighted share of their energy is
//! sent toward the receiver and logged in a time × band energy histogram.

use crate::error::Result;
use crate::math::{unit_sphere_direction, Vec3};
use crate::room::{RoomSpec, SourceSpec, N_BANDS};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Time × frequency-band energy histogram produced by the ray pass.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyHistogram {
    /// Width of one time bin in seconds.
    pub bin_width_s: f64,
    /// Energy per time bin and anchor band; `bins[t][b] ≥ 0`.
    pub bins: Vec<[f64; N_BANDS]>,
}

impl EnergyHistogram {
    pub fn zeros(n_bins: usize, bin_width_s: f64) -> Self {
        EnergyHistogram {
            bin_width_s,
            bins: vec![[0.0; N_BANDS]; n_bins],
        }
    }

    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }

    /// Total deposited energy over all bins and bands.
    pub fn total_energy(&self) -> f64 {
        self.bins.iter().map(|b| b.iter().sum::<f64>()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.bins.iter().all(|b| b.iter().all(|&v| v == 0.0))
    }
}

/// Default ray count for diffuse simulation.
pub const DEFAULT_N_RAYS: usize = 10_000;
/// Default histogram bin width in seconds.
pub const DEFAULT_BIN_WIDTH_S: f64 = 0.001;
/// A ray is dropped once every band has fallen below this fraction of its
/// launch energy.
pub const RAY_ENERGY_FLOOR: f64 = 1e-6;

/// Trace `n_rays` diffuse-energy rays and accumulate receiver deposits.
///
/// Energy bookkeeping per bounce, per band: the *incoming* energy E is
/// first tapped for the receiver deposit E·d(f)·g (g ≤ 1 accounts for the
/// remaining propagation to the receiver), then the continuing specular ray
/// keeps E·(1 − α(f))·(1 − d(f)) — absorption removes its share and the
/// diffusely sent fraction never continues. Total deposits therefore never
/// exceed the emitted energy, for any scene.
///
/// Deterministic: the same (scene, parameters, seed) always produces the
/// same histogram; rays are traced sequentially from one seeded stream.
pub fn rain_diffusion(
    room: &RoomSpec,
    source: &SourceSpec,
    receiver: Vec3,
    n_rays: usize,
    max_time: f64,
    seed: u64,
) -> Result<EnergyHistogram> {
    rain_diffusion_binned(
        room,
        source,
        receiver,
        n_rays,
        max_time,
        DEFAULT_BIN_WIDTH_S,
        seed,
    )
}

/// [`rain_diffusion`] with an explicit histogram bin width.
pub fn rain_diffusion_binned(
    room: &RoomSpec,
    source: &SourceSpec,
    receiver: Vec3,
    n_rays: usize,
    max_time: f64,
    bin_width_s: f64,
    seed: u64,
) -> Result<EnergyHistogram> {
    assert!(n_rays >= 1, "need at least one ray");
    assert!(
        max_time > 0.0 && bin_width_s > 0.0,
        "times must be positive"
    );
    room.validate()?;
    let src = source.validate_in(room)?;

    let n_bins = (max_time / bin_width_s).ceil() as usize;
    let mut hist = EnergyHistogram::zeros(n_bins, bin_width_s);
    let c = room.speed_of_sound;

    // Per-surface per-band coefficients, gathered once.
    let mut absorb = [[0.0f64; N_BANDS]; 6];
    let mut diffuse = [[0.0f64; N_BANDS]; 6];
    for s in 0..6 {
        absorb[s] = room.surfaces[s].absorption;
        diffuse[s] = room.surfaces[s].diffusion;
    }
    let any_diffusion = diffuse.iter().any(|d| d.iter().any(|&v| v > 0.0));
    if !any_diffusion {
        return Ok(hist); // nothing can ever be deposited
    }

    let launch_energy = 1.0 / n_rays as f64;
    let floor = RAY_ENERGY_FLOOR * launch_energy;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    // Generous cap on bounces per ray; the energy floor or the time limit
    // fires long before this in any physical scene.
    let max_bounces = 1_000_000usize;

    for _ in 0..n_rays {
        let mut dir = unit_sphere_direction(&mut rng);
        let mut pos = src;
        let mut t = 0.0f64;
        let mut energy = [launch_energy; N_BANDS];

        for _ in 0..max_bounces {
            // Nearest surface along `dir`.
            let mut best_dist = f64::INFINITY;
            let mut best_surface = 0usize;
            let candidates = [
                (0, -pos.x / dir.x),                // x = 0
                (1, (room.width - pos.x) / dir.x),  // x = width
                (2, -pos.y / dir.y),                // y = 0
                (3, (room.depth - pos.y) / dir.y),  // y = depth
                (4, -pos.z / dir.z),                // z = 0
                (5, (room.height - pos.z) / dir.z), // z = height
            ];
            for (sid, d) in candidates {
                if d > 1e-9 && d < best_dist {
                    best_dist = d;
                    best_surface = sid;
                }
            }
            if !best_dist.is_finite() {
                break; // degenerate direction; drop the ray
            }
            let hit = pos + dir.scale(best_dist);
            t += best_dist / c;
            if t > max_time {
                break;
            }

            // Deposit the diffusion-weighted share toward the receiver.
            let r = hit.distance(receiver);
            let g = if r > 1.0 { 1.0 / (r * r) } else { 1.0 };
            let arrival = t + r / c;
            if arrival <= max_time {
                let bin = ((arrival / bin_width_s) as usize).min(n_bins - 1);
                let d = &diffuse[best_surface];
                let slot = &mut hist.bins[bin];
                for b in 0..N_BANDS {
                    slot[b] += energy[b] * d[b] * g;
                }
            }

            // Absorb, strip the diffused share, reflect.
            let a = &absorb[best_surface];
            let d = &diffuse[best_surface];
            let mut peak = 0.0f64;
            for b in 0..N_BANDS {
                energy[b] *= (1.0 - a[b]) * (1.0 - d[b]);
                peak = peak.max(energy[b]);
            }
            if peak < floor {
                break;
            }
            pos = hit;
            match best_surface {
                0 | 1 => dir.x = -dir.x,
                2 | 3 => dir.y = -dir.y,
                _ => dir.z = -dir.z,
            }
        }
    }
    Ok(hist)
}
