//! Rough per-stage timings for one desk-scale scene render; used to budget
//! the slow integration tests.

use earshot::features::{scene_to_feature_with, FeatureConfig};
use earshot::head::HeadModel;
use earshot::math::{derive_seed, Vec3};
use earshot::rain::{rain_diffusion_binned, DEFAULT_BIN_WIDTH_S};
use earshot::render::{simulate_brir, synthesize_diffuse_tail, SimConfig};
use earshot::room::{RoomSpec, SourceSpec, N_BANDS};
use std::time::Instant;

fn main() {
    let head = HeadModel::default_sphere();
    let config = SimConfig {
        duration: Some(0.25),
        n_rays: 2000,
        diffusion: false,
        ..SimConfig::default()
    };
    let fc = FeatureConfig::default();

    for alpha in [0.0, 0.5, 1.0] {
        let room = RoomSpec::reference_room([alpha; N_BANDS]);
        let source = SourceSpec {
            azimuth: 30.0,
            elevation: 10.0,
            range: 1.6,
        };

        let t = Instant::now();
        let spec = simulate_brir(&room, &source, &head, &config, 1).unwrap();
        let t_spec = t.elapsed();

        let rp: Vec3 = room.receiver_position.into();
        let t = Instant::now();
        let hist = rain_diffusion_binned(
            &room,
            &source,
            rp,
            2000,
            0.25,
            DEFAULT_BIN_WIDTH_S,
            derive_seed(1, &[0x5261]),
        )
        .unwrap();
        let t_rain = t.elapsed();

        let t = Instant::now();
        let (tl, _tr) = synthesize_diffuse_tail(&hist, 16_000.0, derive_seed(1, &[0x5454]));
        let t_tail = t.elapsed();

        let t = Instant::now();
        let feat = scene_to_feature_with(&spec, &fc, derive_seed(1, &[0x4e4f])).unwrap();
        let t_feat = t.elapsed();

        println!(
            "alpha {alpha}: specular {:?}, rain {:?}, tail {:?} (len {}), features {:?} (dim {})",
            t_spec,
            t_rain,
            t_tail,
            tl.len(),
            t_feat,
            feat.dim()
        );
    }
}
