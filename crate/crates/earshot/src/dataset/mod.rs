//! Scene enumeration and dataset generation: direction grids, wall-material
//! assignment, per-row seeding, and the parallel simulate→featurize pipeline
//! that turns scene lists into annotated feature datasets.

pub mod container;
pub mod materials;

pub use container::{load_dataset, save_dataset, DatasetManifest, StoredDataset};
pub use materials::{
    default_materials, load_materials, lookup_material, spread_selection, MaterialProfile,
};

use crate::error::{Error, Result};
use crate::features::{scene_to_feature_with, FeatureConfig};
use crate::gllim::TrainingSet;
use crate::head::HeadModel;
use crate::math::{derive_seed, fnv1a64};
use crate::render::{add_diffuse_tail, auto_duration, simulate_brir, BinauralRir, SimConfig};
use crate::room::{RoomSpec, SourceSpec, N_BANDS};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Seed-derivation tag for the feature-extraction probe noise, so the probe
/// stream never collides with the render's rain/tail streams.
const FEATURE_NOISE_TAG: u64 = 0x4e4f;

/// Names of the four annotation slots, in storage order.
pub const PARAM_NAMES: [&str; 4] = [
    "azimuth_deg",
    "elevation_deg",
    "range_m",
    "mean_wall_absorption",
];

/// Whether a grid carries training positions (integer-degree lattice) or
/// held-out test positions (half-step-offset lattice).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridRole {
    Train,
    Test,
}

/// A rectangular direction lattice: every (azimuth, elevation) pair from the
/// two axis vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionGrid {
    pub azimuths: Vec<f64>,
    pub elevations: Vec<f64>,
    pub role: GridRole,
}

impl DirectionGrid {
    /// All (azimuth, elevation) pairs, azimuth-major.
    pub fn directions(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.len());
        for &az in &self.azimuths {
            for &el in &self.elevations {
                out.push((az, el));
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.azimuths.len() * self.elevations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Builds the standard direction lattice for a role.
///
/// Training: 3° spacing on [−45, 45] × [−30, 30] (31 × 21 = 651 directions).
/// Test: 6° spacing offset by 1.5° from the training lattice, spanning
/// [−43.5, 40.5] × [−28.5, 25.5] (15 × 10 = 150 directions), so no test
/// direction coincides with a training direction.
pub fn build_grid(role: GridRole) -> DirectionGrid {
    let (azimuths, elevations) = match role {
        GridRole::Train => (
            (0..31).map(|i| -45.0 + 3.0 * i as f64).collect(),
            (0..21).map(|i| -30.0 + 3.0 * i as f64).collect(),
        ),
        GridRole::Test => (
            (0..15).map(|i| -43.5 + 6.0 * i as f64).collect(),
            (0..10).map(|i| -28.5 + 6.0 * i as f64).collect(),
        ),
    };
    DirectionGrid {
        azimuths,
        elevations,
        role,
    }
}

/// The 21 flat training absorptions 0.00, 0.05, …, 1.00.
pub fn training_absorptions() -> Vec<f64> {
    (0..=20).map(|i| i as f64 * 0.05).collect()
}

/// The annotation attached to one dataset row: where the source was and how
/// absorbent the walls were.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub range_m: f64,
    /// Scalar wall-absorption summary: the mean over the anchor bands at and
    /// above 500 Hz.
    pub mean_wall_absorption: f64,
}

impl SceneParams {
    /// The annotation as a fixed-order vector matching [`PARAM_NAMES`].
    pub fn as_vector(&self) -> [f64; 4] {
        [
            self.azimuth_deg,
            self.elevation_deg,
            self.range_m,
            self.mean_wall_absorption,
        ]
    }
}

/// A fully specified scene: annotation plus the concrete wall profile that
/// realizes it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub params: SceneParams,
    /// Absorption applied to all four walls (floor and ceiling keep the
    /// reference-room profiles).
    pub wall_absorption: [f64; N_BANDS],
    /// Human-readable wall-material label.
    pub material: String,
}

impl Scene {
    /// Scene with the same absorption at every anchor band.
    pub fn flat(azimuth_deg: f64, elevation_deg: f64, range_m: f64, absorption: f64) -> Scene {
        Scene {
            params: SceneParams {
                azimuth_deg,
                elevation_deg,
                range_m,
                mean_wall_absorption: absorption,
            },
            wall_absorption: [absorption; N_BANDS],
            material: format!("flat {absorption:.2}"),
        }
    }

    /// Scene whose walls carry a named material profile; the absorption
    /// annotation is the profile's scalar summary.
    pub fn from_material(
        azimuth_deg: f64,
        elevation_deg: f64,
        range_m: f64,
        profile: &MaterialProfile,
    ) -> Scene {
        Scene {
            params: SceneParams {
                azimuth_deg,
                elevation_deg,
                range_m,
                mean_wall_absorption: profile.mean_absorption_above_500(),
            },
            wall_absorption: profile.absorption,
            material: profile.name.clone(),
        }
    }
}

/// Simulation and feature-extraction settings shared by every row of a
/// generated dataset.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub sim: SimConfig,
    pub feature: FeatureConfig,
}

/// Deterministic per-row seed: mixes the master seed with the row index and
/// a hash of the scene's numeric content, so a row can be regenerated from
/// its provenance record alone.
pub fn scene_seed(master_seed: u64, index: usize, scene: &Scene) -> u64 {
    let mut bytes = Vec::with_capacity(8 * (4 + N_BANDS));
    for v in scene.params.as_vector() {
        bytes.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    for v in scene.wall_absorption {
        bytes.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    derive_seed(master_seed, &[index as u64, fnv1a64(&bytes)])
}

/// Renders one scene and extracts its feature vector — the single code path
/// used both for bulk generation and for regenerating a stored row from its
/// provenance record.
pub fn regenerate_row(scene: &Scene, seed: u64, config: &GenConfig) -> Result<Vec<f64>> {
    let room = RoomSpec::reference_room(scene.wall_absorption);
    let head = HeadModel::default_sphere();
    let source = SourceSpec::new(
        scene.params.azimuth_deg,
        scene.params.elevation_deg,
        scene.params.range_m,
    );
    let rir = simulate_brir(&room, &source, &head, &config.sim, seed)?;
    let feat = scene_to_feature_with(
        &rir,
        &config.feature,
        derive_seed(seed, &[FEATURE_NOISE_TAG]),
    )?;
    for &v in &feat.values {
        if !v.is_finite() {
            return Err(Error::NonFinite(
                "feature vector contains a non-finite value".into(),
            ));
        }
    }
    Ok(feat.values)
}

fn scene_source(scene: &Scene) -> SourceSpec {
    SourceSpec::new(
        scene.params.azimuth_deg,
        scene.params.elevation_deg,
        scene.params.range_m,
    )
}

/// Renders the seed-independent part of a scene's response: the specular
/// reflections only, with the diffuse pass disabled regardless of what the
/// configuration asks for. Repeated-seed studies can compute this once per
/// scene and turn it into any seed's row with [`finish_row`].
pub fn render_specular(scene: &Scene, config: &GenConfig) -> Result<BinauralRir> {
    let room = RoomSpec::reference_room(scene.wall_absorption);
    let head = HeadModel::default_sphere();
    let sim = SimConfig {
        diffusion: false,
        ..config.sim.clone()
    };
    simulate_brir(&room, &scene_source(scene), &head, &sim, 0)
}

/// Completes one dataset row from a cached specular render: mixes in the
/// seeded diffuse tail when the configuration enables diffusion, then runs
/// feature extraction on the row's own probe-noise stream. Bit-identical to
/// [`regenerate_row`] with the same scene, configuration, and seed.
pub fn finish_row(
    scene: &Scene,
    specular: &BinauralRir,
    seed: u64,
    config: &GenConfig,
) -> Result<Vec<f64>> {
    let mut rir = specular.clone();
    if config.sim.diffusion {
        let room = RoomSpec::reference_room(scene.wall_absorption);
        let duration = match config.sim.duration {
            Some(d) => d,
            None => auto_duration(&room),
        };
        add_diffuse_tail(
            &mut rir,
            &room,
            &scene_source(scene),
            duration,
            config.sim.n_rays,
            seed,
        )?;
    }
    let feat = scene_to_feature_with(
        &rir,
        &config.feature,
        derive_seed(seed, &[FEATURE_NOISE_TAG]),
    )?;
    for &v in &feat.values {
        if !v.is_finite() {
            return Err(Error::NonFinite(
                "feature vector contains a non-finite value".into(),
            ));
        }
    }
    Ok(feat.values)
}

/// Provenance for one dataset row: everything needed to regenerate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    /// Index of the scene in the original scene list.
    pub index: usize,
    /// Per-row seed used for simulation and probe noise.
    pub seed: u64,
    pub scene: Scene,
}

/// A generated dataset: feature matrix, annotation matrix, and per-row
/// provenance, all in corresponding order.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedDataset {
    /// Number of rows.
    pub n: usize,
    /// Feature dimension.
    pub d: usize,
    /// Features, N×D row-major.
    pub features: Vec<f64>,
    /// Annotations, N×4 row-major in [`PARAM_NAMES`] order.
    pub params: Vec<f64>,
    /// One record per row.
    pub provenance: Vec<SceneRecord>,
    pub master_seed: u64,
}

impl AnnotatedDataset {
    /// Number of annotation slots per row.
    pub const PARAM_DIM: usize = PARAM_NAMES.len();

    /// Packages the dataset for model fitting.
    pub fn to_training_set(&self) -> Result<TrainingSet> {
        TrainingSet::new(
            self.features.clone(),
            self.params.clone(),
            self.n,
            self.d,
            Self::PARAM_DIM,
        )?
        .with_names(&PARAM_NAMES)
    }
}

/// A scene that failed to render or featurize, with the reason.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenFailure {
    pub index: usize,
    pub scene: Scene,
    pub message: String,
}

/// Result of a generation run: the rows that succeeded plus a report of the
/// scenes that did not.
#[derive(Debug, Clone)]
pub struct GenerationOutcome {
    pub dataset: AnnotatedDataset,
    pub failures: Vec<GenFailure>,
}

/// Simulates and featurizes every scene in the list, in parallel, collecting
/// rows in scene order. Individual scene failures are recorded and skipped
/// rather than aborting the run; rows with inconsistent dimensions (which
/// would indicate inconsistent configuration) are rejected the same way.
pub fn generate(scenes: &[Scene], master_seed: u64, config: &GenConfig) -> GenerationOutcome {
    let rows: Vec<(usize, u64, std::result::Result<Vec<f64>, String>)> = scenes
        .par_iter()
        .enumerate()
        .map(|(i, scene)| {
            let seed = scene_seed(master_seed, i, scene);
            let row = regenerate_row(scene, seed, config).map_err(|e| e.to_string());
            (i, seed, row)
        })
        .collect();

    let d = rows
        .iter()
        .find_map(|(_, _, r)| r.as_ref().ok().map(|v| v.len()))
        .unwrap_or(0);
    let mut features = Vec::new();
    let mut params = Vec::new();
    let mut provenance = Vec::new();
    let mut failures = Vec::new();
    for (i, seed, row) in rows {
        match row {
            Ok(values) if values.len() == d => {
                features.extend_from_slice(&values);
                params.extend_from_slice(&scenes[i].params.as_vector());
                provenance.push(SceneRecord {
                    index: i,
                    seed,
                    scene: scenes[i].clone(),
                });
            }
            Ok(values) => failures.push(GenFailure {
                index: i,
                scene: scenes[i].clone(),
                message: format!("feature dimension {} differs from {}", values.len(), d),
            }),
            Err(message) => failures.push(GenFailure {
                index: i,
                scene: scenes[i].clone(),
                message,
            }),
        }
    }
    let n = provenance.len();
    GenerationOutcome {
        dataset: AnnotatedDataset {
            n,
            d,
            features,
            params,
            provenance,
            master_seed,
        },
        failures,
    }
}

/// Every combination of flat wall absorption, range, and grid direction
/// (absorption-major, then range, then direction).
pub fn product_flat(grid: &DirectionGrid, ranges: &[f64], absorptions: &[f64]) -> Vec<Scene> {
    let dirs = grid.directions();
    let mut out = Vec::with_capacity(absorptions.len() * ranges.len() * dirs.len());
    for &a in absorptions {
        for &r in ranges {
            for &(az, el) in &dirs {
                out.push(Scene::flat(az, el, r, a));
            }
        }
    }
    out
}

/// Every combination of wall material, range, and grid direction
/// (material-major, then range, then direction).
pub fn product_materials(
    grid: &DirectionGrid,
    ranges: &[f64],
    mats: &[MaterialProfile],
) -> Vec<Scene> {
    let dirs = grid.directions();
    let mut out = Vec::with_capacity(mats.len() * ranges.len() * dirs.len());
    for m in mats {
        for &r in ranges {
            for &(az, el) in &dirs {
                out.push(Scene::from_material(az, el, r, m));
            }
        }
    }
    out
}

/// One scene per grid direction, cycling deterministically through the
/// ranges (fastest) and materials (once the ranges wrap) — a fixed-size
/// mixed test set that still touches every range and every material.
pub fn round_robin_materials(
    grid: &DirectionGrid,
    ranges: &[f64],
    mats: &[MaterialProfile],
) -> Vec<Scene> {
    let dirs = grid.directions();
    let mut out = Vec::with_capacity(dirs.len());
    for (i, &(az, el)) in dirs.iter().enumerate() {
        let r = ranges[i % ranges.len()];
        let m = &mats[(i / ranges.len()) % mats.len()];
        out.push(Scene::from_material(az, el, r, m));
    }
    out
}
