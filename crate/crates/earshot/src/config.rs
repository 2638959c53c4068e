//! TOML configuration schemas for the command-line tools. Every schema is
//! strict: unknown keys are rejected so typos fail loudly instead of
//! silently falling back to defaults.

use crate::dataset::{
    build_grid, default_materials, load_materials, lookup_material, product_flat,
    product_materials, round_robin_materials, GenConfig, GridRole, MaterialProfile, Scene,
};
use crate::error::{Error, Result};
use crate::gllim::{CovarianceKind, EmConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

/// Reads and parses a strict TOML config file.
pub fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

/// Wall treatment for a single scene: exactly one of `material` (a registry
/// name) or `absorption` (a flat coefficient).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WallChoice {
    pub material: Option<String>,
    pub absorption: Option<f64>,
}

impl WallChoice {
    fn resolve(
        &self,
        azimuth_deg: f64,
        elevation_deg: f64,
        range_m: f64,
        registry: &[MaterialProfile],
    ) -> Result<Scene> {
        match (&self.material, self.absorption) {
            (Some(name), None) => {
                let profile = lookup_material(registry, name).ok_or_else(|| {
                    Error::NotFound(format!("material {name:?} not in the registry"))
                })?;
                Ok(Scene::from_material(
                    azimuth_deg,
                    elevation_deg,
                    range_m,
                    &profile,
                ))
            }
            (None, Some(a)) => Ok(Scene::flat(azimuth_deg, elevation_deg, range_m, a)),
            (None, None) => Err(Error::InvalidConfig(
                "wall: set either material or absorption".into(),
            )),
            (Some(_), Some(_)) => Err(Error::InvalidConfig(
                "wall: material and absorption are mutually exclusive".into(),
            )),
        }
    }
}

/// Config for `simulate`: one scene plus simulation settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneFileConfig {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub range_m: f64,
    pub wall: WallChoice,
    /// Optional wall-material registry CSV replacing the bundled one.
    pub materials_file: Option<PathBuf>,
    pub sim: crate::render::SimConfig,
}

impl Default for SceneFileConfig {
    fn default() -> Self {
        SceneFileConfig {
            azimuth_deg: 0.0,
            elevation_deg: 0.0,
            range_m: 1.0,
            wall: WallChoice {
                material: None,
                absorption: Some(0.5),
            },
            materials_file: None,
            sim: crate::render::SimConfig::default(),
        }
    }
}

fn registry_from(materials_file: &Option<PathBuf>) -> Result<Vec<MaterialProfile>> {
    match materials_file {
        Some(path) => load_materials(path),
        None => Ok(default_materials()),
    }
}

impl SceneFileConfig {
    /// Resolves the configured scene against the material registry.
    pub fn scene(&self) -> Result<Scene> {
        let registry = registry_from(&self.materials_file)?;
        self.wall.resolve(
            self.azimuth_deg,
            self.elevation_deg,
            self.range_m,
            &registry,
        )
    }
}

/// Which direction lattice a dataset draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridChoice {
    Train,
    Test,
}

/// How named materials combine with ranges and directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaterialAssignment {
    /// Every (material, range, direction) combination.
    Product,
    /// One scene per direction, cycling through ranges then materials.
    RoundRobin,
}

/// Config for `dataset`: a scene selection plus generation settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetFileConfig {
    /// Base direction lattice.
    pub grid: GridChoice,
    /// Replaces the lattice azimuths when set.
    pub azimuths: Option<Vec<f64>>,
    /// Replaces the lattice elevations when set.
    pub elevations: Option<Vec<f64>>,
    /// Source ranges in meters.
    pub ranges: Vec<f64>,
    /// Flat wall absorptions (each crossed with every range and direction).
    pub absorptions: Vec<f64>,
    /// Named wall materials from the registry.
    pub materials: Vec<String>,
    pub material_assignment: MaterialAssignment,
    pub materials_file: Option<PathBuf>,
    pub gen: GenConfig,
}

impl Default for DatasetFileConfig {
    fn default() -> Self {
        DatasetFileConfig {
            grid: GridChoice::Train,
            azimuths: None,
            elevations: None,
            ranges: vec![1.0],
            absorptions: Vec::new(),
            materials: Vec::new(),
            material_assignment: MaterialAssignment::Product,
            materials_file: None,
            gen: GenConfig::default(),
        }
    }
}

impl DatasetFileConfig {
    /// Resolves the configured selection to a concrete scene list.
    pub fn scenes(&self) -> Result<Vec<Scene>> {
        if self.ranges.is_empty() {
            return Err(Error::InvalidConfig("ranges must not be empty".into()));
        }
        if self.absorptions.is_empty() && self.materials.is_empty() {
            return Err(Error::InvalidConfig(
                "select at least one of absorptions or materials".into(),
            ));
        }
        let role = match self.grid {
            GridChoice::Train => GridRole::Train,
            GridChoice::Test => GridRole::Test,
        };
        let mut grid = build_grid(role);
        if let Some(az) = &self.azimuths {
            grid.azimuths = az.clone();
        }
        if let Some(el) = &self.elevations {
            grid.elevations = el.clone();
        }
        if grid.is_empty() {
            return Err(Error::InvalidConfig("direction grid is empty".into()));
        }

        let mut scenes = product_flat(&grid, &self.ranges, &self.absorptions);
        if !self.materials.is_empty() {
            let registry = registry_from(&self.materials_file)?;
            let mut profiles = Vec::with_capacity(self.materials.len());
            for name in &self.materials {
                profiles.push(lookup_material(&registry, name).ok_or_else(|| {
                    Error::NotFound(format!("material {name:?} not in the registry"))
                })?);
            }
            let material_scenes = match self.material_assignment {
                MaterialAssignment::Product => product_materials(&grid, &self.ranges, &profiles),
                MaterialAssignment::RoundRobin => {
                    round_robin_materials(&grid, &self.ranges, &profiles)
                }
            };
            scenes.extend(material_scenes);
        }
        Ok(scenes)
    }
}

/// Config for `train`: model size, annotation mask, and EM settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainFileConfig {
    /// Number of mixture components.
    pub k: usize,
    /// Annotation columns to train on, by name; empty means all columns
    /// the dataset provides.
    pub annotation: Vec<String>,
    pub max_iter: usize,
    pub tol: f64,
    pub covariance: CovarianceKind,
}

impl Default for TrainFileConfig {
    fn default() -> Self {
        let em = EmConfig::default();
        TrainFileConfig {
            k: 8,
            annotation: Vec::new(),
            max_iter: em.max_iter,
            tol: em.tol,
            covariance: em.covariance,
        }
    }
}

impl TrainFileConfig {
    pub fn em_config(&self) -> EmConfig {
        EmConfig {
            max_iter: self.max_iter,
            tol: self.tol,
            covariance: self.covariance,
        }
    }

    /// Maps the configured annotation names to columns of `param_names`.
    pub fn annotation_columns(&self, param_names: &[String]) -> Result<Vec<usize>> {
        if self.annotation.is_empty() {
            return Ok((0..param_names.len()).collect());
        }
        let mut cols = Vec::with_capacity(self.annotation.len());
        for name in &self.annotation {
            let col = param_names.iter().position(|n| n == name).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "annotation {name:?} not in dataset parameters {param_names:?}"
                ))
            })?;
            cols.push(col);
        }
        Ok(cols)
    }
}
