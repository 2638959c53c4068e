//! Wall-material registry: named absorption profiles at the six anchor
//! bands, loaded from a small CSV file. Registry materials must be
//! summarizable by a single scalar — the mean absorption above 500 Hz —
//! which is enforced by requiring a small standard deviation over the
//! 500 Hz–4 kHz anchors.

use crate::error::{Error, Result};
use crate::room::{GYPSUM_BOARD_ABSORPTION, N_BANDS, THIN_CARPET_ABSORPTION};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Registry materials must have std(absorption) below this over the
/// 500 Hz–4 kHz anchors, so their scalar summary is meaningful.
pub const WALL_STD_LIMIT: f64 = 0.07;

/// First anchor index at or above 500 Hz (anchors are 125/250/500/1k/2k/4k).
const FIRST_SUMMARY_ANCHOR: usize = 2;

/// Expected CSV header for material files.
pub const MATERIALS_HEADER: [&str; 7] = ["name", "a125", "a250", "a500", "a1000", "a2000", "a4000"];

/// A named absorption profile over the six anchor bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialProfile {
    pub name: String,
    /// Absorption coefficient per anchor band, each in [0, 1].
    pub absorption: [f64; N_BANDS],
}

impl MaterialProfile {
    /// A frequency-flat profile with the same coefficient in every band.
    pub fn flat(alpha: f64) -> Self {
        Self {
            name: format!("flat {alpha:.2}"),
            absorption: [alpha; N_BANDS],
        }
    }

    /// Mean absorption over the 500 Hz–4 kHz anchors — the scalar that
    /// annotates a scene built from this material.
    pub fn mean_absorption_above_500(&self) -> f64 {
        let tail = &self.absorption[FIRST_SUMMARY_ANCHOR..];
        tail.iter().sum::<f64>() / tail.len() as f64
    }

    /// Standard deviation of absorption over the 500 Hz–4 kHz anchors.
    pub fn std_above_500(&self) -> f64 {
        let tail = &self.absorption[FIRST_SUMMARY_ANCHOR..];
        let mean = self.mean_absorption_above_500();
        (tail.iter().map(|&a| (a - mean) * (a - mean)).sum::<f64>() / tail.len() as f64).sqrt()
    }

    /// Checks the [0, 1] bounds and the scalar-summary criterion.
    pub fn validate(&self) -> Result<()> {
        for (i, &a) in self.absorption.iter().enumerate() {
            if !(0.0..=1.0).contains(&a) || !a.is_finite() {
                return Err(Error::InvalidScene(format!(
                    "material '{}': absorption {} at band {} is outside [0, 1]",
                    self.name, a, i
                )));
            }
        }
        let std = self.std_above_500();
        if std >= WALL_STD_LIMIT {
            return Err(Error::InvalidScene(format!(
                "material '{}': absorption std {:.4} over the 500 Hz–4 kHz anchors \
                 is not below {WALL_STD_LIMIT} — it cannot be summarized by a single coefficient",
                self.name, std
            )));
        }
        Ok(())
    }
}

/// Parses a materials CSV (header `name,a125,a250,a500,a1000,a2000,a4000`)
/// and validates every entry.
pub fn parse_materials_csv(text: &str) -> Result<Vec<MaterialProfile>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::Format(format!("materials file: {e}")))?
        .clone();
    let got: Vec<&str> = headers.iter().collect();
    if got != MATERIALS_HEADER {
        return Err(Error::Format(format!(
            "materials file header must be '{}', found '{}'",
            MATERIALS_HEADER.join(","),
            got.join(",")
        )));
    }
    let mut out = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record =
            record.map_err(|e| Error::Format(format!("materials row {}: {e}", row + 2)))?;
        if record.len() != 7 {
            return Err(Error::Format(format!(
                "materials row {}: expected 7 fields, found {}",
                row + 2,
                record.len()
            )));
        }
        let name = record[0].to_string();
        if name.is_empty() {
            return Err(Error::Format(format!(
                "materials row {}: empty name",
                row + 2
            )));
        }
        let mut absorption = [0.0f64; N_BANDS];
        for (i, slot) in absorption.iter_mut().enumerate() {
            *slot = record[i + 1].parse::<f64>().map_err(|_| {
                Error::Format(format!(
                    "material '{}': '{}' is not a number",
                    name,
                    &record[i + 1]
                ))
            })?;
        }
        let profile = MaterialProfile { name, absorption };
        profile.validate()?;
        if out
            .iter()
            .any(|m: &MaterialProfile| m.name.eq_ignore_ascii_case(&profile.name))
        {
            return Err(Error::Format(format!(
                "material '{}' appears twice",
                profile.name
            )));
        }
        out.push(profile);
    }
    Ok(out)
}

/// Loads and validates a materials CSV file.
pub fn load_materials(path: &Path) -> Result<Vec<MaterialProfile>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::NotFound(format!("materials file {}: {e}", path.display())))?;
    parse_materials_csv(&text)
}

/// The registry shipped with the crate: 18 named wall materials.
pub fn default_materials() -> Vec<MaterialProfile> {
    parse_materials_csv(include_str!("../../data/materials.csv"))
        .expect("bundled materials registry must be valid")
}

/// Looks up a wall material by name (case-insensitive).
pub fn find_material<'a>(
    materials: &'a [MaterialProfile],
    name: &str,
) -> Option<&'a MaterialProfile> {
    let want = name.trim();
    materials.iter().find(|m| m.name.eq_ignore_ascii_case(want))
}

/// Materials of the fixed room surfaces (floor and ceiling). These are not
/// wall candidates and are exempt from the scalar-summary criterion.
pub fn fixed_surface_material(name: &str) -> Option<MaterialProfile> {
    let want = name.trim();
    if want.eq_ignore_ascii_case("gypsum board") {
        Some(MaterialProfile {
            name: "gypsum board".into(),
            absorption: GYPSUM_BOARD_ABSORPTION,
        })
    } else if want.eq_ignore_ascii_case("thin carpet") {
        Some(MaterialProfile {
            name: "thin carpet".into(),
            absorption: THIN_CARPET_ABSORPTION,
        })
    } else {
        None
    }
}

/// Registry lookup across the wall materials and the fixed-surface
/// materials, in that order.
pub fn lookup_material(materials: &[MaterialProfile], name: &str) -> Option<MaterialProfile> {
    find_material(materials, name)
        .cloned()
        .or_else(|| fixed_surface_material(name))
}

/// Picks `count` materials spread evenly across the registry's range of
/// scalar absorptions (deterministic: sorted by mean, then name).
pub fn spread_selection(materials: &[MaterialProfile], count: usize) -> Vec<MaterialProfile> {
    assert!(count >= 1 && !materials.is_empty());
    let mut sorted: Vec<&MaterialProfile> = materials.iter().collect();
    sorted.sort_by(|a, b| {
        a.mean_absorption_above_500()
            .partial_cmp(&b.mean_absorption_above_500())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.name.cmp(&b.name))
    });
    if count >= sorted.len() {
        return sorted.into_iter().cloned().collect();
    }
    (0..count)
        .map(|i| {
            let pos = if count == 1 {
                0
            } else {
                (i * (sorted.len() - 1) + (count - 1) / 2) / (count - 1)
            };
            sorted[pos].clone()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_registry_has_eighteen_valid_wall_materials() {
        let mats = default_materials();
        assert_eq!(mats.len(), 18);
        for m in &mats {
            m.validate().unwrap();
            assert!(
                m.std_above_500() < WALL_STD_LIMIT,
                "material '{}' violates the scalar-summary criterion",
                m.name
            );
        }
        // Scalar summaries cover the absorption axis broadly.
        let means: Vec<f64> = mats.iter().map(|m| m.mean_absorption_above_500()).collect();
        assert!(means.iter().cloned().fold(f64::INFINITY, f64::min) < 0.1);
        assert!(means.iter().cloned().fold(0.0f64, f64::max) > 0.9);
    }

    #[test]
    fn named_profiles_match_their_published_summaries() {
        let mats = default_materials();
        let plaster = find_material(&mats, "Rockwool backing behind plaster").unwrap();
        assert!((plaster.mean_absorption_above_500() - 0.16).abs() < 1e-12);
        let panel = find_material(&mats, "Rockwool core fabric panel (8pcf)").unwrap();
        assert!((panel.mean_absorption_above_500() - 0.96).abs() < 1e-12);
    }

    #[test]
    fn fixed_surface_materials_use_the_built_in_profiles() {
        let gypsum = fixed_surface_material("gypsum board").unwrap();
        assert_eq!(gypsum.absorption, [0.45, 0.55, 0.60, 0.90, 0.86, 0.75]);
        let carpet = fixed_surface_material("Thin Carpet").unwrap();
        assert_eq!(carpet.absorption, [0.02, 0.04, 0.08, 0.20, 0.35, 0.40]);
        assert!(fixed_surface_material("marble").is_none());

        // Registry lookup reaches them even though the wall file doesn't
        // contain them (they are fixed-surface materials, not candidates).
        let mats = default_materials();
        assert!(find_material(&mats, "gypsum board").is_none());
        assert!(lookup_material(&mats, "gypsum board").is_some());
    }

    #[test]
    fn flat_profiles_summarize_to_their_constant() {
        for alpha in [0.0, 0.25, 1.0] {
            let m = MaterialProfile::flat(alpha);
            assert_eq!(m.mean_absorption_above_500(), alpha);
            assert_eq!(m.std_above_500(), 0.0);
            m.validate().unwrap();
        }
    }

    #[test]
    fn malformed_files_are_rejected_with_reasons() {
        // Wrong header.
        let bad_header = "name,x125,a250,a500,a1000,a2000,a4000\nfoo,0,0,0,0,0,0\n";
        assert!(matches!(
            parse_materials_csv(bad_header),
            Err(Error::Format(_))
        ));
        // Non-numeric value.
        let bad_value = format!(
            "{}\nfoo,0.1,0.1,0.1,abc,0.1,0.1\n",
            MATERIALS_HEADER.join(",")
        );
        assert!(matches!(
            parse_materials_csv(&bad_value),
            Err(Error::Format(_))
        ));
        // Out of range.
        let oob = format!(
            "{}\nfoo,0.1,0.1,0.1,1.4,0.1,0.1\n",
            MATERIALS_HEADER.join(",")
        );
        assert!(matches!(
            parse_materials_csv(&oob),
            Err(Error::InvalidScene(_))
        ));
        // Scalar-summary criterion violated (std 500 Hz–4 kHz ≥ 0.07).
        let spiky = format!(
            "{}\nfoo,0.1,0.1,0.1,0.5,0.1,0.5\n",
            MATERIALS_HEADER.join(",")
        );
        assert!(matches!(
            parse_materials_csv(&spiky),
            Err(Error::InvalidScene(_))
        ));
        // Duplicate name.
        let dup = format!(
            "{}\nfoo,0.1,0.1,0.1,0.1,0.1,0.1\nFOO,0.2,0.2,0.2,0.2,0.2,0.2\n",
            MATERIALS_HEADER.join(",")
        );
        assert!(matches!(parse_materials_csv(&dup), Err(Error::Format(_))));
    }

    #[test]
    fn spread_selection_spans_the_registry() {
        let mats = default_materials();
        let picks = spread_selection(&mats, 5);
        assert_eq!(picks.len(), 5);
        // Ends of the selection are the extreme materials.
        let means: Vec<f64> = picks
            .iter()
            .map(|m| m.mean_absorption_above_500())
            .collect();
        let all_means: Vec<f64> = mats.iter().map(|m| m.mean_absorption_above_500()).collect();
        let lo = all_means.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = all_means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((means[0] - lo).abs() < 1e-12);
        assert!((means[4] - hi).abs() < 1e-12);
        // Monotone non-decreasing and deterministic.
        for w in means.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert_eq!(picks, spread_selection(&mats, 5));
        // Asking for more than available returns everything.
        assert_eq!(spread_selection(&mats, 99).len(), 18);
    }
}
