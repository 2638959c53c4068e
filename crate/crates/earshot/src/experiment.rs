//! Named end-to-end experiments: canned train/test scene selections at two
//! scales, model fitting, evaluation reports, and side-by-side comparison
//! against the full-scale reference error levels.

use crate::dataset::{
    build_grid, default_materials, generate, product_flat, product_materials,
    round_robin_materials, save_dataset, spread_selection, training_absorptions, DirectionGrid,
    GenConfig, GridRole, MaterialProfile, Scene,
};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::gllim::{fit, EmConfig, FitReport, GllimModel, TrainingSet};
use crate::io::write_atomic;
use crate::math::derive_seed;
use crate::render::SimConfig;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Seed-derivation tag for generated datasets (0 = train, 1 = test).
const DATA_TAG: u64 = 0x4441;
/// Seed-derivation tag for model fitting.
const FIT_TAG: u64 = 0x464d;

/// The named experiments `reproduce` knows how to run.
pub const PRESET_NAMES: [&str; 7] = [
    "single-config",
    "cross-config",
    "full",
    "full-no-diffusion",
    "direction-only",
    "dir+absorption",
    "dir+range",
];

/// Experiment size: `Desk` finishes in minutes on one core; `Reference`
/// resolves the full-scale scene sets the reference error levels were
/// measured at (tens of thousands of scenes — expect hours).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Reference,
}

impl Scale {
    pub fn parse(s: &str) -> Result<Scale> {
        match s {
            "desk" => Ok(Scale::Desk),
            "reference" => Ok(Scale::Reference),
            other => Err(Error::InvalidConfig(format!(
                "unknown scale {other:?} (expected desk or reference)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Scale::Desk => "desk",
            Scale::Reference => "reference",
        }
    }
}

/// Full-scale reference errors (mean, std) per target, kept for context
/// when judging desk-scale reproductions. `None` marks targets the
/// experiment does not estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceErrors {
    pub azimuth_deg: Option<(f64, f64)>,
    pub elevation_deg: Option<(f64, f64)>,
    pub range_cm: Option<(f64, f64)>,
    pub absorption: Option<(f64, f64)>,
}

impl ReferenceErrors {
    fn for_target(&self, name: &str) -> Option<(f64, f64)> {
        match name {
            "azimuth_deg" => self.azimuth_deg,
            "elevation_deg" => self.elevation_deg,
            "range_m" => self.range_cm,
            "mean_wall_absorption" => self.absorption,
            _ => None,
        }
    }
}

/// A fully resolved experiment: scene sets, annotation mask, model size,
/// and per-arm generation settings.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: String,
    pub scale: Scale,
    /// Mixture components for the fit.
    pub k: usize,
    /// Indices into [`PARAM_NAMES`] the model is trained to predict.
    pub annotation: Vec<usize>,
    pub train: Vec<Scene>,
    pub test: Vec<Scene>,
    pub gen_train: GenConfig,
    pub gen_test: GenConfig,
    pub reference: ReferenceErrors,
}

/// Training direction lattice at desk scale: 9 azimuths × 7 elevations over
/// the full angular extents.
pub fn desk_train_grid() -> DirectionGrid {
    DirectionGrid {
        azimuths: (0..9).map(|i| -45.0 + 11.25 * i as f64).collect(),
        elevations: (0..7).map(|i| -30.0 + 10.0 * i as f64).collect(),
        role: GridRole::Train,
    }
}

/// Source ranges (m) used at desk scale.
pub const DESK_RANGES: [f64; 3] = [1.0, 1.6, 2.5];
/// Source ranges (m) used at reference scale.
pub const REFERENCE_RANGES: [f64; 6] = [1.0, 1.3, 1.6, 1.9, 2.2, 2.5];
/// Flat training absorptions at desk scale.
pub const DESK_ABSORPTIONS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

const MATCHED_TRAIN_MATERIAL: &str = "Rockwool backing behind plaster";
const SHIFTED_TEST_MATERIAL: &str = "Rockwool core fabric panel (8pcf)";

fn find_named<'a>(mats: &'a [MaterialProfile], name: &str) -> Result<&'a MaterialProfile> {
    mats.iter()
        .find(|m| m.name == name)
        .ok_or_else(|| Error::NotFound(format!("material {name:?} missing from the wall registry")))
}

fn scale_sim(scale: Scale) -> SimConfig {
    match scale {
        Scale::Desk => SimConfig {
            duration: Some(0.25),
            n_rays: 2000,
            ..SimConfig::default()
        },
        Scale::Reference => SimConfig::default(),
    }
}

fn scene_key(s: &Scene) -> ([u64; 4], [u64; 6]) {
    (
        s.params.as_vector().map(f64::to_bits),
        s.wall_absorption.map(f64::to_bits),
    )
}

fn check_scene_sets(name: &str, train: &[Scene], test: &[Scene]) -> Result<()> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "preset {name}: train and test scene sets must be non-empty"
        )));
    }
    let train_keys: HashSet<_> = train.iter().map(scene_key).collect();
    for s in test {
        if train_keys.contains(&scene_key(s)) {
            return Err(Error::InvalidConfig(format!(
                "preset {name}: test scene {:?} also appears in the training set",
                s.params
            )));
        }
    }
    Ok(())
}

/// Resolves a named experiment at a scale. Fails with the list of known
/// names when the name is unknown.
pub fn resolve_preset(name: &str, scale: Scale) -> Result<Preset> {
    if !PRESET_NAMES.contains(&name) {
        return Err(Error::NotFound(format!(
            "experiment {name:?}; known experiments: {}",
            PRESET_NAMES.join(", ")
        )));
    }
    let mats = default_materials();
    let train_grid = match scale {
        Scale::Desk => desk_train_grid(),
        Scale::Reference => build_grid(GridRole::Train),
    };
    let test_grid = build_grid(GridRole::Test);
    let ranges: Vec<f64> = match scale {
        Scale::Desk => DESK_RANGES.to_vec(),
        Scale::Reference => REFERENCE_RANGES.to_vec(),
    };
    let absorptions: Vec<f64> = match scale {
        Scale::Desk => DESK_ABSORPTIONS.to_vec(),
        Scale::Reference => training_absorptions(),
    };
    let k = match scale {
        Scale::Desk => 8,
        Scale::Reference => 25,
    };
    let gen = GenConfig {
        sim: scale_sim(scale),
        feature: FeatureConfig::default(),
    };

    let direction_only = vec![0, 1];
    let all_params = vec![0, 1, 2, 3];

    let (annotation, train, test, gen_train, gen_test, reference) = match name {
        "single-config" => {
            let m = find_named(&mats, MATCHED_TRAIN_MATERIAL)?;
            (
                direction_only,
                product_materials(&train_grid, &[1.0], std::slice::from_ref(m)),
                product_materials(&test_grid, &[1.0], std::slice::from_ref(m)),
                gen.clone(),
                gen,
                ReferenceErrors {
                    azimuth_deg: Some((1.67, 1.22)),
                    elevation_deg: Some((8.78, 7.08)),
                    range_cm: None,
                    absorption: None,
                },
            )
        }
        "cross-config" => {
            let train_m = find_named(&mats, MATCHED_TRAIN_MATERIAL)?;
            let test_m = find_named(&mats, SHIFTED_TEST_MATERIAL)?;
            (
                direction_only,
                product_materials(&train_grid, &[1.0], std::slice::from_ref(train_m)),
                product_materials(&test_grid, &[2.5], std::slice::from_ref(test_m)),
                gen.clone(),
                gen,
                ReferenceErrors {
                    azimuth_deg: Some((1.99, 1.42)),
                    elevation_deg: Some((15.79, 12.39)),
                    range_cm: None,
                    absorption: None,
                },
            )
        }
        other => {
            // The remaining five experiments share one train/test design —
            // flat-absorption training scenes against real-material test
            // scenes — and differ in annotation mask and diffusion.
            let train = product_flat(&train_grid, &ranges, &absorptions);
            let test = match scale {
                Scale::Desk => {
                    let five = spread_selection(&mats, 5);
                    round_robin_materials(&test_grid, &ranges, &five)
                }
                Scale::Reference => product_materials(&test_grid, &ranges, &mats),
            };
            let (annotation, diffusion, reference) = match other {
                "full" => (
                    all_params,
                    true,
                    ReferenceErrors {
                        azimuth_deg: Some((1.78, 1.34)),
                        elevation_deg: Some((7.87, 6.45)),
                        range_cm: Some((54.2, 29.65)),
                        absorption: Some((0.18, 0.14)),
                    },
                ),
                "full-no-diffusion" => (
                    all_params,
                    false,
                    ReferenceErrors {
                        azimuth_deg: Some((2.16, 1.62)),
                        elevation_deg: Some((11.3, 7.95)),
                        range_cm: Some((56.8, 34.3)),
                        absorption: Some((0.80, 0.44)),
                    },
                ),
                "direction-only" => (
                    direction_only,
                    true,
                    ReferenceErrors {
                        azimuth_deg: Some((1.72, 1.43)),
                        elevation_deg: Some((8.81, 7.81)),
                        range_cm: None,
                        absorption: None,
                    },
                ),
                "dir+absorption" => (
                    vec![0, 1, 3],
                    true,
                    ReferenceErrors {
                        azimuth_deg: Some((2.00, 1.51)),
                        elevation_deg: Some((8.45, 6.86)),
                        range_cm: None,
                        absorption: Some((0.22, 0.17)),
                    },
                ),
                "dir+range" => (
                    vec![0, 1, 2],
                    true,
                    ReferenceErrors {
                        azimuth_deg: Some((1.91, 1.52)),
                        elevation_deg: Some((9.44, 7.55)),
                        range_cm: Some((58.5, 32.4)),
                        absorption: None,
                    },
                ),
                _ => unreachable!("name was checked against PRESET_NAMES"),
            };
            // Removing diffusion removes it from both arms: the ablation
            // studies the cue itself, not a train/test mismatch.
            let mut gen_arm = gen;
            gen_arm.sim.diffusion = diffusion;
            (annotation, train, test, gen_arm.clone(), gen_arm, reference)
        }
    };
    check_scene_sets(name, &train, &test)?;
    Ok(Preset {
        name: name.to_string(),
        scale,
        k,
        annotation,
        train,
        test,
        gen_train,
        gen_test,
        reference,
    })
}

/// Absolute errors for one predicted target across a test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub name: String,
    pub mean_abs_error: f64,
    /// Population standard deviation of the absolute errors.
    pub std_abs_error: f64,
    /// Mean absolute error of always predicting the test-set mean.
    pub baseline_mean_abs_error: f64,
}

/// Per-target mean absolute error within one absorption bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionBucket {
    pub low: f64,
    pub high: f64,
    pub count: usize,
    pub mean_abs_error: Vec<f64>,
}

/// Per-target mean absolute error at one source range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeBucket {
    pub range_m: f64,
    pub count: usize,
    pub mean_abs_error: Vec<f64>,
}

/// Evaluation of a model on a test set: per-sample truths/predictions plus
/// aggregates, all recomputable from the per-sample table.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// Names of the predicted targets, in model order.
    pub target_names: Vec<String>,
    /// Number of test rows.
    pub n: usize,
    /// Truths, n × targets row-major.
    pub truths: Vec<f64>,
    /// Predictions, n × targets row-major.
    pub predictions: Vec<f64>,
    pub summary: Vec<TargetSummary>,
    /// Mean errors bucketed by true wall absorption (10 equal buckets on
    /// [0, 1]); empty when the test set lacks absorption annotations.
    pub by_absorption: Vec<AbsorptionBucket>,
    /// Mean errors grouped by true source range; empty when the test set
    /// lacks range annotations.
    pub by_range: Vec<RangeBucket>,
}

impl ErrorReport {
    pub fn abs_error(&self, row: usize, target: usize) -> f64 {
        let t = self.target_names.len();
        (self.predictions[row * t + target] - self.truths[row * t + target]).abs()
    }

    /// Summary row for a target name.
    pub fn target(&self, name: &str) -> Option<&TargetSummary> {
        self.summary.iter().find(|s| s.name == name)
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Runs the model's inverse prediction over every test row and aggregates
/// absolute errors. The model's recorded target names are matched to the
/// test set's annotation columns by name.
pub fn evaluate(model: &GllimModel, test: &TrainingSet) -> Result<ErrorReport> {
    if model.feature_dim != test.d {
        return Err(Error::ShapeMismatch(format!(
            "model expects {}-dimensional features, test set has {}",
            model.feature_dim, test.d
        )));
    }
    let mut columns = Vec::with_capacity(model.param_names.len());
    for name in &model.param_names {
        let col = test
            .param_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| {
                Error::ShapeMismatch(format!(
                    "model predicts {name:?} but the test set annotates only {:?}",
                    test.param_names
                ))
            })?;
        columns.push(col);
    }
    let t = columns.len();
    let n = test.n;
    let mut truths = Vec::with_capacity(n * t);
    let mut predictions = Vec::with_capacity(n * t);
    for i in 0..n {
        let (u_hat, _) = model.inverse_predict(&test.y[i * test.d..(i + 1) * test.d])?;
        for (j, &col) in columns.iter().enumerate() {
            truths.push(test.u[i * test.l + col]);
            predictions.push(u_hat[j]);
        }
    }

    let mut summary = Vec::with_capacity(t);
    for j in 0..t {
        let errs: Vec<f64> = (0..n)
            .map(|i| (predictions[i * t + j] - truths[i * t + j]).abs())
            .collect();
        let m = mean(&errs);
        let var = mean(&errs.iter().map(|e| (e - m) * (e - m)).collect::<Vec<_>>());
        let truth_mean = mean(&(0..n).map(|i| truths[i * t + j]).collect::<Vec<_>>());
        let baseline = mean(
            &(0..n)
                .map(|i| (truths[i * t + j] - truth_mean).abs())
                .collect::<Vec<_>>(),
        );
        summary.push(TargetSummary {
            name: model.param_names[j].clone(),
            mean_abs_error: m,
            std_abs_error: var.sqrt(),
            baseline_mean_abs_error: baseline,
        });
    }

    // Bucketed breakdowns use the test set's full annotations, which carry
    // the true absorption and range even when the model predicts neither.
    let absorption_col = test
        .param_names
        .iter()
        .position(|n| n == "mean_wall_absorption");
    let range_col = test.param_names.iter().position(|n| n == "range_m");

    let mut by_absorption = Vec::new();
    if let Some(ac) = absorption_col {
        let mut sums = vec![vec![0.0f64; t]; 10];
        let mut counts = [0usize; 10];
        for i in 0..n {
            let a = test.u[i * test.l + ac];
            let b = ((a * 10.0).floor() as isize).clamp(0, 9) as usize;
            counts[b] += 1;
            for j in 0..t {
                sums[b][j] += (predictions[i * t + j] - truths[i * t + j]).abs();
            }
        }
        for b in 0..10 {
            let mean_abs_error = if counts[b] == 0 {
                vec![0.0; t]
            } else {
                sums[b].iter().map(|s| s / counts[b] as f64).collect()
            };
            by_absorption.push(AbsorptionBucket {
                low: b as f64 / 10.0,
                high: (b + 1) as f64 / 10.0,
                count: counts[b],
                mean_abs_error,
            });
        }
    }

    let mut by_range = Vec::new();
    if let Some(rc) = range_col {
        let mut distinct: Vec<f64> = Vec::new();
        for i in 0..n {
            let r = test.u[i * test.l + rc];
            if !distinct.iter().any(|&x| x.to_bits() == r.to_bits()) {
                distinct.push(r);
            }
        }
        distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite ranges"));
        for r in distinct {
            let rows: Vec<usize> = (0..n)
                .filter(|&i| test.u[i * test.l + rc].to_bits() == r.to_bits())
                .collect();
            let mean_abs_error = (0..t)
                .map(|j| {
                    mean(
                        &rows
                            .iter()
                            .map(|&i| (predictions[i * t + j] - truths[i * t + j]).abs())
                            .collect::<Vec<_>>(),
                    )
                })
                .collect();
            by_range.push(RangeBucket {
                range_m: r,
                count: rows.len(),
                mean_abs_error,
            });
        }
    }

    Ok(ErrorReport {
        target_names: model.param_names.clone(),
        n,
        truths,
        predictions,
        summary,
        by_absorption,
        by_range,
    })
}

fn csv_error_columns(names: &[String], suffix: &str) -> String {
    names.iter().map(|n| format!(",{n}_{suffix}")).collect()
}

/// Writes the report as a set of plot-ready CSV files in `dir`:
/// `summary.csv`, `per_sample.csv`, `by_absorption.csv`, `by_range.csv`.
pub fn write_report(report: &ErrorReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let t = report.target_names.len();

    let mut summary = String::from("target,mean_abs_error,std_abs_error,baseline_mean_abs_error\n");
    for s in &report.summary {
        writeln!(
            summary,
            "{},{},{},{}",
            s.name, s.mean_abs_error, s.std_abs_error, s.baseline_mean_abs_error
        )
        .expect("string write");
    }
    write_atomic(&dir.join("summary.csv"), summary.as_bytes())?;

    let mut per_sample = String::from("row");
    for name in &report.target_names {
        write!(per_sample, ",{name}_true,{name}_pred,{name}_abs_error").expect("string write");
    }
    per_sample.push('\n');
    for i in 0..report.n {
        write!(per_sample, "{i}").expect("string write");
        for j in 0..t {
            let truth = report.truths[i * t + j];
            let pred = report.predictions[i * t + j];
            write!(per_sample, ",{truth},{pred},{}", (pred - truth).abs()).expect("string write");
        }
        per_sample.push('\n');
    }
    write_atomic(&dir.join("per_sample.csv"), per_sample.as_bytes())?;

    let mut by_abs = format!(
        "bucket_low,bucket_high,count{}\n",
        csv_error_columns(&report.target_names, "mean_abs_error")
    );
    for b in &report.by_absorption {
        write!(by_abs, "{},{},{}", b.low, b.high, b.count).expect("string write");
        for v in &b.mean_abs_error {
            write!(by_abs, ",{v}").expect("string write");
        }
        by_abs.push('\n');
    }
    write_atomic(&dir.join("by_absorption.csv"), by_abs.as_bytes())?;

    let mut by_range = format!(
        "range_m,count{}\n",
        csv_error_columns(&report.target_names, "mean_abs_error")
    );
    for b in &report.by_range {
        write!(by_range, "{},{}", b.range_m, b.count).expect("string write");
        for v in &b.mean_abs_error {
            write!(by_range, ",{v}").expect("string write");
        }
        by_range.push('\n');
    }
    write_atomic(&dir.join("by_range.csv"), by_range.as_bytes())?;
    Ok(())
}

/// Display name and unit scaling for a target in comparison tables: range
/// is shown in centimeters, angles in degrees, absorption unitless.
fn display_target(name: &str) -> (&'static str, f64) {
    match name {
        "azimuth_deg" => ("azimuth (deg)", 1.0),
        "elevation_deg" => ("elevation (deg)", 1.0),
        "range_m" => ("range (cm)", 100.0),
        "mean_wall_absorption" => ("absorption", 1.0),
        _ => ("?", 1.0),
    }
}

/// Renders the run-versus-reference table, with a scale disclaimer when the
/// run was not performed at reference scale.
pub fn comparison_table(report: &ErrorReport, reference: &ReferenceErrors, scale: Scale) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<18} {:>20} {:>24}",
        "target", "this run (mean+/-std)", "reference (mean+/-std)"
    )
    .expect("string write");
    for s in &report.summary {
        let (label, factor) = display_target(&s.name);
        let run = format!(
            "{:.2} +/- {:.2}",
            s.mean_abs_error * factor,
            s.std_abs_error * factor
        );
        let r = match reference.for_target(&s.name) {
            Some((m, sd)) => format!("{m:.2} +/- {sd:.2}"),
            None => "-".to_string(),
        };
        writeln!(out, "{label:<18} {run:>20} {r:>24}").expect("string write");
    }
    if scale == Scale::Desk {
        writeln!(
            out,
            "note: desk scale uses a coarser grid, fewer mixture components, fewer rays,\n\
             and a parametric spherical head; reference numbers come from the full-scale\n\
             setup and indicate context, not an equivalence target."
        )
        .expect("string write");
    }
    out
}

/// Machine-readable version of [`comparison_table`].
pub fn comparison_csv(report: &ErrorReport, reference: &ReferenceErrors) -> String {
    let mut out =
        String::from("target,run_mean_abs_error,run_std_abs_error,reference_mean,reference_std\n");
    for s in &report.summary {
        let (label, factor) = display_target(&s.name);
        let (rm, rs) = match reference.for_target(&s.name) {
            Some((m, sd)) => (m.to_string(), sd.to_string()),
            None => (String::new(), String::new()),
        };
        writeln!(
            out,
            "{},{},{},{},{}",
            label,
            s.mean_abs_error * factor,
            s.std_abs_error * factor,
            rm,
            rs
        )
        .expect("string write");
    }
    out
}

/// Everything a reproduction run produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: ErrorReport,
    pub fit: FitReport,
    pub train_failures: usize,
    pub test_failures: usize,
    pub comparison: String,
}

/// Writes the fit's log-likelihood trace as CSV.
pub fn ll_trace_csv(fit: &FitReport) -> String {
    let mut out = String::from("iteration,log_likelihood\n");
    for (i, ll) in fit.log_likelihood_trace.iter().enumerate() {
        writeln!(out, "{i},{ll}").expect("string write");
    }
    out
}

/// Runs one resolved preset end to end: generate both datasets, fit, then
/// evaluate — writing containers, model, trace, report CSVs, and the
/// comparison table under `out_dir`. Fully deterministic in `master_seed`.
pub fn run_preset(
    preset: &Preset,
    master_seed: u64,
    out_dir: &Path,
    force: bool,
) -> Result<RunOutcome> {
    fs::create_dir_all(out_dir)?;

    let train_outcome = generate(
        &preset.train,
        derive_seed(master_seed, &[DATA_TAG, 0]),
        &preset.gen_train,
    );
    if train_outcome.dataset.n == 0 {
        return Err(Error::Training(
            "every training scene failed to generate".into(),
        ));
    }
    save_dataset(
        &train_outcome,
        &preset.gen_train,
        &out_dir.join("train"),
        force,
    )?;

    let test_outcome = generate(
        &preset.test,
        derive_seed(master_seed, &[DATA_TAG, 1]),
        &preset.gen_test,
    );
    if test_outcome.dataset.n == 0 {
        return Err(Error::Training(
            "every test scene failed to generate".into(),
        ));
    }
    save_dataset(
        &test_outcome,
        &preset.gen_test,
        &out_dir.join("test"),
        force,
    )?;

    let train_set = train_outcome
        .dataset
        .to_training_set()?
        .select_params(&preset.annotation)?;
    let em = EmConfig::default();
    let (model, fit_report) = fit(
        &train_set,
        preset.k,
        &em,
        derive_seed(master_seed, &[FIT_TAG]),
    )?;
    let model_path = out_dir.join("model.bin");
    if model_path.exists() && !force {
        return Err(Error::OutputExists(model_path.display().to_string()));
    }
    model.save(&model_path)?;
    write_atomic(
        &out_dir.join("ll_trace.csv"),
        ll_trace_csv(&fit_report).as_bytes(),
    )?;

    let report = evaluate(&model, &test_outcome.dataset.to_training_set()?)?;
    write_report(&report, &out_dir.join("report"))?;
    let comparison = comparison_table(&report, &preset.reference, preset.scale);
    write_atomic(
        &out_dir.join("report").join("comparison.txt"),
        comparison.as_bytes(),
    )?;
    write_atomic(
        &out_dir.join("report").join("comparison.csv"),
        comparison_csv(&report, &preset.reference).as_bytes(),
    )?;

    Ok(RunOutcome {
        report,
        fit: fit_report,
        train_failures: train_outcome.failures.len(),
        test_failures: test_outcome.failures.len(),
        comparison,
    })
}
