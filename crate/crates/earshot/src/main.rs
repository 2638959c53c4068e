//! Command-line front end: render single scenes, build datasets, train and
//! evaluate models, and run the named end-to-end experiments.

use clap::{Parser, Subcommand};
use earshot::config::{load_toml, DatasetFileConfig, SceneFileConfig, TrainFileConfig};
use earshot::dataset::{generate, load_dataset, save_dataset};
use earshot::error::Error;
use earshot::experiment::{
    evaluate, ll_trace_csv, resolve_preset, run_preset, write_report, Scale,
};
use earshot::gllim::{fit, GllimModel};
use earshot::head::HeadModel;
use earshot::io::{write_atomic, write_wav_stereo};
use earshot::render::simulate_brir;
use earshot::room::{RoomSpec, SourceSpec};
use serde::Serialize;
use std::path::PathBuf;
use std::time::Instant;

const EXIT_OK: i32 = 0;
/// Bad usage, bad config file, refusing to overwrite.
const EXIT_USAGE: i32 = 1;
/// Valid request that failed while running.
const EXIT_RUNTIME: i32 = 2;
/// Finished, but some scenes failed and were skipped.
const EXIT_PARTIAL: i32 = 3;

#[derive(Parser)]
#[command(
    name = "earshot",
    version,
    about = "Binaural room simulation and sound-source localization toolkit"
)]
struct Cli {
    /// Master random seed; every run with the same seed is bit-identical.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (default: one per CPU core).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// TOML config file for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,

    /// Experiment scale: "desk" (minutes) or "reference" (full size).
    #[arg(long, global = true, default_value = "desk")]
    scale: String,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render one binaural room impulse response to a stereo WAV file.
    Simulate {
        /// Output WAV path; a .json sidecar is written next to it.
        out: PathBuf,
    },
    /// Generate an annotated feature dataset directory.
    Dataset {
        /// Output dataset directory.
        out: PathBuf,
        /// Resolve and count the scenes, then exit without simulating.
        #[arg(long)]
        dry_run: bool,
    },
    /// Fit the localization model on a dataset directory.
    Train {
        /// Input dataset directory.
        dataset: PathBuf,
        /// Output model path; a .ll_trace.csv is written next to it.
        out: PathBuf,
    },
    /// Evaluate a trained model on a test dataset.
    Eval {
        /// Trained model path.
        model: PathBuf,
        /// Test dataset directory.
        dataset: PathBuf,
        /// Output report directory.
        out: PathBuf,
    },
    /// Run a named experiment end to end: dataset, train, eval, report.
    Reproduce {
        /// Experiment name; an unknown name lists the known ones.
        name: String,
        /// Output directory for datasets, model, and report.
        out: PathBuf,
    },
}

fn main() {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            std::process::exit(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: cannot size the worker pool: {e}");
            std::process::exit(EXIT_RUNTIME);
        }
    }
    std::process::exit(dispatch(cli));
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::NotFound(_) | Error::OutputExists(_) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

fn dispatch(cli: Cli) -> i32 {
    let result = match &cli.command {
        Cmd::Simulate { out } => cmd_simulate(&cli, out.clone()),
        Cmd::Dataset { out, dry_run } => cmd_dataset(&cli, out.clone(), *dry_run),
        Cmd::Train { dataset, out } => cmd_train(&cli, dataset.clone(), out.clone()),
        Cmd::Eval {
            model,
            dataset,
            out,
        } => cmd_eval(&cli, model.clone(), dataset.clone(), out.clone()),
        Cmd::Reproduce { name, out } => cmd_reproduce(&cli, name.clone(), out.clone()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

/// Scene descriptor written next to a rendered WAV.
#[derive(Serialize)]
struct SimulationSidecar<'a> {
    scene: &'a earshot::dataset::Scene,
    seed: u64,
    sim: &'a earshot::render::SimConfig,
    sample_rate: f64,
    n_samples: usize,
    duration_s: f64,
}

fn cmd_simulate(cli: &Cli, out: PathBuf) -> Result<i32, Error> {
    let cfg: SceneFileConfig = match &cli.config {
        Some(path) => load_toml(path)?,
        None => SceneFileConfig::default(),
    };
    let scene = cfg.scene()?;
    if out.exists() && !cli.force {
        return Err(Error::OutputExists(out.display().to_string()));
    }
    let room = RoomSpec::reference_room(scene.wall_absorption);
    let head = HeadModel::default_sphere();
    let source = SourceSpec::new(
        scene.params.azimuth_deg,
        scene.params.elevation_deg,
        scene.params.range_m,
    );
    let t0 = Instant::now();
    let rir = simulate_brir(&room, &source, &head, &cfg.sim, cli.seed)?;
    write_wav_stereo(&out, &rir.left, &rir.right, rir.sample_rate as u32)?;
    let sidecar = SimulationSidecar {
        scene: &scene,
        seed: cli.seed,
        sim: &cfg.sim,
        sample_rate: rir.sample_rate,
        n_samples: rir.n_samples(),
        duration_s: rir.duration_s(),
    };
    write_atomic(
        &out.with_extension("json"),
        &serde_json::to_vec_pretty(&sidecar)?,
    )?;
    println!(
        "wrote {} ({} samples, {:.3} s at {} Hz) in {:.2} s",
        out.display(),
        rir.n_samples(),
        rir.duration_s(),
        rir.sample_rate,
        t0.elapsed().as_secs_f64()
    );
    Ok(EXIT_OK)
}

fn cmd_dataset(cli: &Cli, out: PathBuf, dry_run: bool) -> Result<i32, Error> {
    let path = cli.config.as_ref().ok_or_else(|| {
        Error::InvalidConfig("dataset needs --config <file.toml> describing the scenes".into())
    })?;
    let cfg: DatasetFileConfig = load_toml(path)?;
    let scenes = cfg.scenes()?;
    let d = cfg.gen.feature.dim()?;
    if dry_run {
        println!(
            "would generate N = {} rows of dimension D = {}",
            scenes.len(),
            d
        );
        return Ok(EXIT_OK);
    }
    let t0 = Instant::now();
    let outcome = generate(&scenes, cli.seed, &cfg.gen);
    save_dataset(&outcome, &cfg.gen, &out, cli.force)?;
    println!(
        "N = {} rows, D = {} dims, {} of {} scenes failed, {:.1} s",
        outcome.dataset.n,
        if outcome.dataset.n > 0 {
            outcome.dataset.d
        } else {
            d
        },
        outcome.failures.len(),
        scenes.len(),
        t0.elapsed().as_secs_f64()
    );
    for f in outcome.failures.iter().take(5) {
        eprintln!("scene {} failed: {}", f.index, f.message);
    }
    if outcome.dataset.n == 0 {
        eprintln!("error: every scene failed");
        return Ok(EXIT_RUNTIME);
    }
    if !outcome.failures.is_empty() {
        return Ok(EXIT_PARTIAL);
    }
    Ok(EXIT_OK)
}

fn cmd_train(cli: &Cli, dataset: PathBuf, out: PathBuf) -> Result<i32, Error> {
    let cfg: TrainFileConfig = match &cli.config {
        Some(path) => load_toml(path)?,
        None => TrainFileConfig::default(),
    };
    if out.exists() && !cli.force {
        return Err(Error::OutputExists(out.display().to_string()));
    }
    let stored = load_dataset(&dataset)?;
    let full = stored.training_set()?;
    let cols = cfg.annotation_columns(&full.param_names)?;
    let set = full.select_params(&cols)?;
    let t0 = Instant::now();
    let (model, report) = fit(&set, cfg.k, &cfg.em_config(), cli.seed)?;
    model.save(&out)?;
    write_atomic(
        &out.with_extension("ll_trace.csv"),
        ll_trace_csv(&report).as_bytes(),
    )?;
    println!(
        "fit K = {} on {} rows (L = {}): {} iterations, converged = {}, final LL = {:.3}, {:.1} s",
        cfg.k,
        set.n,
        set.l,
        report.n_iterations,
        report.converged,
        report
            .log_likelihood_trace
            .last()
            .copied()
            .unwrap_or(f64::NAN),
        t0.elapsed().as_secs_f64()
    );
    Ok(EXIT_OK)
}

fn cmd_eval(cli: &Cli, model: PathBuf, dataset: PathBuf, out: PathBuf) -> Result<i32, Error> {
    let model = GllimModel::load(&model)?;
    let stored = load_dataset(&dataset)?;
    if out.join("summary.csv").exists() && !cli.force {
        return Err(Error::OutputExists(
            out.join("summary.csv").display().to_string(),
        ));
    }
    let report = evaluate(&model, &stored.training_set()?)?;
    write_report(&report, &out)?;
    for s in &report.summary {
        println!(
            "{}: mean abs error {:.4} +/- {:.4} (predict-the-mean baseline {:.4})",
            s.name, s.mean_abs_error, s.std_abs_error, s.baseline_mean_abs_error
        );
    }
    println!("report written to {}", out.display());
    Ok(EXIT_OK)
}

fn cmd_reproduce(cli: &Cli, name: String, out: PathBuf) -> Result<i32, Error> {
    let scale = Scale::parse(&cli.scale)?;
    let preset = resolve_preset(&name, scale)?;
    println!(
        "experiment {:?} at {} scale: {} train / {} test scenes, K = {}, predicting [{}]",
        preset.name,
        preset.scale.as_str(),
        preset.train.len(),
        preset.test.len(),
        preset.k,
        preset
            .annotation
            .iter()
            .map(|&c| earshot::dataset::PARAM_NAMES[c])
            .collect::<Vec<_>>()
            .join(", ")
    );
    let t0 = Instant::now();
    let outcome = run_preset(&preset, cli.seed, &out, cli.force)?;
    println!(
        "done in {:.1} s ({} train / {} test scenes failed)",
        t0.elapsed().as_secs_f64(),
        outcome.train_failures,
        outcome.test_failures
    );
    print!("{}", outcome.comparison);
    println!("full report in {}", out.join("report").display());
    if outcome.train_failures + outcome.test_failures > 0 {
        return Ok(EXIT_PARTIAL);
    }
    Ok(EXIT_OK)
}
