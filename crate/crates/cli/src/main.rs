use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use beamprint::config::RunConfig;
use beamprint::eval::{
    binned_csv, cdf_csv, centroid_baseline_error, coverage_map, evaluate, per_position_csv,
    spatial_error_map, stats_csv, EvalReport,
};
use beamprint::geometry::Point2;
use beamprint::learner::{
    history_to_csv, load_model, save_model, train_with_observer, EpochRecord,
};
use beamprint::pipeline::{assemble_dataset, load_dataset, save_dataset, Dataset};
use beamprint::propagation::{trace_paths, write_path_rows, PATH_CSV_HEADER};
use beamprint::scene::{
    generate_manhattan_scene, load_scene, save_scene, ManhattanParams, ReceiverGrid, Scene,
};
use beamprint::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "beamprint",
    version,
    about = "Beam-fingerprint localization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// Run config file (`section.key = value` lines).
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set noise.sigma=6`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    master_seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Manhattan-grid scene file.
    SceneGen {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200.0)]
        side: f64,
        #[arg(long, default_value_t = 30.0)]
        block: f64,
        #[arg(long, default_value_t = 20.0)]
        street: f64,
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Trace one receiver position and print its paths as CSV.
    Trace {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Scene file; defaults to the config's scene.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, value_name = "X,Y")]
        rx: String,
    },
    /// Build the fingerprint dataset over the receiver grid.
    Dataset {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Train a model on a dataset.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// History CSV path; defaults to `<output>.history.csv`.
        #[arg(long)]
        history: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        mode: Option<String>,
    },
    /// Evaluate a model on noisy test views and write report CSVs.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Scene file used to label positions LOS/NLOS.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        test_sets: Option<usize>,
        /// Report directory; defaults to the config's output_dir.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write the maximum received power per grid point.
    Coverage {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Scene, dataset, training and evaluation in one go, all under output_dir.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

/// Failure with the process exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_)
            | Error::Parse { .. }
            | Error::Validation { .. }
            | Error::InvalidParameter(_) => 2,
            _ => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn read(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| io_error(path, e))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| io_error(path, e))
}

impl ConfigArgs {
    fn resolve(&self, extra: &[(&str, Option<String>)]) -> CliResult<(RunConfig, PathBuf)> {
        let (mut cfg, base) = match &self.config {
            Some(path) => {
                let cfg = RunConfig::load(path)?;
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (cfg, base)
            }
            None => (RunConfig::default(), PathBuf::new()),
        };
        let mut sets: Vec<(String, String)> = Vec::new();
        if let Some(s) = self.master_seed {
            sets.push(("master_seed".into(), s.to_string()));
        }
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| config_error(format!("--set expects KEY=VALUE, found {o:?}")))?;
            sets.push((k.trim().into(), v.trim().into()));
        }
        for (k, v) in extra {
            if let Some(v) = v {
                sets.push((k.to_string(), v.clone()));
            }
        }
        for (k, v) in &sets {
            cfg.set(k, v).map_err(config_error)?;
            match k.as_str() {
                "sampling.threshold" => {
                    cfg.preprocess.detection_threshold = cfg.sampling.detection_threshold
                }
                "preprocess.threshold" => {
                    cfg.sampling.detection_threshold = cfg.preprocess.detection_threshold
                }
                _ => {}
            }
        }
        cfg.validate()?;
        Ok((cfg, base))
    }
}

fn scene_for(cfg: &RunConfig, base: &Path, file: Option<&Path>) -> CliResult<Scene> {
    match file {
        Some(path) => {
            let text = String::from_utf8(read(path)?)
                .map_err(|_| config_error("scene file is not UTF-8"))?;
            Ok(load_scene(&text)?)
        }
        None => Ok(cfg.build_scene(base)?),
    }
}

fn build_dataset(cfg: &RunConfig, scene: &Scene) -> CliResult<Dataset> {
    let grid = cfg.grid_for(scene)?;
    let codebook = cfg.codebook.build()?;
    let (ds, stats) = assemble_dataset(
        scene,
        &grid,
        &codebook,
        &cfg.trace_config(scene),
        &cfg.sampling,
    )?;
    println!(
        "grid {} points: kept {}, dropped indoor {}, dropped without detection {}; {} beams x {} samples",
        stats.grid_points,
        stats.kept,
        stats.dropped_indoor,
        stats.dropped_no_detection,
        ds.beams(),
        ds.samples()
    );
    Ok(ds)
}

fn train_model(cfg: &RunConfig, ds: &Dataset, model_path: &Path, history_path: &Path) -> CliResult {
    let mut history: Vec<EpochRecord> = Vec::new();
    let result = train_with_observer(
        ds,
        &cfg.noise(),
        &cfg.preprocess,
        cfg.network,
        &cfg.train_config(),
        |r, _| {
            log::info!(
                "epoch {} lr {:.3e} loss {:.6}",
                r.epoch,
                r.learning_rate,
                r.mean_loss
            );
            history.push(*r);
            ControlFlow::Continue(())
        },
    );
    write(history_path, history_to_csv(&history))?;
    let model = result?;
    write(model_path, save_model(&model))?;
    println!(
        "trained {} epochs, final loss {:.6}",
        history.len(),
        history.last().map_or(f64::NAN, |r| r.mean_loss)
    );
    Ok(())
}

fn write_report(dir: &Path, report: &EvalReport, grid: &ReceiverGrid) -> CliResult {
    write(&dir.join("stats.csv"), stats_csv(&report.stats))?;
    write(&dir.join("cdf.csv"), cdf_csv(&report.cdf))?;
    write(&dir.join("binned.csv"), binned_csv(&report.binned))?;
    write(
        &dir.join("per_position.csv"),
        per_position_csv(&report.per_position),
    )?;
    write(
        &dir.join("error_map.csv"),
        spatial_error_map(&report.per_position, grid)?.to_csv(),
    )?;
    let s = &report.stats;
    println!(
        "mean {:.2} m, median {:.2} m, p95 {:.2} m, rmse {:.2} m over {} samples",
        s.mean, s.median, s.p95, s.rmse, s.count
    );
    Ok(())
}

fn eval_model(
    cfg: &RunConfig,
    ds: &Dataset,
    model_path: &Path,
    scene: Option<&Scene>,
    dir: &Path,
) -> CliResult {
    let model = load_model(&read(model_path)?)?;
    let report = evaluate(
        &model,
        ds,
        &cfg.noise(),
        cfg.eval.test_sets,
        cfg.eval.bin_width,
        scene,
    )?;
    let grid = ReceiverGrid::covering(ds.bounds(), cfg.grid_spacing)?;
    write_report(dir, &report, &grid)?;
    println!(
        "centroid baseline mean {:.2} m",
        centroid_baseline_error(ds)?
    );
    Ok(())
}

fn parse_point(s: &str) -> CliResult<Point2> {
    let parts: Vec<&str> = s.split(',').collect();
    let nums: Vec<f64> = parts.iter().filter_map(|p| p.trim().parse().ok()).collect();
    if parts.len() != 2 || nums.len() != 2 {
        return Err(config_error(format!("expected X,Y, found {s:?}")));
    }
    Ok(Point2::new(nums[0], nums[1]))
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::SceneGen {
            seed,
            side,
            block,
            street,
            jitter,
            output,
        } => {
            let scene = generate_manhattan_scene(
                seed,
                ManhattanParams {
                    side,
                    block,
                    street,
                    jitter,
                },
            )?;
            write(&output, save_scene(&scene))?;
            println!("{} buildings", scene.buildings().len());
        }
        Command::Trace { cfg, scene, rx } => {
            let (cfg, base) = cfg.resolve(&[])?;
            let scene = scene_for(&cfg, &base, scene.as_deref())?;
            let rx = parse_point(&rx)?;
            let result = trace_paths(&scene, rx, &cfg.trace_config(&scene))?;
            let mut out = format!("{PATH_CSV_HEADER}\n");
            write_path_rows(&mut out, rx, &result.paths);
            print!("{out}");
        }
        Command::Dataset { cfg, scene, output } => {
            let (cfg, base) = cfg.resolve(&[])?;
            let scene = scene_for(&cfg, &base, scene.as_deref())?;
            let ds = build_dataset(&cfg, &scene)?;
            write(&output, save_dataset(&ds))?;
        }
        Command::Train {
            cfg,
            dataset,
            output,
            history,
            epochs,
            sigma,
            mode,
        } => {
            let (cfg, _) = cfg.resolve(&[
                ("train.epochs", epochs.map(|v| v.to_string())),
                ("noise.sigma", sigma.map(|v| v.to_string())),
                ("preprocess.mode", mode),
            ])?;
            let ds = load_dataset(&read(&dataset)?)?;
            let history = history.unwrap_or_else(|| {
                let mut p = output.clone().into_os_string();
                p.push(".history.csv");
                PathBuf::from(p)
            });
            train_model(&cfg, &ds, &output, &history)?;
        }
        Command::Eval {
            cfg,
            dataset,
            model,
            scene,
            sigma,
            test_sets,
            output,
        } => {
            let (cfg, _) = cfg.resolve(&[
                ("noise.sigma", sigma.map(|v| v.to_string())),
                ("eval.test_sets", test_sets.map(|v| v.to_string())),
            ])?;
            let ds = load_dataset(&read(&dataset)?)?;
            let scene = match scene {
                Some(p) => Some(scene_for(&cfg, Path::new(""), Some(&p))?),
                None => None,
            };
            let dir = output.unwrap_or_else(|| cfg.output_dir.clone());
            eval_model(&cfg, &ds, &model, scene.as_ref(), &dir)?;
        }
        Command::Coverage { cfg, scene, output } => {
            let (cfg, base) = cfg.resolve(&[])?;
            let scene = scene_for(&cfg, &base, scene.as_deref())?;
            let grid = cfg.grid_for(&scene)?;
            let map = coverage_map(
                &scene,
                &grid,
                &cfg.codebook.build()?,
                &cfg.trace_config(&scene),
                &cfg.sampling,
            )?;
            write(&output, map.to_csv())?;
        }
        Command::Run { cfg } => {
            let (cfg, base) = cfg.resolve(&[])?;
            let dir = cfg.output_dir.clone();
            write(&dir.join("config.txt"), cfg.to_text())?;
            let scene = cfg.build_scene(&base)?;
            write(&dir.join("scene.txt"), save_scene(&scene))?;
            let ds = build_dataset(&cfg, &scene)?;
            write(&dir.join("dataset.bfpd"), save_dataset(&ds))?;
            train_model(&cfg, &ds, &dir.join("model.bfmd"), &dir.join("history.csv"))?;
            eval_model(&cfg, &ds, &dir.join("model.bfmd"), Some(&scene), &dir)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let threads = match std::env::var("BEAMPRINT_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) => n,
            Err(_) => {
                eprintln!("error: BEAMPRINT_THREADS must be a non-negative integer, found {v:?}");
                return ExitCode::from(2);
            }
        },
        Err(_) => 0,
    };
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(3);
        }
    }
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
