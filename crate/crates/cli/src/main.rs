//! `airway` command-line tool: segmentation, phantoms, evaluation and
//! per-VOI debug dumps.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use airway_core::config::Config;
use airway_core::eval::{evaluate, report, Metrics};
use airway_core::phantom::{generate_phantom, seed_voxel, GroundTruth, PhantomSpec};
use airway_core::tracer::{inspect_voi, trace, AirwayTree, BranchStatus};
use airway_core::voi::Voi;
use airway_core::volume::{load_mask, load_volume, save_mask, save_volume};
use airway_core::Error;
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;

const EXIT_FAILURE: u8 = 1;
const EXIT_NOT_FOUND: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "airway", version, about = "Airway tree tracing from CT volumes")]
struct Cli {
    /// Worker threads (default: AIRWAY_THREADS, else all cores).
    #[arg(long, global = true, env = "AIRWAY_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace the airway tree of a volume from a seed voxel.
    Segment {
        /// MetaImage header of the input volume (HU).
        #[arg(long)]
        volume: PathBuf,
        /// Seed voxel index inside the trachea.
        #[arg(long, value_parser = parse_seed)]
        seed: [usize; 3],
        /// Flat `key = value` config file; omitted keys keep their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic tree phantom with its ground truth.
    Phantom {
        /// Flat `key = value` phantom description; omitted keys keep defaults.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a segmentation against a phantom's ground truth.
    Eval {
        /// Output directory of `segment`.
        #[arg(long)]
        result: PathBuf,
        /// Output directory of `phantom`.
        #[arg(long)]
        truth: PathBuf,
        /// Another `segment` output to compare against.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Dump one intermediate volume of a single VOI.
    Debug {
        #[arg(long)]
        volume: PathBuf,
        /// Box as base x,y,z, axis x,y,z, cross size and length (mm).
        #[arg(long, value_parser = parse_voi, allow_hyphen_values = true)]
        voi: Voi,
        #[arg(long, value_enum)]
        dump: Dump,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Lattice pitch in mm (default: finest input spacing).
        #[arg(long)]
        pitch: Option<f64>,
        /// MetaImage header to write.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Dump {
    /// Cavity enhancement score.
    Cef,
    /// GVF magnitude, plus one volume per vector component.
    Gvf,
    /// Tube-likeness.
    Tubeness,
    /// Thinned centerline mask.
    Centerline,
}

fn parse_numbers<T: std::str::FromStr>(s: &str, n: usize) -> Result<Vec<T>, String> {
    let v: Vec<T> = s
        .split(',')
        .map(|p| p.trim().parse::<T>().map_err(|_| format!("`{}` is not a number", p.trim())))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated values, got {}", v.len()));
    }
    Ok(v)
}

fn parse_seed(s: &str) -> Result<[usize; 3], String> {
    let v = parse_numbers::<usize>(s, 3)?;
    Ok([v[0], v[1], v[2]])
}

fn parse_voi(s: &str) -> Result<Voi, String> {
    let v = parse_numbers::<f64>(s, 8)?;
    Voi::new(Vector3::new(v[0], v[1], v[2]), Vector3::new(v[3], v[4], v[5]), v[6], v[7], 0).map_err(|e| e.to_string())
}

fn config_help() -> String {
    let mut s = String::from("Config keys (key = default):\n");
    for (k, v) in Config::default().entries() {
        s.push_str(&format!("  {k} = {v}\n"));
    }
    s
}

fn read_text(path: &Path) -> airway_core::Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io { path: path.to_path_buf(), source: e },
    })
}

fn write_text(path: &Path, text: &str) -> airway_core::Result<()> {
    fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn make_dir(path: &Path) -> airway_core::Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn load_config(path: Option<&Path>) -> airway_core::Result<Config> {
    match path {
        Some(p) => Config::parse(&read_text(p)?),
        None => Ok(Config::default()),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> airway_core::Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

#[derive(serde::Serialize)]
struct Summary {
    seed: [usize; 3],
    branches: usize,
    terminated: usize,
    leaked: usize,
    open: usize,
    voxels: usize,
    volume_mm3: f64,
    truncated: bool,
}

fn summarize(tree: &AirwayTree, seed: [usize; 3]) -> Summary {
    let voxels = tree.mask.count();
    Summary {
        seed,
        branches: tree.branches.len(),
        terminated: tree.count_with_status(BranchStatus::Terminated),
        leaked: tree.count_with_status(BranchStatus::Leaked),
        open: tree.count_with_status(BranchStatus::Open),
        voxels,
        volume_mm3: voxels as f64 * tree.mask.grid.voxel_volume(),
        truncated: tree.truncated,
    }
}

fn segment(volume: &Path, seed: [usize; 3], config: Option<&Path>, out: &Path) -> airway_core::Result<()> {
    let cfg = load_config(config)?;
    let v = load_volume(volume)?;
    let tree = trace(&v, seed, &cfg)?;
    make_dir(out)?;
    save_mask(&tree.mask, out.join("mask.mhd"))?;
    write_text(&out.join("tree.json"), &tree.to_json()?)?;
    let summary = summarize(&tree, seed);
    write_text(&out.join("summary.json"), &to_json(&summary)?)?;
    println!(
        "{} branches ({} leaked, {} open), {} voxels{}",
        summary.branches,
        summary.leaked,
        summary.open,
        summary.voxels,
        if summary.truncated { ", truncated by voxel budget" } else { "" }
    );
    Ok(())
}

fn phantom(spec: Option<&Path>, out: &Path) -> airway_core::Result<()> {
    let spec = match spec {
        Some(p) => PhantomSpec::parse(&read_text(p)?)?,
        None => PhantomSpec::default(),
    };
    let (v, truth) = generate_phantom(&spec)?;
    make_dir(out)?;
    save_volume(&v, out.join("volume.mhd"))?;
    save_mask(&truth.mask, out.join("truth.mhd"))?;
    write_text(&out.join("tree.json"), &truth.tree.to_json()?)?;
    let seed = seed_voxel(&v.grid).ok_or_else(|| Error::InsufficientExtent("no seed voxel in the root".into()))?;
    write_text(&out.join("seed.txt"), &format!("{},{},{}\n", seed[0], seed[1], seed[2]))?;
    println!(
        "{} branches, dims {:?}, seed {},{},{}",
        truth.tree.branches.len(),
        v.grid.dims,
        seed[0],
        seed[1],
        seed[2]
    );
    Ok(())
}

fn load_truth(dir: &Path) -> airway_core::Result<GroundTruth> {
    let mask = load_mask(dir.join("truth.mhd"))?;
    let tree = AirwayTree::from_json(&read_text(&dir.join("tree.json"))?, mask.clone())?;
    Ok(GroundTruth { mask, tree })
}

#[derive(serde::Serialize)]
struct EvalJson {
    result: Metrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline: Option<Metrics>,
}

fn eval(result: &Path, truth: &Path, baseline: Option<&Path>) -> airway_core::Result<()> {
    let truth = load_truth(truth)?;
    let m = evaluate(&load_mask(result.join("mask.mhd"))?, &truth)?;
    let b = match baseline {
        Some(dir) => Some(evaluate(&load_mask(dir.join("mask.mhd"))?, &truth)?),
        None => None,
    };
    print!("{}", report(&m, b.as_ref()));
    write_text(&result.join("eval.json"), &to_json(&EvalJson { result: m, baseline: b })?)
}

fn debug(
    volume: &Path,
    voi: &Voi,
    dump: Dump,
    config: Option<&Path>,
    pitch: Option<f64>,
    out: &Path,
) -> airway_core::Result<()> {
    let cfg = load_config(config)?;
    let v = load_volume(volume)?;
    let pitch = pitch.or(cfg.pitch).unwrap_or(v.grid.min_spacing());
    let ins = inspect_voi(&v, voi, pitch, &cfg)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        make_dir(dir)?;
    }
    match dump {
        Dump::Cef => save_volume(&ins.cef_score, out),
        Dump::Gvf => {
            let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("gvf");
            for (c, name) in ins.gvf.components().iter().zip(["x", "y", "z"]) {
                save_volume(c, out.with_file_name(format!("{stem}_{name}.mhd")))?;
            }
            save_volume(&ins.gvf_magnitude, out)
        }
        Dump::Tubeness => save_volume(&ins.tubeness, out),
        Dump::Centerline => save_mask(&ins.centerline, out),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::FileNotFound(_) => EXIT_NOT_FOUND,
        Error::UnknownConfigKey(_) | Error::ConfigValue { .. } => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    let keys = config_help();
    let mut cmd = Cli::command().after_help(keys.clone());
    cmd = cmd.mut_subcommand("segment", |c| c.after_help(keys.clone()));
    cmd = cmd.mut_subcommand("debug", |c| c.after_help(keys));
    let cli = match cmd.try_get_matches().and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("airway: error: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    }
    let run = match &cli.command {
        Command::Segment { volume, seed, config, out } => segment(volume, *seed, config.as_deref(), out),
        Command::Phantom { spec, out } => phantom(spec.as_deref(), out),
        Command::Eval { result, truth, baseline } => eval(result, truth, baseline.as_deref()),
        Command::Debug { volume, voi, dump, config, pitch, out } => {
            debug(volume, voi, *dump, config.as_deref(), *pitch, out)
        }
    };
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("airway: error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
