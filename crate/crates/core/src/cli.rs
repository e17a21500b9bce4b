//! The `txn` command line: argument parsing, config merging and exit codes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::io::config::RunConfig;
use crate::io::dataset::PatchDataset;
use crate::io::export;
use crate::mesh::{load_mesh, ply, TriMesh};
use crate::nn::mnist::{mnist_experiment, MnistData, MnistVariant};
use crate::nn::train::{save_checkpoint, OptimizerKind, TrainConfig};
use crate::rosy::{sample_surface, OrientationSolver, RoSyField, SamplingMethod, SurfaceSample};
use crate::signal::{batch_patches, SignalSource};
use crate::toy::{segment_toy, ToyConfig};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "txn", version, about = "Rotation-invariant texture convolution on meshes")]
pub struct Cli {
    /// `key = value` configuration file; explicit flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for patch extraction.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Factor applied to input mesh coordinates so they are in meters.
    #[arg(long, global = true)]
    pub scale: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve the 4-RoSy field; writes a frame PLY and a singularity CSV.
    Field(FieldArgs),
    /// Place samples on the surface; writes a point PLY with frames.
    Sample(SampleArgs),
    /// Resample the surface signal around every sample into a dataset file.
    Patches(PatchArgs),
    /// Color a mesh by its field (singular faces red) or by vertex labels.
    Viz(VizArgs),
    /// Train and test the MNIST classifier.
    Mnist(MnistArgs),
    /// Train the point network on synthetic plane/cylinder/sphere scenes.
    SegmentToy(ToyArgs),
}

#[derive(Args, Debug, Clone)]
pub struct FieldOpts {
    /// Hierarchy levels including the input mesh (default ceil(log2 V)).
    #[arg(long)]
    pub levels: Option<usize>,
    /// Gauss–Seidel sweeps per level (default 10).
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Args, Debug)]
pub struct FieldArgs {
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Output PLY; the CSV goes next to it with a `.csv` extension.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub field: FieldOpts,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Lattice,
    Poisson,
    Fps,
}

#[derive(Args, Debug, Clone)]
pub struct SampleOpts {
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Sample spacing in meters (default 0.05).
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Sample count for `fps` (default: what the lattice would produce).
    #[arg(long)]
    pub count: Option<usize>,
    #[command(flatten)]
    pub field: FieldOpts,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub sample: SampleOpts,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Color,
    Texture,
    Normal,
}

#[derive(Args, Debug)]
pub struct PatchArgs {
    #[command(flatten)]
    pub sample: SampleOpts,
    /// Grid size N (even; default 10).
    #[arg(long)]
    pub n: Option<usize>,
    /// Pixel pitch in meters (default 0.004).
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long, value_enum)]
    pub source: Option<Source>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VizArgs {
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Field PLY written by `txn field`; solved on the fly when absent.
    #[arg(long, conflicts_with = "labels")]
    pub field: Option<PathBuf>,
    /// One integer label per vertex, one per line.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[command(flatten)]
    pub solve: FieldOpts,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct MnistArgs {
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Directory with the four IDX files (default `$TXN_DATA_DIR`, then `data/mnist`).
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Train on only the first this many training images.
    #[arg(long)]
    pub train_limit: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    /// Write the trained weights here.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariantArg {
    Baseline,
    Rosy,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Args, Debug)]
pub struct ToyArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub train_scenes: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: Error,
}

impl Failure {
    fn usage(error: Error) -> Self {
        Failure {
            code: EXIT_USAGE,
            error,
        }
    }
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = match &error {
            Error::Numerical(_) | Error::AntiparallelNormals => EXIT_NUMERICAL,
            Error::Io(_) => EXIT_IO,
            _ => EXIT_USAGE,
        };
        Failure { code, error }
    }
}

fn write_failure(path: &Path, e: impl Into<Error>) -> Failure {
    let error = match e.into() {
        Error::Io(source) | Error::Open { source, .. } => Error::Open {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    };
    Failure { code: EXIT_IO, error }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Creates `path` and hands a buffered writer to `body`; any failure while
/// writing exits with the IO code.
fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> crate::Result<()>) -> CliResult<()> {
    let file = File::create(path).map_err(|e| write_failure(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(|e| write_failure(path, e))?;
    w.flush().map_err(|e| write_failure(path, e))
}

/// Settings after merging flags over the config file.
struct Resolved {
    cfg: RunConfig,
    threads: usize,
    seed: u64,
    scale: f64,
}

fn missing(what: &str) -> Failure {
    Failure::usage(Error::InvalidArgument(format!(
        "--{what} is required (flag or config file)"
    )))
}

fn mesh_path(flag: &Option<PathBuf>, r: &Resolved) -> CliResult<PathBuf> {
    flag.clone()
        .or_else(|| r.cfg.mesh.clone())
        .ok_or_else(|| missing("mesh"))
}

fn load_input(flag: &Option<PathBuf>, r: &Resolved) -> CliResult<TriMesh> {
    if !(r.scale > 0.0 && r.scale.is_finite()) {
        return Err(Failure::usage(Error::InvalidArgument(format!(
            "scale must be positive, got {}",
            r.scale
        ))));
    }
    let mesh = load_mesh(mesh_path(flag, r)?)?;
    if r.scale == 1.0 {
        return Ok(mesh);
    }
    Ok(mesh.scaled(r.scale)?)
}

fn solve_field(mesh: &TriMesh, opts: &FieldOpts, r: &Resolved) -> CliResult<RoSyField> {
    let solver = OrientationSolver {
        levels: opts.levels.or(r.cfg.levels),
        iterations_per_level: opts.iterations.or(r.cfg.iterations).unwrap_or(10),
        seed: r.seed,
        parallel: false,
    };
    let (field, report) = solver.solve(mesh)?;
    log::info!(
        "field energy {:.6} -> {:.6} over {} levels",
        report.initial_energy(),
        report.final_energy(),
        report.levels.len()
    );
    Ok(field)
}

fn sampling_method(opts: &SampleOpts, r: &Resolved) -> SamplingMethod {
    let name = match opts.method {
        Some(Method::Lattice) => "lattice",
        Some(Method::Poisson) => "poisson",
        Some(Method::Fps) => "fps",
        None => r.cfg.sampling.as_deref().unwrap_or("lattice"),
    };
    match name {
        "poisson" => SamplingMethod::PoissonDisk,
        "fps" => SamplingMethod::Fps { count: opts.count },
        _ => SamplingMethod::FieldLattice,
    }
}

fn load_and_sample(opts: &SampleOpts, r: &Resolved) -> CliResult<(TriMesh, Vec<SurfaceSample>)> {
    let mesh = load_input(&opts.mesh, r)?;
    let field = solve_field(&mesh, &opts.field, r)?;
    let spacing = opts.spacing.or(r.cfg.spacing).unwrap_or(0.05);
    let samples = sample_surface(&mesh, &field, spacing, sampling_method(opts, r), r.seed)?;
    log::info!("{} samples at spacing {spacing}", samples.len());
    Ok((mesh, samples))
}

fn run_field(a: &FieldArgs, r: &Resolved) -> CliResult<()> {
    let mesh = load_input(&a.mesh, r)?;
    let field = solve_field(&mesh, &a.field, r)?;
    write_file(&a.out, |w| export::write_field_ply(w, &mesh, &field))?;
    let csv = a.out.with_extension("csv");
    write_file(&csv, |w| export::write_singularities_csv(w, &field))?;
    println!(
        "{} vertices, {} singular faces, index sum {} (quarters); wrote {} and {}",
        mesh.num_vertices(),
        field.singularities().len(),
        field.index_sum(),
        a.out.display(),
        csv.display()
    );
    Ok(())
}

fn run_sample(a: &SampleArgs, r: &Resolved) -> CliResult<()> {
    let (_, samples) = load_and_sample(&a.sample, r)?;
    let positions: Vec<_> = samples.iter().map(|s| s.position).collect();
    let comp = |name, f: fn(&SurfaceSample) -> f64| ply::VertexProp::Float(name, samples.iter().map(f).collect());
    let extra = [
        comp("ix", |s| s.frame.i.x),
        comp("iy", |s| s.frame.i.y),
        comp("iz", |s| s.frame.i.z),
        comp("jx", |s| s.frame.j.x),
        comp("jy", |s| s.frame.j.y),
        comp("jz", |s| s.frame.j.z),
        comp("face", |s| s.face as f64),
    ];
    write_file(&a.out, |w| Ok(ply::write_ascii(w, &positions, &extra, &[], None)?))?;
    println!("{} samples; wrote {}", samples.len(), a.out.display());
    Ok(())
}

fn run_patches(a: &PatchArgs, r: &Resolved) -> CliResult<()> {
    let n = a.n.or(r.cfg.n).unwrap_or(10);
    let d = a.d.or(r.cfg.d).unwrap_or(0.004);
    crate::signal::validate_grid(n, d).map_err(Failure::usage)?;
    let source = match (a.source, r.cfg.source.as_deref()) {
        (Some(Source::Color), _) | (None, Some("color")) => SignalSource::VertexColor,
        (Some(Source::Texture), _) | (None, Some("texture")) => SignalSource::TextureAtlas,
        (Some(Source::Normal), _) | (None, Some("normal")) => SignalSource::Normal,
        (None, Some(other)) => {
            return Err(Failure::usage(Error::InvalidArgument(format!(
                "source '{other}' needs a value"
            ))));
        }
        (None, None) => SignalSource::Normal,
    };
    let (mesh, samples) = load_and_sample(&a.sample, r)?;
    let patches = batch_patches(&mesh, &samples, n, d, &source, r.threads)?;
    let ds = PatchDataset::from_patches(&samples, &patches, n, d, &source)?;
    write_file(&a.out, |w| ds.write_to(w))?;
    println!(
        "{} patches of {n}×{n}×{}; mask density {:.4}; wrote {}",
        ds.records.len(),
        ds.channels,
        ds.mask_density(),
        a.out.display()
    );
    Ok(())
}

fn run_viz(a: &VizArgs, r: &Resolved) -> CliResult<()> {
    let mesh = load_input(&a.mesh, r)?;
    if let Some(path) = &a.labels {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Failure::usage(Error::Open {
                path: path.clone(),
                source: e,
            })
        })?;
        let labels = export::parse_labels(&text)?;
        if labels.len() != mesh.num_vertices() {
            return Err(Failure::usage(Error::Dimension(format!(
                "{} labels for {} vertices",
                labels.len(),
                mesh.num_vertices()
            ))));
        }
        write_file(&a.out, |w| export::write_label_viz(w, &mesh, &labels))?;
    } else {
        let field = match &a.field {
            Some(path) => read_field(&mesh, path)?,
            None => solve_field(&mesh, &a.solve, r)?,
        };
        write_file(&a.out, |w| export::write_field_viz(w, &mesh, &field))?;
        println!("{} singular faces painted red", field.singularities().len());
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

/// Reads frames from a field PLY written by `txn field`.
fn read_field(mesh: &TriMesh, path: &Path) -> CliResult<RoSyField> {
    let data = ply::read(path)?;
    let prop = |name: &str| {
        data.prop(name).ok_or_else(|| {
            Failure::usage(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: format!("no vertex property '{name}'"),
            })
        })
    };
    let comps = ["ix", "iy", "iz", "jx", "jy", "jz"].map(prop);
    let mut cols = Vec::with_capacity(6);
    for c in comps {
        cols.push(c?);
    }
    if data.vertex_count() != mesh.num_vertices() {
        return Err(Failure::usage(Error::Dimension(format!(
            "field has {} vertices, mesh {}",
            data.vertex_count(),
            mesh.num_vertices()
        ))));
    }
    let frames = (0..mesh.num_vertices())
        .map(|v| {
            let i = crate::math::Vec3::new(cols[0][v], cols[1][v], cols[2][v]);
            crate::frame::TangentFrame::from_normal_direction(mesh.vertex_normal(v), i)
        })
        .collect();
    Ok(RoSyField::from_frames(mesh, frames)?)
}

fn run_mnist(a: &MnistArgs, r: &Resolved) -> CliResult<()> {
    let variant = match (a.variant, r.cfg.variant.as_deref()) {
        (Some(VariantArg::Baseline), _) | (None, Some("baseline")) => MnistVariant::Baseline,
        _ => MnistVariant::Rosy,
    };
    let dir = a
        .data_dir
        .clone()
        .or_else(|| r.cfg.data_dir.clone())
        .or_else(|| std::env::var_os("TXN_DATA_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data/mnist"));
    let optimizer = match (a.optimizer, r.cfg.optimizer.as_deref()) {
        (Some(OptimizerArg::Sgd), _) | (None, Some("sgd")) => OptimizerKind::Sgd,
        _ => OptimizerKind::Adam,
    };
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        optimizer,
        lr: a.lr.or(r.cfg.lr).unwrap_or(defaults.lr),
        batch: a.batch.or(r.cfg.batch).unwrap_or(defaults.batch),
        epochs: a.epochs.or(r.cfg.epochs).unwrap_or(defaults.epochs),
        seed: r.seed,
    };
    let data = MnistData::load(&dir)?;
    let (report, mut net) = mnist_experiment(&data, variant, &cfg, a.train_limit)?;
    for e in &report.log {
        println!("epoch {}: loss {:.5} train accuracy {:.4}", e.epoch, e.loss, e.accuracy);
    }
    println!("{variant:?} test accuracy {:.4}", report.test_accuracy);
    if let Some(path) = &a.checkpoint {
        let params: Vec<_> = net.params().into_iter().map(|p| &*p).collect();
        save_checkpoint(path, &params).map_err(|e| write_failure(path, e))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run_toy(a: &ToyArgs, r: &Resolved) -> CliResult<()> {
    let mut cfg = ToyConfig {
        threads: r.threads,
        seed: r.seed,
        ..ToyConfig::default()
    };
    if let Some(e) = a.epochs.or(r.cfg.epochs) {
        cfg.train.epochs = e;
    }
    if let Some(lr) = a.lr.or(r.cfg.lr) {
        cfg.train.lr = lr;
    }
    if let Some(s) = a.samples {
        cfg.samples = s;
    }
    if let Some(t) = a.train_scenes {
        cfg.train_scenes = t;
    }
    cfg.train.seed = r.seed;
    let (report, _) = segment_toy(&cfg)?;
    for e in &report.log {
        println!("epoch {}: loss {:.5} train accuracy {:.4}", e.epoch, e.loss, e.accuracy);
    }
    println!(
        "held-out point accuracy {:.4} (prepare {:.0} s, train {:.0} s)",
        report.test_accuracy, report.prepare_seconds, report.train_seconds
    );
    Ok(())
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let r = Resolved {
        threads: cli.threads.or(cfg.threads).unwrap_or(1).max(1),
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        scale: cli.scale.or(cfg.scale).unwrap_or(1.0),
        cfg,
    };
    match &cli.command {
        Command::Field(a) => run_field(a, &r),
        Command::Sample(a) => run_sample(a, &r),
        Command::Patches(a) => run_patches(a, &r),
        Command::Viz(a) => run_viz(a, &r),
        Command::Mnist(a) => run_mnist(a, &r),
        Command::SegmentToy(a) => run_toy(a, &r),
    }
}

/// Entry point of the binary: parses `std::env::args`, runs, and maps
/// failures to exit codes.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("txn: {}", f.error);
            ExitCode::from(f.code)
        }
    }
}
