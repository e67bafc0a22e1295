use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ellipsoid_core::geometry::{anchor_world, sphere_anchor};
use ellipsoid_core::io::augment::{augment, AugmentConfig, RotationMode};
use ellipsoid_core::io::dataset::{format_report, run_sweep, worker_pool, DatasetManifest, LabeledObject, Sweep};
use ellipsoid_core::io::efm::{read_efm, write_efm};
use ellipsoid_core::io::pixels::parse_pixel_labels;
use ellipsoid_core::io::xyz::load_xyz;
use ellipsoid_core::io::{read_to_string, write_atomic};
use ellipsoid_core::metrics::backproject_labels;
use ellipsoid_core::representation::{usage_mask, FrameFit};
use ellipsoid_core::synthetic::synthetic_suite;
use ellipsoid_core::{represent_hierarchical, AnchorMode, ChannelLayout, ReprConfig, Vec3};

#[derive(Parser)]
#[command(name = "ellipsoid", version, about = "Hierarchical ellipsoid feature maps for point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the representation of one cloud and write it as EFM.
    Repr(ReprArgs),
    /// Point usage rate and max segmentation IoU over a dataset, as TSV.
    Metrics(MetricsArgs),
    /// Trace per-pixel labels or scores back to the cloud's points.
    Backproject(BackprojectArgs),
    /// Time the representation of one cloud.
    Bench(BenchArgs),
    /// Per-pixel anchors and mapped points as TSV, for plotting.
    Plotdata(PlotdataArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Channels {
    Local,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum Anchor {
    Centered,
    Paper,
}

impl Anchor {
    fn mode(self) -> AnchorMode {
        match self {
            Anchor::Centered => AnchorMode::Centered,
            Anchor::Paper => AnchorMode::Paper,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Rotation {
    None,
    UpAxis,
    So3,
}

#[derive(Args, Clone)]
struct ReprOptions {
    #[arg(long, default_value_t = 2)]
    levels: usize,
    /// Children per node at every split.
    #[arg(long, default_value_t = 36)]
    partitions: usize,
    /// Feature map side length M.
    #[arg(long, default_value_t = 32)]
    resolution: usize,
    #[arg(long, value_enum, default_value = "local")]
    channels: Channels,
    #[arg(long, value_enum, default_value = "centered")]
    anchor: Anchor,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Single-level circumsphere instead of fitted ellipsoids.
    #[arg(long)]
    spherical_baseline: bool,
    /// Skip the root map when there are deeper levels.
    #[arg(long)]
    no_root_map: bool,
}

impl ReprOptions {
    fn config(&self) -> ReprConfig {
        let mut c = ReprConfig {
            levels: self.levels,
            partitions: self.partitions,
            resolution: self.resolution,
            layout: match self.channels {
                Channels::Local => ChannelLayout::LOCAL,
                Channels::Full => ChannelLayout::FULL,
            },
            anchor_mode: self.anchor.mode(),
            seed: self.seed,
            root_map: !self.no_root_map,
            ..ReprConfig::default()
        };
        if self.spherical_baseline {
            c.levels = 1;
            c.frame_fit = FrameFit::Circumsphere;
        }
        c
    }
}

#[derive(Args)]
struct AugmentOptions {
    /// Rotate and jitter the cloud before building the representation.
    #[arg(long)]
    augment: bool,
    #[arg(long, default_value_t = 0)]
    augment_seed: u64,
    #[arg(long, value_enum, default_value = "up-axis")]
    rotation: Rotation,
    #[arg(long, default_value_t = 0.01)]
    jitter_sigma: f64,
    #[arg(long, default_value_t = 0.05)]
    jitter_clip: f64,
}

#[derive(Args)]
struct ReprArgs {
    /// Text cloud, `x y z [label]` per line.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    repr: ReprOptions,
    #[command(flatten)]
    aug: AugmentOptions,
}

#[derive(Args)]
struct MetricsArgs {
    /// JSON dataset manifest.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    manifest: Option<PathBuf>,
    /// Use this many generated part-labeled objects instead of a manifest.
    #[arg(long)]
    synthetic: Option<usize>,
    #[arg(long, default_value_t = 2048)]
    synthetic_points: usize,
    #[arg(long, default_value_t = 0)]
    synthetic_seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    levels: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "36")]
    partitions: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "16")]
    resolutions: Vec<usize>,
    #[arg(long, value_enum, default_value = "centered")]
    anchor: Anchor,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Add single-level circumsphere rows at each resolution.
    #[arg(long)]
    spherical_baseline: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BackprojectArgs {
    #[arg(long)]
    efm: PathBuf,
    /// The cloud the EFM file was built from.
    #[arg(long)]
    input: PathBuf,
    /// One line per mapped node, M·M values in v-major order.
    #[arg(long)]
    pixel_labels: PathBuf,
    /// Read K scores per pixel instead of one hard label.
    #[arg(long, value_name = "K")]
    scores: Option<usize>,
    /// One label per line.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 10)]
    repeat: usize,
    /// Build nodes one after another on the calling thread.
    #[arg(long)]
    sequential: bool,
    #[command(flatten)]
    repr: ReprOptions,
}

#[derive(Args)]
struct PlotdataArgs {
    #[arg(long)]
    efm: PathBuf,
    /// Source cloud; without it, point positions come from the map channels.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Pixel table destination (default stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write `point\tused` rows for every point.
    #[arg(long)]
    usage_output: Option<PathBuf>,
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => Ok(write_atomic(p, text.as_bytes())?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn repr(a: &ReprArgs) -> Result<()> {
    let mut cloud = load_xyz(&a.input)?;
    if a.aug.augment {
        let cfg = AugmentConfig {
            seed: a.aug.augment_seed,
            rotation: match a.aug.rotation {
                Rotation::None => RotationMode::None,
                Rotation::UpAxis => RotationMode::UpAxis,
                Rotation::So3 => RotationMode::So3,
            },
            jitter_sigma: a.aug.jitter_sigma,
            jitter_clip: a.aug.jitter_clip,
        };
        cloud = augment(&cloud, &cfg)?;
    }
    let rep = represent_hierarchical(&cloud.points, &a.repr.config())?;
    write_efm(&rep, &a.output)?;
    eprintln!(
        "{}",
        serde_json::json!({
            "points": rep.n_points,
            "nodes": rep.nodes.len(),
            "output": a.output.display().to_string(),
        })
    );
    Ok(())
}

fn metrics(a: &MetricsArgs) -> Result<()> {
    let objects: Vec<LabeledObject> = match (&a.manifest, a.synthetic) {
        (Some(path), _) => DatasetManifest::load(path)?.load_all()?,
        (None, Some(n)) => synthetic_suite(n, a.synthetic_points, a.synthetic_seed)
            .into_iter()
            .map(Into::into)
            .collect(),
        (None, None) => bail!("either --manifest or --synthetic is required"),
    };
    let base = ReprConfig {
        anchor_mode: a.anchor.mode(),
        seed: a.seed,
        ..ReprConfig::default()
    };
    let sweep = Sweep {
        base,
        levels: a.levels.clone(),
        partitions: a.partitions.clone(),
        resolutions: a.resolutions.clone(),
        spherical_baseline: a.spherical_baseline,
    };
    let rows = run_sweep(&objects, &sweep)?;
    emit(a.output.as_deref(), &format_report(&rows))
}

fn backproject(a: &BackprojectArgs) -> Result<()> {
    let rep = read_efm(&a.efm)?;
    let cloud = load_xyz(&a.input)?;
    let text = read_to_string(&a.pixel_labels)?;
    let pix = parse_pixel_labels(&text, &a.pixel_labels, a.scores)?;
    let result = backproject_labels(&rep, &pix, &cloud.points)?;
    let mut out = String::new();
    for l in &result.labels {
        writeln!(out, "{l}")?;
    }
    emit(Some(&a.output), &out)
}

fn bench(a: &BenchArgs) -> Result<()> {
    if a.repeat == 0 {
        bail!("--repeat must be at least 1");
    }
    let cloud = load_xyz(&a.input)?;
    let config = ReprConfig {
        parallel: !a.sequential,
        ..a.repr.config()
    };
    // One untimed run warms caches and surfaces configuration errors.
    represent_hierarchical(&cloud.points, &config)?;
    let mut ms = Vec::with_capacity(a.repeat);
    for _ in 0..a.repeat {
        let start = Instant::now();
        let rep = represent_hierarchical(&cloud.points, &config)?;
        ms.push(start.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(rep);
    }
    let mean = ms.iter().sum::<f64>() / ms.len() as f64;
    let var = ms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / ms.len() as f64;
    println!("points\trepeat\tthreads\tmean_ms\tstd_ms");
    println!(
        "{}\t{}\t{}\t{mean:.3}\t{:.3}",
        cloud.len(),
        a.repeat,
        if a.sequential { 1 } else { rayon::current_num_threads() },
        var.sqrt()
    );
    Ok(())
}

fn plotdata(a: &PlotdataArgs) -> Result<()> {
    let rep = read_efm(&a.efm)?;
    let cloud = match &a.input {
        Some(p) => {
            let c = load_xyz(p)?;
            if c.len() != rep.n_points {
                bail!("{} has {} points, the EFM file expects {}", p.display(), c.len(), rep.n_points);
            }
            Some(c)
        }
        None => None,
    };
    let off = rep.layout.offsets();
    if cloud.is_none() && off.world_position.is_none() && off.local_position.is_none() {
        bail!("maps carry no position channel; pass --input");
    }
    let mut out = String::from("node\tlevel\tu\tv\tanchor_x\tanchor_y\tanchor_z\tpoint\tpoint_x\tpoint_y\tpoint_z\n");
    for (pos, node) in rep.nodes.iter().enumerate() {
        let Some(map) = &node.map else { continue };
        let frame = node.frame();
        for v in 0..map.m {
            for u in 0..map.m {
                let a = anchor_world(&frame, sphere_anchor(u, v, map.m, rep.anchor_mode)?);
                let idx = map.point_at(u, v);
                let px = map.pixel(u, v);
                let p = match (&cloud, off.world_position, off.local_position) {
                    (Some(c), _, _) => c.points[idx as usize],
                    (None, Some(w), _) => Vec3::new(px[w], px[w + 1], px[w + 2]),
                    (None, None, Some(l)) => anchor_world(&frame, Vec3::new(px[l], px[l + 1], px[l + 2])),
                    (None, None, None) => unreachable!("checked above"),
                };
                writeln!(
                    out,
                    "{pos}\t{}\t{u}\t{v}\t{:?}\t{:?}\t{:?}\t{idx}\t{:?}\t{:?}\t{:?}",
                    node.level, a.x, a.y, a.z, p.x, p.y, p.z
                )?;
            }
        }
    }
    emit(a.output.as_deref(), &out)?;
    if let Some(path) = &a.usage_output {
        let mut usage = String::from("point\tused\n");
        for (i, used) in usage_mask(&rep).into_iter().enumerate() {
            writeln!(usage, "{i}\t{}", used as u8)?;
        }
        emit(Some(path), &usage)?;
    }
    Ok(())
}

fn error_line(e: &anyhow::Error) -> serde_json::Value {
    let mut v = serde_json::json!({ "error": format!("{e:#}") });
    if let Some(core) = e.downcast_ref::<ellipsoid_core::Error>() {
        v["kind"] = core.kind().into();
        match core {
            ellipsoid_core::Error::Format { offset, .. } => v["offset"] = (*offset).into(),
            ellipsoid_core::Error::Parse { path, line, .. } => {
                v["path"] = path.display().to_string().into();
                v["line"] = (*line).into();
            }
            _ => {}
        }
    }
    v
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = worker_pool()
        .context("building the worker pool")
        .and_then(|pool| {
            pool.install(|| match &cli.command {
                Command::Repr(a) => repr(a),
                Command::Metrics(a) => metrics(a),
                Command::Backproject(a) => backproject(a),
                Command::Bench(a) => bench(a),
                Command::Plotdata(a) => plotdata(a),
            })
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}
