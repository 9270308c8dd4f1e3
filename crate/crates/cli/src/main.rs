use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use funcmark::bench::{run_bench, BenchScenario};
use funcmark::embed::{bake_watermarked, NewtonConfig, WatermarkedField};
use funcmark::field::{bake_grid, Bbox, Primitive, ScalarField};
use funcmark::io::{self, LayoutSecret};
use funcmark::partition::PartitionLayout;
use funcmark::surface::{extract, sample_surface, Isosurfacer};
use funcmark::verify::{align, detect, AlignConfig, Verdict, DEFAULT_ALPHA};
use funcmark::{message, metrics, Error, Vec3, VERSION};

#[derive(Parser, Debug, Serialize)]
#[command(name = "funcmark", version, about = "Watermark signed distance fields and verify extracted meshes")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Serialize)]
struct Global {
    /// Seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// off, error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Watermark a field and bake the result to a grid.
    Embed(EmbedArgs),
    /// Bake an analytic primitive to a grid.
    Bake(BakeArgs),
    /// Extract a mesh from a grid.
    Extract(ExtractArgs),
    /// Sample points on the zero set of a grid.
    Sample(SampleArgs),
    /// Decode the message from a suspect mesh or point set.
    Decode(VerifyArgs),
    /// Test a suspect mesh or point set for the watermark.
    Detect(DetectArgs),
    /// Undo a similarity transform using the watermarked field.
    Align(AlignArgs),
    /// Apply a distortion to a mesh.
    Attack(AttackArgs),
    /// Geometric differences between two meshes.
    Metrics(MetricsArgs),
    /// Run an evaluation scenario.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Serialize)]
struct FieldSource {
    /// Original field as an FMGD grid.
    #[arg(long, conflicts_with = "primitive")]
    field: Option<PathBuf>,
    /// Original field as a primitive spec, e.g. `sphere`, `sphere:0.5`, `torus:0.5:0.2`.
    #[arg(long)]
    primitive: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct EmbedArgs {
    #[command(flatten)]
    source: FieldSource,
    /// Hex message, or `b:` followed by bits.
    #[arg(long)]
    message: String,
    #[arg(long, default_value_t = 32)]
    ns: usize,
    #[arg(long, default_value_t = 0.001)]
    delta: f64,
    #[arg(long, default_value_t = 128)]
    bake_dims: usize,
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    #[arg(long, default_value_t = 100)]
    batch_size: usize,
    #[arg(long)]
    out: PathBuf,
    /// Layout secret; defaults to `<out>.layout.json`.
    #[arg(long)]
    layout: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct BakeArgs {
    #[arg(long)]
    primitive: String,
    #[arg(long, default_value_t = 128)]
    dims: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct ExtractArgs {
    #[arg(long)]
    field: PathBuf,
    #[arg(long, default_value_t = 256)]
    res: usize,
    /// `mc` or `dc`.
    #[arg(long, default_value = "mc")]
    iso: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SampleArgs {
    #[arg(long)]
    field: PathBuf,
    #[arg(short = 'n', long, default_value_t = 30000)]
    n: usize,
    #[arg(long, default_value_t = funcmark::surface::DEFAULT_SAMPLE_TOLERANCE)]
    tolerance: f64,
    /// Binary PLY point set.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    /// Original (unwatermarked) field grid. Optional when the layout records a primitive.
    #[arg(long, conflicts_with = "primitive")]
    original: Option<PathBuf>,
    #[arg(long)]
    primitive: Option<String>,
    #[arg(long)]
    layout: PathBuf,
    /// Suspect mesh (OBJ).
    #[arg(long, required_unless_present = "points", conflicts_with = "points")]
    mesh: Option<PathBuf>,
    /// Suspect point set (PLY).
    #[arg(long)]
    points: Option<PathBuf>,
    /// Report JSON; printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct DetectArgs {
    #[command(flatten)]
    verify: VerifyArgs,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
}

#[derive(Args, Debug, Serialize)]
struct AlignArgs {
    /// Watermarked field grid.
    #[arg(long)]
    wm: PathBuf,
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = AlignConfig::default().max_residual)]
    max_residual: f64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct AttackArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// `name:arg1[:arg2]`, e.g. `gaussian:0.005`, `rotate:90:0,0,1`, `simplify:0.3`,
    /// `smooth:3:0.5`, `remesh[:target[:iterations]]`, `combined:<spec>;<spec>`.
    #[arg(long)]
    spec: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct MetricsArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = metrics::DEFAULT_METRIC_SAMPLES)]
    samples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct BenchArgs {
    /// Scenario JSON; missing keys take their defaults.
    #[arg(long, conflicts_with = "quick")]
    scenario: Option<PathBuf>,
    /// Small smoke-test scenario.
    #[arg(long)]
    quick: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Exit statuses.
const EXIT_INVALID: u8 = 2;
const EXIT_H0: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

enum Outcome {
    Done,
    NotDetected,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.global.log_level)
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    }
    match run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotDetected) => ExitCode::from(EXIT_H0),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_INVALID })
        }
    }
}

/// Report JSON with the version and full invocation attached.
fn with_provenance(cli: &Cli, body: impl Serialize) -> funcmark::Result<Value> {
    let mut v = serde_json::to_value(body)?;
    let config = serde_json::to_value(cli)?;
    match v.as_object_mut() {
        Some(obj) => {
            obj.insert("version".into(), json!(VERSION));
            obj.insert("config".into(), config);
        }
        None => v = json!({ "version": VERSION, "config": config, "result": v }),
    }
    Ok(v)
}

fn emit(value: &Value, path: Option<&Path>) -> funcmark::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: &Cli) -> funcmark::Result<Outcome> {
    let seed = cli.global.seed;
    match &cli.command {
        Command::Bake(a) => {
            let prim: Primitive = a.primitive.parse()?;
            let grid = bake_grid(&prim, [a.dims; 3], Bbox::standard())?;
            io::write_grid(&a.out, &grid)?;
        }
        Command::Embed(a) => embed(a, seed, cli)?,
        Command::Extract(a) => {
            let grid = io::read_grid(&a.field)?;
            let iso: Isosurfacer = a.iso.parse()?;
            let mesh = extract(iso, &grid, a.res, grid.bbox())?;
            log::info!("{} vertices, {} faces", mesh.vertices.len(), mesh.faces.len());
            io::write_obj(&a.out, &mesh)?;
        }
        Command::Sample(a) => {
            let grid = io::read_grid(&a.field)?;
            let set = sample_surface(&grid, a.n, seed, a.tolerance)?;
            log::info!("{} points from {} candidates", set.len(), set.attempts);
            io::write_ply_points(&a.out, &set.points)?;
        }
        Command::Decode(a) => {
            let report = verify(a, DEFAULT_ALPHA)?;
            if report.bit_accuracy.is_none() {
                return Err(Error::UndecodableMessage);
            }
            emit(&with_provenance(cli, &report)?, a.report.as_deref())?;
        }
        Command::Detect(a) => {
            let report = verify(&a.verify, a.alpha)?;
            emit(&with_provenance(cli, &report)?, a.verify.report.as_deref())?;
            if report.verdict == Verdict::Accept {
                return Ok(Outcome::NotDetected);
            }
        }
        Command::Align(a) => {
            let grid = io::read_grid(&a.wm)?;
            let mesh = io::read_obj(&a.mesh)?;
            let cfg = AlignConfig {
                max_residual: a.max_residual,
                seed,
                bbox: *grid.bbox(),
                ..AlignConfig::default()
            };
            let al = align(&mesh, &grid, &cfg)?;
            io::write_obj(&a.out, &al.mesh)?;
            if let Some(p) = &a.report {
                let body = json!({ "transform": al.transform, "residual": al.residual });
                emit(&with_provenance(cli, body)?, Some(p))?;
            }
        }
        Command::Attack(a) => {
            let spec: funcmark::attack::AttackSpec = a.spec.parse()?;
            let mesh = io::read_obj(&a.mesh)?;
            io::write_obj(&a.out, &spec.apply(&mesh, seed)?)?;
        }
        Command::Metrics(a) => {
            let (ma, mb) = (io::read_obj(&a.a)?, io::read_obj(&a.b)?);
            let cmp = metrics::compare(&ma, &mb, a.samples, seed)?;
            emit(&with_provenance(cli, cmp)?, a.out.as_deref())?;
        }
        Command::Bench(a) => {
            let mut sc = match (&a.scenario, a.quick) {
                (Some(p), _) => BenchScenario::from_json(&std::fs::read_to_string(p)?)?,
                (None, true) => BenchScenario::quick(),
                (None, false) => BenchScenario::default(),
            };
            if a.scenario.is_none() {
                sc.seed = seed;
            }
            run_bench(&sc)?.write(&a.out_dir)?;
        }
    }
    Ok(Outcome::Done)
}

fn embed(a: &EmbedArgs, seed: u64, cli: &Cli) -> funcmark::Result<()> {
    let layout = PartitionLayout::new(a.ns, message::parse(&a.message)?, a.delta)?;
    let newton = NewtonConfig {
        tolerance: a.tolerance,
        batch_size: a.batch_size,
        seed,
        ..NewtonConfig::default()
    };
    let dims = [a.bake_dims; 3];
    let (mut secret, grid, report) = match (&a.source.field, &a.source.primitive) {
        (Some(path), None) => {
            let bytes = std::fs::read(path)?;
            let base = io::read_grid_bytes(&bytes)?;
            let bbox = *base.bbox();
            let wf = WatermarkedField::new(base, layout.clone(), newton)?;
            let (grid, report) = bake_watermarked(&wf, dims, bbox)?;
            (LayoutSecret::new(&layout, seed, io::fingerprint_bytes(&bytes)), grid, report)
        }
        (None, Some(spec)) => {
            let base: Primitive = spec.parse()?;
            let wf = WatermarkedField::new(base, layout.clone(), newton)?;
            let (grid, report) = bake_watermarked(&wf, dims, Bbox::standard())?;
            let mut s = LayoutSecret::new(&layout, seed, io::fingerprint_bytes(spec.as_bytes()));
            s.primitive = Some(spec.clone());
            (s, grid, report)
        }
        _ => return Err(Error::InvalidArgument("give exactly one of --field or --primitive".into())),
    };
    secret.seed = seed;
    if report.failures > 0 {
        log::warn!("{} of {} nodes fell back to the original field", report.failures, report.nodes);
    }
    io::write_grid(&a.out, &grid)?;
    let layout_path = a.layout.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".layout.json");
        PathBuf::from(p)
    });
    secret.save(&layout_path)?;
    if let Some(p) = &a.report {
        emit(&with_provenance(cli, &report)?, Some(p))?;
    }
    Ok(())
}

/// Loads the original field, checking it against the secret's fingerprint.
fn original_field(a: &VerifyArgs, secret: &LayoutSecret) -> funcmark::Result<Box<dyn ScalarField>> {
    if let Some(path) = &a.original {
        let bytes = std::fs::read(path)?;
        secret.check_fingerprint(&bytes)?;
        return Ok(Box::new(io::read_grid_bytes(&bytes)?));
    }
    let spec = a
        .primitive
        .as_ref()
        .or(secret.primitive.as_ref())
        .ok_or_else(|| Error::InvalidArgument("no original field: pass --original or --primitive".into()))?;
    secret.check_fingerprint(spec.as_bytes())?;
    Ok(Box::new(spec.parse::<Primitive>()?))
}

fn suspect_points(a: &VerifyArgs) -> funcmark::Result<Vec<Vec3>> {
    match (&a.mesh, &a.points) {
        (Some(m), _) => Ok(io::read_obj(m)?.vertices),
        (None, Some(p)) => io::read_ply_points(p),
        (None, None) => Err(Error::InvalidArgument("pass --mesh or --points".into())),
    }
}

fn verify(a: &VerifyArgs, alpha: f64) -> funcmark::Result<funcmark::verify::DetectionReport> {
    let secret = LayoutSecret::load(&a.layout)?;
    let layout = secret.layout()?;
    let field = original_field(a, &secret)?;
    let points = suspect_points(a)?;
    let report = detect(&points, &field, &layout, alpha)?;
    log::info!(
        "{} points, {} matches, z = {:.3} ({:?})",
        report.n_points,
        report.matches,
        report.z_score,
        report.verdict
    );
    Ok(report)
}
