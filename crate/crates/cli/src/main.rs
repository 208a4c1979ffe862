//! Command line front end: classification, root solving, cone building,
//! conic tracing, normal perturbation and OBJ export.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use coneflank::classify::{FieldTest, GridSpec};
use coneflank::contact::{solve_hyperosculating_with, SolveConfig};
use coneflank::isomap::{Orientation, SurfaceSample};
use coneflank::jets::JetSource;
use coneflank::pipeline::analysis::prepare_jets;
use coneflank::pipeline::{
    import_obj, perturb_normals, run_analysis, run_stability, surface_grid, trace_to_design, AnalysisConfig,
    ObjWriter, Report, PerturbSpec, StabilityConfig, SurfaceSource, FRUSTUM_SEGMENTS,
};
use coneflank::reconstruct::{integrate_isotropic_circle, CircleTraceOptions};

#[derive(Parser)]
#[command(name = "coneflank", version, about = "Cone envelope analysis of surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run pointwise classification tests over a grid.
    Classify(ClassifyArgs),
    /// Hyperosculating directions at one point.
    Solve(SolveArgs),
    /// Build cones at points or grid nodes.
    Cones(ConesArgs),
    /// Follow the conic of a hyperosculating root.
    Trace(TraceArgs),
    /// Tilt sample normals, or run the noise stability experiment.
    Perturb(PerturbArgs),
    /// Write the surface as an OBJ quad grid.
    Export(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TestName {
    Developable,
    Ruled,
    Cone,
    Cylinder,
    Channel,
    Pipe,
}

impl From<TestName> for FieldTest {
    fn from(t: TestName) -> Self {
        match t {
            TestName::Developable => FieldTest::Developable,
            TestName::Ruled => FieldTest::Ruled,
            TestName::Cone => FieldTest::Cone,
            TestName::Cylinder => FieldTest::Cylinder,
            TestName::Channel => FieldTest::Channel,
            TestName::Pipe => FieldTest::Pipe,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    Inward,
    Outward,
}

impl From<Side> for Orientation {
    fn from(s: Side) -> Self {
        match s {
            Side::Inward => Orientation::Inward,
            Side::Outward => Orientation::Outward,
        }
    }
}

#[derive(Args, Clone)]
struct Common {
    /// JSON surface file, OBJ mesh with normals, or an isotropic expression in x and y.
    #[arg(long)]
    surface: String,
    /// Cone opening angle in degrees.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    /// Tool orientation relative to the surface normal.
    #[arg(long, value_enum, default_value = "inward")]
    orientation: Side,
    #[arg(long, default_value = "json", value_enum)]
    format: Format,
    /// Seed for normal perturbation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tilt sampled normals by this magnitude before analysis.
    #[arg(long)]
    noise: Option<f64>,
    /// Rotate sampled surfaces so their mean normal is +z.
    #[arg(long)]
    align: bool,
    /// Neighbours used per scattered jet fit.
    #[arg(long)]
    neighbours: Option<usize>,
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Grid size, e.g. 21x21.
    #[arg(long, default_value = "11x11", value_parser = parse_grid)]
    grid: (usize, usize),
    /// Isotropic domain x0,x1,y0,y1.
    #[arg(long, default_value = "-1,1,-1,1", value_parser = parse_domain, allow_hyphen_values = true)]
    domain: [f64; 4],
}

impl GridArgs {
    fn spec(&self) -> GridSpec {
        let [x0, x1, y0, y1] = self.domain;
        GridSpec::Rect { x: [x0, x1], y: [y0, y1], nx: self.grid.0, ny: self.grid.1 }
    }
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    grid: GridArgs,
    /// Tests to run; comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "cone")]
    test: Vec<TestName>,
    #[arg(long)]
    tol: Option<f64>,
    /// Also run the millability check.
    #[arg(long)]
    millability: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Isotropic point x,y.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    at: [f64; 2],
    /// Relative residual gate for accepted roots.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct ConesArgs {
    #[command(flatten)]
    common: Common,
    /// Points x,y; repeatable. Without any, every grid node is used.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    at: Vec<[f64; 2]>,
    #[command(flatten)]
    grid: GridArgs,
    /// Admissible vertex-to-contact distances rmin,rmax.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    bounds: Option<[f64; 2]>,
    /// Write the cones as frusta to this OBJ file.
    #[arg(long)]
    obj: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    common: Common,
    /// Seed point x,y.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    at: [f64; 2],
    /// Which root to follow, in order of increasing third-order residual.
    #[arg(long, default_value_t = 0)]
    root: usize,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    #[arg(long, default_value_t = 1.0)]
    length: f64,
    /// Keep going through multiple roots instead of stopping.
    #[arg(long)]
    through_multiple: bool,
    /// Write the trace as an OBJ polyline.
    #[arg(long)]
    obj: Option<PathBuf>,
}

#[derive(Args)]
struct PerturbArgs {
    /// Sampled surface to perturb; omit with --experiment.
    #[arg(long)]
    surface: Option<String>,
    /// Noise magnitudes; comma separated. One value when perturbing a surface.
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    noise: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run the generator stability experiment instead.
    #[arg(long)]
    experiment: bool,
    /// Isotropic expression for the experiment.
    #[arg(long)]
    expr: Option<String>,
    #[arg(long)]
    theta: Option<f64>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    surface: String,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    obj: PathBuf,
}

fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma separated numbers, got `{s}`"));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| format!("bad number `{p}`"))?;
    }
    Ok(out)
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    parse_floats::<2>(s)
}

fn parse_domain(s: &str) -> Result<[f64; 4], String> {
    parse_floats::<4>(s)
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected NxM, got `{s}`"))?;
    let n = a.trim().parse().map_err(|_| format!("bad grid size `{a}`"))?;
    let m = b.trim().parse().map_err(|_| format!("bad grid size `{b}`"))?;
    if n == 0 || m == 0 {
        return Err("grid sizes must be positive".into());
    }
    Ok((n, m))
}

/// A path to a JSON source or OBJ mesh, otherwise an isotropic expression.
fn load_surface(arg: &str) -> Result<SurfaceSource> {
    let path = Path::new(arg);
    if !path.is_file() {
        return Ok(SurfaceSource::isotropic(arg));
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
    let is_obj = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj"));
    if is_obj {
        let samples = import_obj(&text)?;
        if samples.is_empty() {
            bail!("{arg}: no vertices with normals");
        }
        Ok(SurfaceSource::cloud(&samples))
    } else {
        serde_json::from_str(&text).with_context(|| format!("parsing surface JSON in {arg}"))
    }
}

fn base_config(common: &Common, grid: GridSpec) -> Result<AnalysisConfig> {
    let mut cfg = AnalysisConfig::new(load_surface(&common.surface)?, grid);
    cfg.theta_deg = common.theta;
    cfg.radius = common.radius;
    cfg.orientation = common.orientation.into();
    cfg.align = common.align;
    if let Some(r) = common.noise {
        cfg.perturb = Some(PerturbSpec { r, seed: common.seed });
    }
    if let Some(k) = common.neighbours {
        cfg.fit.k = k;
    }
    Ok(cfg)
}

fn write_obj(path: &Path, body: String) -> Result<()> {
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

/// Writes to stdout; a reader that closed the pipe early is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    emit(&(serde_json::to_string_pretty(value)? + "\n"))
}

fn print_report(report: &Report, format: Format) -> Result<()> {
    match format {
        Format::Json => emit(&(report.to_json() + "\n")),
        Format::Csv => emit(&report.to_csv()?),
    }
}

fn classify(a: ClassifyArgs) -> Result<u8> {
    let mut cfg = base_config(&a.common, a.grid.spec())?;
    cfg.tests = a.test.iter().map(|&t| t.into()).collect();
    if let Some(t) = a.tol {
        cfg.tolerance = t;
    }
    cfg.millability = a.millability;
    let report = run_analysis(&cfg)?;
    print_report(&report, a.common.format)?;
    eprintln!("{}", report.summary.label());
    Ok(report.exit_code() as u8)
}

fn need_theta(theta: Option<f64>) -> Result<f64> {
    theta
        .map(f64::to_radians)
        .ok_or_else(|| anyhow!("--theta is required"))
}

fn solve(a: SolveArgs) -> Result<u8> {
    let theta = need_theta(a.common.theta)?;
    let [x, y] = a.at;
    let cfg = base_config(&a.common, GridSpec::Rect { x: [x, x], y: [y, y], nx: 1, ny: 1 })?;
    let mut notes = Vec::new();
    let (jets, _) = prepare_jets(&cfg, &mut notes)?;
    let j = jets.jet_at(x, y).map_err(|e| anyhow!("jet at ({x}, {y}): {e}"))?;
    let mut solve = SolveConfig::default();
    if let Some(t) = a.tol {
        solve.root_tol = t;
    }
    let rep = solve_hyperosculating_with(x, y, &j, theta, &solve);
    match a.common.format {
        Format::Json => print_json(&rep)?,
        Format::Csv => {
            let mut text = String::from("u,v,c1,c2,c3,jacobian,multiple,at_infinity\n");
            for r in rep.roots.iter().chain(&rep.family) {
                text += &format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.u, r.v, r.c1, r.c2, r.c3, r.jacobian, r.multiple, r.at_infinity
                );
            }
            emit(&text)?
        }
    }
    Ok(0)
}

fn cones(a: ConesArgs) -> Result<u8> {
    let mut cfg = base_config(&a.common, a.grid.spec())?;
    if cfg.theta_deg.is_none() {
        bail!("--theta is required");
    }
    cfg.cone_points = a.at.clone();
    cfg.cones_on_grid = a.at.is_empty();
    cfg.bounds = a.bounds;
    let report = run_analysis(&cfg)?;
    if let Some(path) = &a.obj {
        let mut w = ObjWriter::new();
        for (i, b) in report.cones.iter().enumerate() {
            for (k, c) in b.cones.iter().enumerate() {
                w.object(&format!("cone_{i}_{k}"));
                w.add_frustum(c, [0.8, 1.2], FRUSTUM_SEGMENTS);
            }
        }
        write_obj(path, w.finish())?;
    }
    print_report(&report, a.common.format)?;
    Ok(report.exit_code() as u8)
}

fn trace(a: TraceArgs) -> Result<u8> {
    let theta = need_theta(a.common.theta)?;
    let [x, y] = a.at;
    let cfg = base_config(&a.common, GridSpec::Rect { x: [x, x], y: [y, y], nx: 1, ny: 1 })?;
    let mut notes = Vec::new();
    let (jets, _) = prepare_jets(&cfg, &mut notes)?;
    let j = jets.jet_at(x, y).map_err(|e| anyhow!("jet at ({x}, {y}): {e}"))?;
    let rep = solve_hyperosculating_with(x, y, &j, theta, &SolveConfig::default());
    let root = rep
        .candidates()
        .nth(a.root)
        .ok_or_else(|| anyhow!("no root {} at ({x}, {y}); {} available", a.root, rep.candidates().count()))?;
    let mut opts = CircleTraceOptions::new(a.step, a.length);
    opts.stop_on_multiple = !a.through_multiple;
    let tr = integrate_isotropic_circle(&jets, (x, y), (root.u, root.v), theta, &opts)?;
    if let Some(path) = &a.obj {
        let mut w = ObjWriter::new();
        w.object("trace");
        w.add_polyline(&trace_to_design(&tr, &jets)?);
        write_obj(path, w.finish())?;
    }
    match a.common.format {
        Format::Json => print_json(&tr)?,
        Format::Csv => {
            let mut text = String::from("x,y,f\n");
            for (p, f) in tr.points.iter().zip(&tr.f_values) {
                text += &format!("{},{},{}\n", p[0], p[1], f);
            }
            emit(&text)?
        }
    }
    Ok(0)
}

fn perturb(a: PerturbArgs) -> Result<u8> {
    if a.experiment {
        let mut cfg = StabilityConfig { noise: a.noise.clone(), seed: a.seed, ..StabilityConfig::default() };
        if let Some(f) = a.expr {
            cfg.f = f;
        }
        if let Some(t) = a.theta {
            cfg.theta_deg = t;
        }
        print_json(&run_stability(&cfg)?)?;
        return Ok(0);
    }
    let arg = a.surface.ok_or_else(|| anyhow!("--surface is required unless --experiment is given"))?;
    let [r] = a.noise[..] else {
        bail!("perturbing a surface takes a single --noise value");
    };
    let (samples, _): (Vec<SurfaceSample>, _) = load_surface(&arg)?.samples()?;
    let out = perturb_normals(&samples, &PerturbSpec { r, seed: a.seed })?;
    print_json(&SurfaceSource::cloud(&out))?;
    Ok(0)
}

fn export(a: ExportArgs) -> Result<u8> {
    let src = load_surface(&a.surface)?;
    let (rows, cols, pts) = surface_grid(&src, &a.grid.spec())?;
    let mut w = ObjWriter::new();
    w.object("surface");
    w.add_quad_grid(rows, cols, &pts);
    write_obj(&a.obj, w.finish())?;
    Ok(0)
}

fn main() -> ExitCode {
    // usage errors exit with 1; 2 is reserved for a failed test
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Classify(a) => classify(a),
        Command::Solve(a) => solve(a),
        Command::Cones(a) => cones(a),
        Command::Trace(a) => trace(a),
        Command::Perturb(a) => perturb(a),
        Command::Export(a) => export(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
