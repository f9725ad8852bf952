//! Command-line driver: synthetic clouds, chart atlases, per-chart fits,
//! prediction, pre-images, tube extensions, and convergence tables.
//!
//! Exit codes: 0 on success, 2 for validation/input problems, 3 for
//! numerical failures (insufficient data, infeasible systems, coverage).

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use atlas::bspline::{fit_scattered, SplineModel};
use atlas::chart::{build_atlas, distortion_report, Atlas, ChartConfig};
use atlas::chebyshev::{fit_cheb, ChebConfig, ChebModel, Filter};
use atlas::cloud::{distance, format_float, PointCloud};
use atlas::error::{AtlasError, Result};
use atlas::extension::{
    build_tubular, extend_evaluate, fit_extension, fit_preimage, MsnConfig, Smoother,
    TubularChart,
};
use atlas::manifold::{sample_field, sample_manifold, Field, ManifoldKind, ManifoldSpec};
use atlas::pipeline::{
    fit_pipeline, predict, run_convergence, ChartModel, ConvergenceConfig, FitMethod,
    FittedAtlas, PipelineConfig,
};

#[derive(Parser, Debug)]
#[command(name = "atlas", version, about = "Function approximation on unknown manifolds")]
struct Cli {
    /// Key=value file whose entries override the command-line flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a synthetic manifold, optionally with a scalar field attached.
    Gen(GenArgs),
    /// Build or inspect chart atlases.
    Chart {
        #[command(subcommand)]
        action: ChartCommand,
    },
    /// Fit an approximant: a whole atlas (with --dim) or a single model on
    /// cube coordinates.
    Fit(FitArgs),
    /// Evaluate a fitted model at the points of a CSV file.
    #[command(alias = "predict")]
    Eval(EvalArgs),
    /// Recover ambient points from chart coordinates.
    Preimage(PreimageArgs),
    /// Extend a sampled function to a tube around the manifold.
    Extend(ExtendArgs),
    /// Fit at increasing sample sizes and print the error table.
    Converge(ConvergeArgs),
}

#[derive(Subcommand, Debug)]
enum ChartCommand {
    /// Cover a cloud with charts and write the atlas as JSON.
    Build(ChartBuildArgs),
    /// Per-chart table: sizes, scales, and secant-ratio ranges.
    Report(ChartReportArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodArg {
    Cheb,
    Spline,
}

impl From<MethodArg> for FitMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Cheb => FitMethod::Cheb,
            MethodArg::Spline => FitMethod::Spline,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FilterArg {
    SmoothExp,
    Cosine,
    None,
}

impl From<FilterArg> for Filter {
    fn from(f: FilterArg) -> Self {
        match f {
            FilterArg::SmoothExp => Filter::SmoothExp,
            FilterArg::Cosine => Filter::Cosine,
            FilterArg::None => Filter::None,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum OperatorArg {
    Identity,
    Laplacian,
    Bilaplacian,
}

impl From<OperatorArg> for Smoother {
    fn from(o: OperatorArg) -> Self {
        match o {
            OperatorArg::Identity => Smoother::Identity,
            OperatorArg::Laplacian => Smoother::Laplacian,
            OperatorArg::Bilaplacian => Smoother::Bilaplacian,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct ManifoldArgs {
    /// helix | circle | sphere | torus
    #[arg(long)]
    manifold: String,
    /// Helix pitch parameter in (0, 1).
    #[arg(long, default_value_t = 0.8)]
    a: f64,
    /// Circle radius.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Torus minor and major radii.
    #[arg(long, default_value_t = 0.5)]
    minor: f64,
    #[arg(long, default_value_t = 2.0)]
    major: f64,
    /// Ambient dimension for circle, sphere, and torus.
    #[arg(long)]
    ambient: Option<usize>,
}

impl ManifoldArgs {
    fn kind(&self) -> Result<ManifoldKind> {
        Ok(match self.manifold.as_str() {
            "helix" => ManifoldKind::Helix { a: self.a },
            "circle" => ManifoldKind::Circle {
                radius: self.radius,
                dim: self.ambient.unwrap_or(2),
            },
            "sphere" => ManifoldKind::Sphere { dim: self.ambient.unwrap_or(3) },
            "torus" => ManifoldKind::Torus {
                minor: self.minor,
                major: self.major,
                dim: self.ambient.unwrap_or(3),
            },
            other => {
                return Err(AtlasError::Validation(format!(
                    "unknown manifold '{other}' (helix, circle, sphere, torus)"
                )))
            }
        })
    }

    fn apply(&mut self, ov: &mut Overrides) -> Result<()> {
        ov.set("manifold", &mut self.manifold)?;
        ov.set("a", &mut self.a)?;
        ov.set("radius", &mut self.radius)?;
        ov.set("minor", &mut self.minor)?;
        ov.set("major", &mut self.major)?;
        ov.set_opt("ambient", &mut self.ambient)
    }
}

#[derive(Args, Debug, Clone)]
struct ChartArgs {
    /// Neighbor count behind the annulus radius estimate.
    #[arg(long, default_value_t = 8)]
    knn: usize,
    /// Anchor annulus bounds as multiples of the k-NN radius.
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 2.0)]
    c2: f64,
    /// Fixed annulus scale, skipping the k-NN estimate.
    #[arg(long)]
    annulus_radius: Option<f64>,
    /// Neighbors used to calibrate each chart's scale.
    #[arg(long, default_value_t = 24)]
    calibration_k: usize,
    /// Fraction of calibration neighbors a chart must capture.
    #[arg(long, default_value_t = 0.8)]
    coverage_fraction: f64,
    /// Cap on the secant-ratio spread accepted during calibration.
    #[arg(long, default_value_t = 10.0)]
    spread_bound: f64,
    /// Smallest acceptable singular value of the normalized anchor matrix.
    #[arg(long, default_value_t = 0.1)]
    gamma_threshold: f64,
}

impl ChartArgs {
    fn config(&self) -> ChartConfig {
        ChartConfig {
            knn: self.knn,
            c1: self.c1,
            c2: self.c2,
            annulus_radius: self.annulus_radius,
            calibration_k: self.calibration_k,
            coverage_fraction: self.coverage_fraction,
            spread_bound: self.spread_bound,
            gamma_threshold: self.gamma_threshold,
        }
    }

    fn apply(&mut self, ov: &mut Overrides) -> Result<()> {
        ov.set("knn", &mut self.knn)?;
        ov.set("c1", &mut self.c1)?;
        ov.set("c2", &mut self.c2)?;
        ov.set_opt("annulus-radius", &mut self.annulus_radius)?;
        ov.set("calibration-k", &mut self.calibration_k)?;
        ov.set("coverage-fraction", &mut self.coverage_fraction)?;
        ov.set("spread-bound", &mut self.spread_bound)?;
        ov.set("gamma-threshold", &mut self.gamma_threshold)
    }
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    manifold: ManifoldArgs,
    /// Sample count.
    #[arg(long, default_value_t = 2000)]
    n: usize,
    /// Ambient Gaussian noise level.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Scalar field: sum | trig:K | bump:WIDTH | smooth:R:KINK
    #[arg(long)]
    field: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ChartBuildArgs {
    /// Input cloud CSV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Chart (intrinsic) dimension.
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    chart: ChartArgs,
}

#[derive(Args, Debug)]
struct ChartReportArgs {
    #[arg(long)]
    atlas: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Cheb)]
    method: MethodArg,
    /// Chart dimension. Present: the input is an ambient cloud and the fit
    /// covers it with charts first. Absent: the input is already in cube
    /// coordinates and a single model is fitted.
    #[arg(long)]
    dim: Option<usize>,
    /// Chebyshev bandwidth: an integer or "auto".
    #[arg(long, default_value = "auto")]
    n: String,
    #[arg(long, value_enum, default_value_t = FilterArg::SmoothExp)]
    filter: FilterArg,
    /// Spline order.
    #[arg(long, default_value_t = 3)]
    m: usize,
    /// Spline grid step.
    #[arg(long, default_value_t = 0.25)]
    h: f64,
    #[command(flatten)]
    chart: ChartArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Model JSON from `fit`: a fitted atlas or a single cube model.
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// How far past its cube the nearest chart may stretch.
    #[arg(long, default_value_t = 0.1)]
    fallback_tolerance: f64,
}

#[derive(Args, Debug)]
struct PreimageArgs {
    #[arg(long)]
    atlas: PathBuf,
    /// Cloud the inverse models are fitted from.
    #[arg(long = "in")]
    input: PathBuf,
    /// CSV of chart coordinates to invert.
    #[arg(long)]
    query: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Chart whose coordinates the queries use.
    #[arg(long, default_value_t = 0)]
    chart: usize,
    #[arg(long, value_enum, default_value_t = FilterArg::SmoothExp)]
    filter: FilterArg,
}

#[derive(Args, Debug)]
struct ExtendArgs {
    #[arg(long)]
    atlas: PathBuf,
    /// Cloud with function values, the extension constraints.
    #[arg(long = "in")]
    input: PathBuf,
    /// CSV of ambient query points.
    #[arg(long)]
    query: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Tube dimension, chart dimension <= s <= ambient dimension
    /// (default: ambient).
    #[arg(long)]
    s: Option<usize>,
    #[arg(long, value_enum, default_value_t = OperatorArg::Laplacian)]
    operator: OperatorArg,
    /// Polynomial degree (default: derived from the constraint count).
    #[arg(long)]
    degree: Option<usize>,
    /// Half-width of the normal box (default: each chart's own scale).
    #[arg(long)]
    tube_radius: Option<f64>,
    /// Force one chart instead of the best-covering one per query.
    #[arg(long)]
    chart: Option<usize>,
}

#[derive(Args, Debug)]
struct ConvergeArgs {
    #[command(flatten)]
    manifold: ManifoldArgs,
    #[arg(long, default_value = "trig:1")]
    field: String,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    /// Chart dimension (default: the manifold's intrinsic dimension).
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Held-out test points per size.
    #[arg(long, default_value_t = 200)]
    test_n: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Cheb)]
    method: MethodArg,
    /// Chebyshev bandwidth: an integer or "auto".
    #[arg(long, default_value = "auto")]
    n: String,
    #[arg(long, value_enum, default_value_t = FilterArg::SmoothExp)]
    filter: FilterArg,
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 0.25)]
    h: f64,
    #[arg(long, default_value_t = 0.1)]
    fallback_tolerance: f64,
    /// Also write the table to a file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    chart: ChartArgs,
}

/// Key=value lines from `--config`; entries override the parsed flags.
/// '#' starts a comment, blank lines are skipped, keys use the flag names.
struct Overrides {
    entries: BTreeMap<String, String>,
}

impl Overrides {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path)?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    AtlasError::Validation(format!(
                        "config line {}: expected key=value, got '{line}'",
                        lineno + 1
                    ))
                })?;
                entries.insert(
                    key.trim().replace('_', "-"),
                    value.trim().to_string(),
                );
            }
        }
        Ok(Overrides { entries })
    }

    fn set<T>(&mut self, key: &str, slot: &mut T) -> Result<()>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(raw) = self.entries.remove(key) {
            *slot = raw.parse().map_err(|e| {
                AtlasError::Validation(format!("config {key}={raw}: {e}"))
            })?;
        }
        Ok(())
    }

    fn set_opt<T>(&mut self, key: &str, slot: &mut Option<T>) -> Result<()>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(raw) = self.entries.remove(key) {
            *slot = Some(raw.parse().map_err(|e| {
                AtlasError::Validation(format!("config {key}={raw}: {e}"))
            })?);
        }
        Ok(())
    }

    fn set_enum<T: ValueEnum>(&mut self, key: &str, slot: &mut T) -> Result<()> {
        if let Some(raw) = self.entries.remove(key) {
            *slot = T::from_str(&raw, true).map_err(|e| {
                AtlasError::Validation(format!("config {key}={raw}: {e}"))
            })?;
        }
        Ok(())
    }

    fn set_sizes(&mut self, key: &str, slot: &mut Vec<usize>) -> Result<()> {
        if let Some(raw) = self.entries.remove(key) {
            let parsed: std::result::Result<Vec<usize>, _> =
                raw.split(',').map(|s| s.trim().parse()).collect();
            *slot = parsed.map_err(|e| {
                AtlasError::Validation(format!("config {key}={raw}: {e}"))
            })?;
        }
        Ok(())
    }

    /// Every entry must have been consumed by the active verb.
    fn finish(&mut self) -> Result<()> {
        if self.entries.is_empty() {
            return Ok(());
        }
        let keys: Vec<&str> = self.entries.keys().map(String::as_str).collect();
        Err(AtlasError::Validation(format!(
            "config keys not recognized by this command: {}",
            keys.join(", ")
        )))
    }
}

/// "auto" or a positive integer.
fn parse_bandwidth(raw: &str) -> Result<Option<usize>> {
    if raw == "auto" {
        return Ok(None);
    }
    raw.parse().map(Some).map_err(|e| {
        AtlasError::Validation(format!("bandwidth '{raw}': {e}"))
    })
}

/// sum | trig:K | bump:WIDTH | smooth:R:KINK
fn parse_field(spec: &str, ambient_dim: usize) -> Result<Field> {
    let mut parts = spec.split(':');
    let head = parts.next().unwrap_or("");
    let rest: Vec<&str> = parts.collect();
    let bad = |msg: &str| AtlasError::Validation(format!("field '{spec}': {msg}"));
    match (head, rest.as_slice()) {
        ("sum", []) => Ok(Field::CoordinateSum),
        ("trig", [k]) => Ok(Field::Trig {
            frequency: k.parse().map_err(|_| bad("frequency must be an integer"))?,
        }),
        ("bump", [w]) => Ok(Field::GaussianBump {
            center: vec![0.0; ambient_dim],
            width: w.parse().map_err(|_| bad("width must be a number"))?,
        }),
        ("smooth", [r, kink]) => Ok(Field::Smoothness {
            r: r.parse().map_err(|_| bad("smoothness order must be an integer"))?,
            kink: kink.parse().map_err(|_| bad("kink must be a number"))?,
        }),
        _ => Err(bad("expected sum, trig:K, bump:WIDTH, or smooth:R:KINK")),
    }
}

/// Print to stdout, shrugging off a closed pipe (e.g. piping into `head`).
fn emit(text: impl Display) {
    use std::io::Write;
    let _ = write!(std::io::stdout(), "{text}");
}

macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut ov = Overrides::load(cli.config.as_deref())?;
    match cli.command {
        Command::Gen(args) => cmd_gen(args, &mut ov),
        Command::Chart { action: ChartCommand::Build(args) } => cmd_chart_build(args, &mut ov),
        Command::Chart { action: ChartCommand::Report(args) } => cmd_chart_report(args, &mut ov),
        Command::Fit(args) => cmd_fit(args, &mut ov),
        Command::Eval(args) => cmd_eval(args, &mut ov),
        Command::Preimage(args) => cmd_preimage(args, &mut ov),
        Command::Extend(args) => cmd_extend(args, &mut ov),
        Command::Converge(args) => cmd_converge(args, &mut ov),
    }
}

fn cmd_gen(mut args: GenArgs, ov: &mut Overrides) -> Result<()> {
    args.manifold.apply(ov)?;
    ov.set("n", &mut args.n)?;
    ov.set("noise", &mut args.noise)?;
    ov.set("seed", &mut args.seed)?;
    ov.set_opt("field", &mut args.field)?;
    ov.set("out", &mut args.out)?;
    ov.finish()?;

    let kind = args.manifold.kind()?;
    let spec = ManifoldSpec { kind, count: args.n, seed: args.seed, noise: args.noise };
    let mut cloud = sample_manifold(&spec)?;
    if let Some(field) = &args.field {
        let field = parse_field(field, cloud.dim())?;
        cloud = sample_field(&cloud, &field)?;
    }
    cloud.save_csv(&args.out)?;
    say!(
        "wrote {} points in R^{} to {}",
        cloud.len(),
        cloud.dim(),
        args.out.display()
    );
    Ok(())
}

fn cmd_chart_build(mut args: ChartBuildArgs, ov: &mut Overrides) -> Result<()> {
    ov.set("in", &mut args.input)?;
    ov.set("dim", &mut args.dim)?;
    ov.set("out", &mut args.out)?;
    args.chart.apply(ov)?;
    ov.finish()?;

    let cloud = PointCloud::load_csv(&args.input)?;
    let atlas = build_atlas(&cloud, args.dim, &args.chart.config())?;
    write_json(&args.out, &atlas)?;
    say!(
        "built {} charts covering {} points, atlas written to {}",
        atlas.charts().len(),
        cloud.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_chart_report(mut args: ChartReportArgs, ov: &mut Overrides) -> Result<()> {
    ov.set("atlas", &mut args.atlas)?;
    ov.set("in", &mut args.input)?;
    ov.finish()?;

    let atlas: Atlas = read_json(&args.atlas)?;
    let cloud = PointCloud::load_csv(&args.input)?;
    atlas.validate_against(&cloud)?;

    say!("chart,assigned,beta_star,gamma_proxy,secant_min,secant_max");
    for (idx, chart) in atlas.charts().iter().enumerate() {
        let assigned = atlas.chart_points(idx).len();
        // Ambient chords stand in for geodesic distances; on dense clouds
        // in-chart chords track arclength closely.
        let report = distortion_report(chart, &cloud, |i, j| {
            Some(distance(cloud.point(i), cloud.point(j)))
        });
        let (lo, hi) = match report {
            Ok(r) => (format_float(r.min_ratio), format_float(r.max_ratio)),
            Err(_) => ("n/a".into(), "n/a".into()),
        };
        say!(
            "{},{},{},{},{},{}",
            idx,
            assigned,
            format_float(chart.star().beta_star()),
            format_float(chart.star().gamma_proxy()),
            lo,
            hi
        );
    }
    Ok(())
}

fn cmd_fit(mut args: FitArgs, ov: &mut Overrides) -> Result<()> {
    ov.set("in", &mut args.input)?;
    ov.set("out", &mut args.out)?;
    ov.set_enum("method", &mut args.method)?;
    ov.set_opt("dim", &mut args.dim)?;
    ov.set("n", &mut args.n)?;
    ov.set_enum("filter", &mut args.filter)?;
    ov.set("m", &mut args.m)?;
    ov.set("h", &mut args.h)?;
    args.chart.apply(ov)?;
    ov.finish()?;

    let cloud = PointCloud::load_csv(&args.input)?;
    let values = cloud
        .values()
        .ok_or_else(|| AtlasError::Validation("input carries no f column to fit".into()))?;
    let cheb = ChebConfig {
        filter: args.filter.into(),
        bandwidth: parse_bandwidth(&args.n)?,
        ..ChebConfig::default()
    };

    match args.dim {
        Some(dim) => {
            let config = PipelineConfig {
                chart: args.chart.config(),
                method: args.method.into(),
                cheb,
                spline_h: args.h,
                spline_m: args.m,
                ..PipelineConfig::default()
            };
            let (fitted, reports) = fit_pipeline(&cloud, dim, &config)?;
            write_json(&args.out, &fitted)?;
            say!("chart,samples,size,residual");
            for r in &reports {
                say!(
                    "{},{},{},{}",
                    r.chart,
                    r.samples,
                    r.size,
                    format_float(r.residual)
                );
            }
            say!(
                "fitted {} charts, model written to {}",
                fitted.models.len(),
                args.out.display()
            );
        }
        None => {
            // The input is already in cube coordinates.
            match args.method {
                MethodArg::Cheb => {
                    let model = fit_cheb(cloud.points(), values, &cheb)?;
                    write_json(&args.out, &model)?;
                    say!(
                        "fitted chebyshev model, bandwidth {}, written to {}",
                        model.n,
                        args.out.display()
                    );
                }
                MethodArg::Spline => {
                    let model = fit_scattered(
                        cloud.points(),
                        values,
                        args.h,
                        args.m,
                        &cheb.quadrature,
                    )?;
                    write_json(&args.out, &model)?;
                    say!(
                        "fitted spline model, {} shifts, written to {}",
                        model.coefficients.len(),
                        args.out.display()
                    );
                }
            }
        }
    }
    Ok(())
}

/// Any model JSON `fit` can produce.
#[derive(Deserialize)]
#[serde(untagged)]
enum ModelFile {
    Pipeline(FittedAtlas),
    Tagged(ChartModel),
    Cheb(ChebModel),
    Spline(SplineModel),
}

fn cmd_eval(mut args: EvalArgs, ov: &mut Overrides) -> Result<()> {
    ov.set("model", &mut args.model)?;
    ov.set("in", &mut args.input)?;
    ov.set("out", &mut args.out)?;
    ov.set("fallback-tolerance", &mut args.fallback_tolerance)?;
    ov.finish()?;

    let model: ModelFile = read_json(&args.model)?;
    let cloud = PointCloud::load_csv(&args.input)?;
    let mut values = Vec::with_capacity(cloud.len());
    let mut fallbacks = 0usize;
    for x in cloud.points() {
        let value = match &model {
            ModelFile::Pipeline(fitted) => {
                let p = predict(fitted, x, args.fallback_tolerance)?;
                fallbacks += p.fallback as usize;
                p.value
            }
            ModelFile::Tagged(m) => m.eval(x)?,
            ModelFile::Cheb(m) => m.eval(x)?,
            ModelFile::Spline(m) => m.eval(x)?,
        };
        values.push(value);
    }
    let out = PointCloud::new(
        cloud.points().to_vec(),
        Some(values),
        cloud.params().map(|p| p.to_vec()),
    )?;
    out.save_csv(&args.out)?;
    if fallbacks > 0 {
        eprintln!("{fallbacks} points needed the nearest-chart fallback");
    }
    say!("evaluated {} points, written to {}", out.len(), args.out.display());
    Ok(())
}

fn cmd_preimage(mut args: PreimageArgs, ov: &mut Overrides) -> Result<()> {
    ov.set("atlas", &mut args.atlas)?;
    ov.set("in", &mut args.input)?;
    ov.set("query", &mut args.query)?;
    ov.set("out", &mut args.out)?;
    ov.set("chart", &mut args.chart)?;
    ov.set_enum("filter", &mut args.filter)?;
    ov.finish()?;

    let atlas: Atlas = read_json(&args.atlas)?;
    let cloud = PointCloud::load_csv(&args.input)?;
    atlas.validate_against(&cloud)?;
    let chart = atlas.charts().get(args.chart).ok_or_else(|| {
        AtlasError::Validation(format!(
            "chart {} out of range, atlas has {}",
            args.chart,
            atlas.charts().len()
        ))
    })?;
    let queries = PointCloud::load_csv(&args.query)?;
    if queries.dim() != chart.dim() {
        return Err(AtlasError::Validation(format!(
            "queries have {} coordinates, chart coordinates have {}",
            queries.dim(),
            chart.dim()
        )));
    }

    let points: Vec<Vec<f64>> = atlas
        .chart_points(args.chart)
        .into_iter()
        .map(|i| cloud.point(i).to_vec())
        .collect();
    let config = ChebConfig { filter: args.filter.into(), ..ChebConfig::default() };
    let model = fit_preimage(&points, chart, &config)?;
    let mut out = Vec::with_capacity(queries.len());
    for y in queries.points() {
        out.push(model.preimage(y)?);
    }
    let out = PointCloud::new(out, None, None)?;
    out.save_csv(&args.out)?;
    say!(
        "inverted {} queries through chart {}, written to {}",
        out.len(),
        args.chart,
        args.out.display()
    );
    Ok(())
}

fn cmd_extend(mut args: ExtendArgs, ov: &mut Overrides) -> Result<()> {
    ov.set("atlas", &mut args.atlas)?;
    ov.set("in", &mut args.input)?;
    ov.set("query", &mut args.query)?;
    ov.set("out", &mut args.out)?;
    ov.set_opt("s", &mut args.s)?;
    ov.set_enum("operator", &mut args.operator)?;
    ov.set_opt("degree", &mut args.degree)?;
    ov.set_opt("tube-radius", &mut args.tube_radius)?;
    ov.set_opt("chart", &mut args.chart)?;
    ov.finish()?;

    let atlas: Atlas = read_json(&args.atlas)?;
    let cloud = PointCloud::load_csv(&args.input)?;
    atlas.validate_against(&cloud)?;
    let values = cloud
        .values()
        .ok_or_else(|| AtlasError::Validation("input carries no f column to extend".into()))?;
    let queries = PointCloud::load_csv(&args.query)?;
    if queries.dim() != cloud.dim() {
        return Err(AtlasError::Validation(format!(
            "queries have {} coordinates, cloud has {}",
            queries.dim(),
            cloud.dim()
        )));
    }
    if let Some(idx) = args.chart {
        if idx >= atlas.charts().len() {
            return Err(AtlasError::Validation(format!(
                "chart {idx} out of range, atlas has {}",
                atlas.charts().len()
            )));
        }
    }

    let tubulars: Vec<TubularChart> = atlas
        .charts()
        .iter()
        .map(|chart| build_tubular(chart, args.s, args.tube_radius))
        .collect::<Result<_>>()?;

    // Route each query to a tube before fitting, so only the charts that are
    // actually used pay for an extension fit.
    let owner = |x: &[f64]| -> Result<usize> {
        if let Some(idx) = args.chart {
            return Ok(idx);
        }
        let mut best = (0usize, f64::INFINITY);
        for (idx, tube) in tubulars.iter().enumerate() {
            let norm = tube.sup_norm(x);
            if norm < best.1 {
                best = (idx, norm);
            }
        }
        if best.1 > 1.0 {
            return Err(AtlasError::OutOfTube { norm: best.1 });
        }
        Ok(best.0)
    };
    let owners: Vec<usize> = queries.points().iter().map(|x| owner(x)).collect::<Result<_>>()?;

    let config = MsnConfig {
        smoother: args.operator.into(),
        degree: args.degree,
        ..MsnConfig::default()
    };
    let mut models = BTreeMap::new();
    for &idx in &owners {
        if models.contains_key(&idx) {
            continue;
        }
        let assigned = atlas.chart_points(idx);
        let points: Vec<Vec<f64>> =
            assigned.iter().map(|&i| cloud.point(i).to_vec()).collect();
        let constraint_values: Vec<f64> = assigned.iter().map(|&i| values[i]).collect();
        let model = fit_extension(&points, &constraint_values, &tubulars[idx], &config)?;
        models.insert(idx, model);
    }

    let mut predictions = Vec::with_capacity(queries.len());
    for (x, &idx) in queries.points().iter().zip(&owners) {
        predictions.push(extend_evaluate(&models[&idx], x)?);
    }
    let out = PointCloud::new(queries.points().to_vec(), Some(predictions), None)?;
    out.save_csv(&args.out)?;
    say!(
        "extended {} queries through {} tubes, written to {}",
        out.len(),
        models.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_converge(mut args: ConvergeArgs, ov: &mut Overrides) -> Result<()> {
    args.manifold.apply(ov)?;
    ov.set("field", &mut args.field)?;
    ov.set_sizes("sizes", &mut args.sizes)?;
    ov.set_opt("dim", &mut args.dim)?;
    ov.set("seed", &mut args.seed)?;
    ov.set("noise", &mut args.noise)?;
    ov.set("test-n", &mut args.test_n)?;
    ov.set_enum("method", &mut args.method)?;
    ov.set("n", &mut args.n)?;
    ov.set_enum("filter", &mut args.filter)?;
    ov.set("m", &mut args.m)?;
    ov.set("h", &mut args.h)?;
    ov.set("fallback-tolerance", &mut args.fallback_tolerance)?;
    ov.set_opt("out", &mut args.out)?;
    args.chart.apply(ov)?;
    ov.finish()?;

    let kind = args.manifold.kind()?;
    let field = parse_field(&args.field, kind.ambient_dim())?;
    let dim = args.dim.unwrap_or_else(|| kind.intrinsic_dim());
    let config = ConvergenceConfig {
        spec: ManifoldSpec { kind, count: 0, seed: args.seed, noise: args.noise },
        field,
        dim,
        sizes: args.sizes.clone(),
        test_count: args.test_n,
        pipeline: PipelineConfig {
            chart: args.chart.config(),
            method: args.method.into(),
            cheb: ChebConfig {
                filter: args.filter.into(),
                bandwidth: parse_bandwidth(&args.n)?,
                ..ChebConfig::default()
            },
            spline_h: args.h,
            spline_m: args.m,
            fallback_tolerance: args.fallback_tolerance,
        },
    };
    let report = run_convergence(&config)?;
    let table = report.render();
    emit(&table);
    if let Some(out) = &args.out {
        fs::write(out, &table)?;
    }
    Ok(())
}
