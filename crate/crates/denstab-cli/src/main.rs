//! Batch front end for density level-set analysis.
//!
//! Subcommands generate seeded synthetic data, trace instability and total
//! variation curves over bandwidth grids, emit fixed-content heatmaps and
//! cluster trees, select bandwidths from saved curves, and run the numeric
//! self-check suites. Outputs are plot-ready CSV or JSON; every CSV starts
//! with a `# meta:` comment recording the parameters that produced it, and
//! every command is deterministic given its `--seed`.
//!
//! Exit codes: 0 success, 1 a validation suite failed, 2 usage or input
//! error, 3 bandwidth selection found no qualifying grid point.

mod suites;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use denstab::clustertree::{build_tree, default_lambda_grid, default_linking_radius};
use denstab::data::{self, GeneratorSpec};
use denstab::instability::{
    confidence_bands, gamma_importance, gamma_numeric, select_bandwidth, split_three,
    BandMeasure, BandwidthChoice, CurveAxis, GammaGrid, InstabilityCurve, SelectionRule,
};
use denstab::{DensityModel, EmpiricalKde, Error, KernelFamily, KernelSpec, PointSet, Result};

#[derive(Parser)]
#[command(name = "denstab", version, about = "Density level-set clustering and instability diagnostics")]
struct Cli {
    /// Worker threads for grid and split parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic point set from a JSON spec.
    Gen(GenArgs),
    /// Instability curve over a bandwidth grid, at fixed level or content.
    Xi(XiArgs),
    /// Fixed-content instability over a bandwidth-by-content grid.
    XiHeatmap(HeatmapArgs),
    /// Total variation distance between half fits over a bandwidth grid.
    Gamma(GammaArgs),
    /// Cluster tree of a fitted density over a level grid.
    Tree(TreeArgs),
    /// Read a curve CSV and select a bandwidth against a threshold.
    Select(SelectArgs),
    /// Run numeric self-check suites and report as JSON.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KernelArg {
    Epanechnikov,
    EpanechnikovProduct,
    Spherical,
    Gaussian,
}

impl KernelArg {
    fn family(self) -> KernelFamily {
        match self {
            KernelArg::Epanechnikov => KernelFamily::Epanechnikov,
            KernelArg::EpanechnikovProduct => KernelFamily::EpanechnikovProduct,
            KernelArg::Spherical => KernelFamily::Spherical,
            KernelArg::Gaussian => KernelFamily::Gaussian,
        }
    }

    fn name(self) -> &'static str {
        match self {
            KernelArg::Epanechnikov => "epanechnikov",
            KernelArg::EpanechnikovProduct => "epanechnikov-product",
            KernelArg::Spherical => "spherical",
            KernelArg::Gaussian => "gaussian",
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// Generator spec as a JSON file.
    #[arg(long)]
    spec: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(group(ArgGroup::new("threshold").required(true)))]
struct XiArgs {
    /// Input point CSV.
    #[arg(long)]
    data: PathBuf,
    /// Fixed density level.
    #[arg(long, group = "threshold")]
    lambda: Option<f64>,
    /// Fixed probability content; each half resolves its own level.
    #[arg(long, group = "threshold")]
    alpha: Option<f64>,
    /// Bandwidth grid as start:stop:count.
    #[arg(long, value_name = "START:STOP:COUNT")]
    h_grid: String,
    /// Number of repeated splits; 2 or more adds confidence bands.
    #[arg(long, default_value_t = 1)]
    splits: usize,
    /// Band coverage level.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = KernelArg::Epanechnikov)]
    kernel: KernelArg,
    /// Output curve CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HeatmapArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_name = "START:STOP:COUNT")]
    h_grid: String,
    #[arg(long, value_name = "START:STOP:COUNT")]
    alpha_grid: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = KernelArg::Epanechnikov)]
    kernel: KernelArg,
    /// Output long-form CSV path (h,alpha,value).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GammaMethod {
    Numeric,
    Importance,
}

#[derive(Args)]
struct GammaArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_name = "START:STOP:COUNT")]
    h_grid: String,
    #[arg(long, value_enum, default_value_t = GammaMethod::Numeric)]
    method: GammaMethod,
    /// Importance-sampling draws per bandwidth.
    #[arg(short = 'N', long = "n-draws", default_value_t = 10_000)]
    n_draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = KernelArg::Epanechnikov)]
    kernel: KernelArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TreeArgs {
    #[arg(long)]
    data: PathBuf,
    /// Bandwidth for the fitted estimate.
    #[arg(long)]
    h: f64,
    /// Level grid as start:stop:count (default: uniform up to the fitted maximum).
    #[arg(long, value_name = "START:STOP:COUNT")]
    lambda_grid: Option<String>,
    /// Single-linkage radius (default: twice the bandwidth).
    #[arg(long)]
    linking_radius: Option<f64>,
    #[arg(long, value_enum, default_value_t = KernelArg::Epanechnikov)]
    kernel: KernelArg,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RuleArg {
    Xi,
    Gamma,
}

#[derive(Args)]
struct SelectArgs {
    /// Curve CSV produced by the xi or gamma subcommands.
    curve: PathBuf,
    /// Instability threshold.
    #[arg(long)]
    beta: f64,
    #[arg(long, value_enum)]
    rule: RuleArg,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, value_enum)]
    suite: suites::SuiteArg,
    /// Also run the long risk-scaling suite when selected.
    #[arg(long)]
    extended: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: could not configure {t} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Gen(a) => cmd_gen(a),
        Command::Xi(a) => cmd_xi(a),
        Command::XiHeatmap(a) => cmd_xi_heatmap(a),
        Command::Gamma(a) => cmd_gamma(a),
        Command::Tree(a) => cmd_tree(a),
        Command::Select(a) => cmd_select(a),
        Command::Validate(a) => cmd_validate(a),
    }
}

/// Parses a linear grid written start:stop:count (count of 1 keeps start).
fn parse_grid(spec: &str, name: &'static str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = |reason: String| Error::invalid(name, reason);
    if parts.len() != 3 {
        return Err(bad(format!("expected start:stop:count, got '{spec}'")));
    }
    let start: f64 = parts[0].parse().map_err(|_| bad(format!("bad start '{}'", parts[0])))?;
    let stop: f64 = parts[1].parse().map_err(|_| bad(format!("bad stop '{}'", parts[1])))?;
    let count: usize = parts[2].parse().map_err(|_| bad(format!("bad count '{}'", parts[2])))?;
    if !start.is_finite() || !stop.is_finite() {
        return Err(bad("endpoints must be finite".into()));
    }
    if count == 0 {
        return Err(bad("count must be at least 1".into()));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    if stop <= start {
        return Err(bad(format!("needs stop > start, got {start}:{stop}")));
    }
    Ok((0..count).map(|k| start + (stop - start) * k as f64 / (count - 1) as f64).collect())
}

fn write_meta<W: Write>(w: &mut W, fields: &[(&str, String)]) -> Result<()> {
    write!(w, "# meta:")?;
    for (k, v) in fields {
        write!(w, " {k}={v}")?;
    }
    writeln!(w)?;
    Ok(())
}

fn to_json(value: &impl serde::Serialize) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::invalid("json", e.to_string()))
}

fn kernel_for(data: &PointSet, arg: KernelArg) -> KernelSpec {
    KernelSpec { family: arg.family(), dim: data.dim() }
}

fn cmd_gen(a: GenArgs) -> Result<u8> {
    let spec = GeneratorSpec::from_path(&a.spec)?;
    let points = data::generate(&spec)?;
    let mut w = BufWriter::new(File::create(&a.out)?);
    write_meta(
        &mut w,
        &[
            ("command", "gen".into()),
            ("spec", to_json(&spec)?),
            ("n", points.len().to_string()),
            ("dim", points.dim().to_string()),
        ],
    )?;
    data::write_csv_to(&points, &mut w)?;
    w.flush()?;
    Ok(0)
}

fn cmd_xi(a: XiArgs) -> Result<u8> {
    let points = data::read_csv(&a.data)?;
    let h_grid = parse_grid(&a.h_grid, "h-grid")?;
    let kernel = kernel_for(&points, a.kernel);
    let (measure, threshold_meta) = match (a.lambda, a.alpha) {
        (Some(l), None) => (BandMeasure::XiLambda(l), ("lambda", l.to_string())),
        (None, Some(al)) => (BandMeasure::XiAlpha(al), ("alpha", al.to_string())),
        _ => return Err(Error::invalid("threshold", "give exactly one of --lambda or --alpha")),
    };
    let mut curve = confidence_bands(&points, measure, kernel, &h_grid, a.splits, a.level, a.seed)?;
    if a.splits == 1 {
        curve.bands = None;
    }
    let mut w = BufWriter::new(File::create(&a.out)?);
    write_meta(
        &mut w,
        &[
            ("command", "xi".into()),
            ("data", a.data.display().to_string()),
            threshold_meta,
            ("h_grid", a.h_grid.clone()),
            ("splits", a.splits.to_string()),
            ("level", a.level.to_string()),
            ("kernel", a.kernel.name().into()),
            ("seed", a.seed.to_string()),
        ],
    )?;
    curve.write_csv(&mut w)?;
    w.flush()?;
    Ok(0)
}

fn cmd_xi_heatmap(a: HeatmapArgs) -> Result<u8> {
    let points = data::read_csv(&a.data)?;
    let h_grid = parse_grid(&a.h_grid, "h-grid")?;
    let alpha_grid = parse_grid(&a.alpha_grid, "alpha-grid")?;
    let kernel = kernel_for(&points, a.kernel);
    let split = split_three(&points, a.seed)?;
    let values = denstab::instability::xi_alpha_heatmap(&points, &split, kernel, &h_grid, &alpha_grid)?;
    let mut w = BufWriter::new(File::create(&a.out)?);
    write_meta(
        &mut w,
        &[
            ("command", "xi-heatmap".into()),
            ("data", a.data.display().to_string()),
            ("h_grid", a.h_grid.clone()),
            ("alpha_grid", a.alpha_grid.clone()),
            ("kernel", a.kernel.name().into()),
            ("seed", a.seed.to_string()),
        ],
    )?;
    writeln!(w, "h,alpha,value")?;
    for (i, &h) in h_grid.iter().enumerate() {
        for (j, &alpha) in alpha_grid.iter().enumerate() {
            writeln!(w, "{h},{alpha},{}", values[i * alpha_grid.len() + j])?;
        }
    }
    w.flush()?;
    Ok(0)
}

fn cmd_gamma(a: GammaArgs) -> Result<u8> {
    let points = data::read_csv(&a.data)?;
    let h_grid = parse_grid(&a.h_grid, "h-grid")?;
    let kernel = kernel_for(&points, a.kernel);
    let split = split_three(&points, a.seed)?;
    let xs = points.gather(&split.x);
    let ys = points.gather(&split.y);
    let values: Vec<f64> = match a.method {
        GammaMethod::Numeric => h_grid
            .iter()
            .map(|&h| {
                let kx = EmpiricalKde::fit(xs.clone(), kernel, h)?;
                let ky = EmpiricalKde::fit(ys.clone(), kernel, h)?;
                gamma_numeric(&kx, &ky, GammaGrid::default())
            })
            .collect::<Result<_>>()?,
        GammaMethod::Importance => {
            if a.n_draws == 0 {
                return Err(Error::invalid("n-draws", "need at least one draw"));
            }
            h_grid
                .iter()
                .enumerate()
                .map(|(i, &h)| {
                    gamma_importance(&xs, &ys, kernel, h, a.n_draws, a.seed.wrapping_add(1 + i as u64))
                })
                .collect::<Result<_>>()?
        }
    };
    let curve = InstabilityCurve {
        axis: CurveAxis::Bandwidth,
        grid: h_grid,
        values,
        bands: None,
        n_splits: 1,
    };
    let mut w = BufWriter::new(File::create(&a.out)?);
    let method = match a.method {
        GammaMethod::Numeric => "numeric".to_string(),
        GammaMethod::Importance => format!("importance n_draws={}", a.n_draws),
    };
    write_meta(
        &mut w,
        &[
            ("command", "gamma".into()),
            ("data", a.data.display().to_string()),
            ("h_grid", a.h_grid.clone()),
            ("method", method),
            ("kernel", a.kernel.name().into()),
            ("seed", a.seed.to_string()),
        ],
    )?;
    curve.write_csv(&mut w)?;
    w.flush()?;
    Ok(0)
}

fn cmd_tree(a: TreeArgs) -> Result<u8> {
    let points = data::read_csv(&a.data)?;
    let kernel = kernel_for(&points, a.kernel);
    let kde = EmpiricalKde::fit(points.clone(), kernel, a.h)?;
    let model = DensityModel::Empirical(kde);
    let lambda_grid = match &a.lambda_grid {
        Some(spec) => parse_grid(spec, "lambda-grid")?,
        None => default_lambda_grid(&model)?,
    };
    let radius = a.linking_radius.unwrap_or_else(|| default_linking_radius(a.h));
    let tree = build_tree(&model, &points, &lambda_grid, radius)?;
    let doc = serde_json::json!({
        "meta": {
            "command": "tree",
            "data": a.data.display().to_string(),
            "h": a.h,
            "lambda_grid": a.lambda_grid.clone().unwrap_or_else(|| "default".into()),
            "linking_radius": radius,
            "kernel": a.kernel.name(),
        },
        "tree": tree.export(),
    });
    let mut w = BufWriter::new(File::create(&a.out)?);
    serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| Error::invalid("json", e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(0)
}

/// Reads back a curve CSV written by the xi or gamma subcommands: comment
/// lines are skipped, the header is checked, and only the first two columns
/// are used.
fn read_curve_csv(path: &PathBuf) -> Result<InstabilityCurve> {
    let text = std::fs::read_to_string(path)?;
    let mut grid = Vec::new();
    let mut values = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if !line.starts_with("grid_value,instability") {
                return Err(Error::invalid(
                    "curve",
                    format!("line {}: expected curve header, got '{line}'", idx + 1),
                ));
            }
            saw_header = true;
            continue;
        }
        let mut fields = line.split(',');
        let (g, v) = match (fields.next(), fields.next()) {
            (Some(g), Some(v)) => (g, v),
            _ => return Err(Error::invalid("curve", format!("line {}: too few fields", idx + 1))),
        };
        let g: f64 = g.trim().parse().map_err(|_| {
            Error::invalid("curve", format!("line {}: bad grid value '{g}'", idx + 1))
        })?;
        let v: f64 = v.trim().parse().map_err(|_| {
            Error::invalid("curve", format!("line {}: bad instability '{v}'", idx + 1))
        })?;
        grid.push(g);
        values.push(v);
    }
    if grid.is_empty() {
        return Err(Error::invalid("curve", "no data rows"));
    }
    Ok(InstabilityCurve { axis: CurveAxis::Bandwidth, grid, values, bands: None, n_splits: 1 })
}

fn cmd_select(a: SelectArgs) -> Result<u8> {
    let curve = read_curve_csv(&a.curve)?;
    let rule = match a.rule {
        RuleArg::Xi => SelectionRule::XiRule,
        RuleArg::Gamma => SelectionRule::GammaRule,
    };
    let choice = select_bandwidth(&curve, a.beta, rule)?;
    match choice {
        BandwidthChoice::Chosen { h, .. } => {
            println!("{h}");
            println!("{}", to_json(&choice)?);
            Ok(0)
        }
        BandwidthChoice::NotFound { argmin_h, min_value, .. } => {
            eprintln!(
                "no grid point met the threshold; the curve bottoms out at h = {argmin_h} \
                 with value {min_value}"
            );
            println!("{}", to_json(&choice)?);
            Ok(3)
        }
    }
}

fn cmd_validate(a: ValidateArgs) -> Result<u8> {
    let report = suites::run(a.suite, a.extended, a.seed);
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::invalid("json", e.to_string()))?;
    match &a.out {
        Some(path) => {
            std::fs::write(path, text + "\n")?;
        }
        None => println!("{text}"),
    }
    Ok(if report.passed { 0 } else { 1 })
}
