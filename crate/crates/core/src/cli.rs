//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for invalid input (flags, configuration,
//! geometry), 2 for failures during computation.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bounds::{self, BoundResult};
use crate::channel::Geometry;
use crate::error::{Error, Result};
use crate::mle::{self, SearchInterval};
use crate::noise::{self, NoiseBreakdown};
use crate::sweep::{self, AxisRange, Quantity, SweepSpec};
use crate::sysparams::{self, default_parameters, SystemParameters, PARAM_KEYS};

#[derive(Debug, Parser)]
#[command(
    name = "vlcrange",
    version,
    about = "Ranging-accuracy bounds for RSS-based visible light range estimation"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON parameter file (unit-suffixed keys, e.g. {"P_t_W": 5, "S_cm2": 0.2})
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one parameter, e.g. --set P_t_W=5 (repeatable; wins over --config)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Lambertian order of the LED (shorthand for --set m=VALUE)
    #[arg(long, global = true)]
    pub m: Option<f64>,
    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub output: OutputFormat,
    /// Write output to PATH (atomically) instead of standard output
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Log progress to standard error (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the effective parameters with their units and origin
    Params,
    /// Noise variance breakdown at a placement
    #[command(allow_negative_numbers = true)]
    Noise(GeometryArgs),
    /// Fisher information and √CRLB (accurate and constant-noise) at a placement
    #[command(allow_negative_numbers = true)]
    Bound(GeometryArgs),
    /// Evaluate a quantity over a (m, P_t, h, ell) grid
    #[command(allow_negative_numbers = true)]
    Sweep(SweepArgs),
    /// Monte Carlo of the maximum-likelihood range estimator
    #[command(allow_negative_numbers = true)]
    Mle(MleArgs),
    /// Lambertian order minimizing √CRLB at a placement
    #[command(allow_negative_numbers = true)]
    Mopt(MoptArgs),
}

#[derive(Debug, Clone, Copy, Args)]
pub struct GeometryArgs {
    /// Vertical distance between LED and receiver, m
    #[arg(long)]
    pub h: f64,
    /// Horizontal distance between LED and receiver, m
    #[arg(long, default_value_t = 0.0)]
    pub ell: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Repro {
    Fig3,
    Fig4,
    Fig5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QuantityArg {
    NoiseTotal,
    CrlbSqrt,
    CrlbSqrtLegacy,
    Ratio,
    Fisher,
}

impl From<QuantityArg> for Quantity {
    fn from(q: QuantityArg) -> Self {
        match q {
            QuantityArg::NoiseTotal => Quantity::NoiseTotal,
            QuantityArg::CrlbSqrt => Quantity::CrlbSqrt,
            QuantityArg::CrlbSqrtLegacy => Quantity::CrlbSqrtLegacy,
            QuantityArg::Ratio => Quantity::Ratio,
            QuantityArg::Fisher => Quantity::Fisher,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Canonical grid: m = 1, ell 1→2 m and h 1→3 m (11 points each);
    /// fig3 at P_t = 1 W, fig4 and fig5 at P_t = 1, 5, 10, 15 W (fig5 plots the ratio)
    #[arg(long, value_enum)]
    pub repro: Option<Repro>,
    /// Horizontal distance axis MIN:MAX:STEPS, m [default: 1:2:11]
    #[arg(long, value_parser = parse_axis)]
    pub ell_range: Option<AxisRange>,
    /// Vertical distance axis MIN:MAX:STEPS, m [default: 1:3:11]
    #[arg(long, value_parser = parse_axis)]
    pub h_range: Option<AxisRange>,
    /// Transmitted powers, W (comma separated) [default: effective P_t]
    #[arg(long, value_delimiter = ',')]
    pub p_t_list: Vec<f64>,
    /// Lambertian orders (comma separated) [default: effective m]
    #[arg(long, value_delimiter = ',')]
    pub m_list: Vec<f64>,
    /// Quantity to evaluate [default: crlb_sqrt, or ratio for fig5]
    #[arg(long, value_enum)]
    pub quantity: Option<QuantityArg>,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct MleArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    /// Number of Monte Carlo trials
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Seed of the per-trial random streams
    #[arg(long)]
    pub seed: u64,
    /// Distance tolerance of the estimator, m
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Lower end of the distance search, m [default: h]
    #[arg(long)]
    pub d_lo: Option<f64>,
    /// Upper end of the distance search, m [default: 10 h]
    #[arg(long)]
    pub d_hi: Option<f64>,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct MoptArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    /// Tolerance on m
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Lower end of the searched orders
    #[arg(long, default_value_t = 1.0)]
    pub m_lo: f64,
    /// Upper end of the searched orders
    #[arg(long, default_value_t = 80.0)]
    pub m_hi: f64,
}

fn parse_axis(s: &str) -> std::result::Result<AxisRange, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [min, max, steps] = parts.as_slice() else {
        return Err("expected MIN:MAX:STEPS".into());
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    let steps = steps
        .trim()
        .parse::<usize>()
        .map_err(|e| format!("`{steps}`: {e}"))?;
    Ok(AxisRange::new(num(min)?, num(max)?, steps))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Default,
    File,
    Override,
}

impl Source {
    fn as_str(self) -> &'static str {
        match self {
            Source::Default => "default",
            Source::File => "file",
            Source::Override => "override",
        }
    }
}

/// Effective parameters and where each key's value came from.
#[derive(Debug, Clone)]
pub struct ResolvedParameters {
    pub params: SystemParameters,
    pub sources: Vec<Source>,
}

/// Defaults, then the config file, then `--set`, then `--m`.
pub fn resolve_parameters(common: &CommonArgs) -> Result<ResolvedParameters> {
    let mut params = default_parameters();
    let mut sources = vec![Source::Default; PARAM_KEYS.len()];
    let position = |key: &str| PARAM_KEYS.iter().position(|k| k.key == key).expect("schema key");

    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read config {}: {e}", path.display())))?;
        sysparams::apply_document(&mut params, &text, |key| sources[position(key)] = Source::File)?;
    }
    for item in &common.set {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("--set expects KEY=VALUE, got `{item}`")))?;
        let spec = sysparams::lookup_key(key.trim())?;
        spec.apply(&mut params, value)?;
        sources[position(spec.key)] = Source::Override;
    }
    if let Some(m) = common.m {
        params.lambertian_order = m;
        sources[position("m")] = Source::Override;
    }
    params.validate()?;
    Ok(ResolvedParameters { params, sources })
}

#[derive(Debug, Serialize)]
struct ParamRow {
    key: &'static str,
    value: f64,
    unit: &'static str,
    si_value: f64,
    si_unit: &'static str,
    source: Source,
}

fn render_params(resolved: &ResolvedParameters, format: OutputFormat) -> String {
    let rows: Vec<ParamRow> = PARAM_KEYS
        .iter()
        .zip(&resolved.sources)
        .map(|(k, &source)| ParamRow {
            key: k.key,
            value: k.external_value(&resolved.params),
            unit: k.unit,
            si_value: k.si_value(&resolved.params),
            si_unit: k.si_unit,
            source,
        })
        .collect();
    match format {
        OutputFormat::Json => to_json(&serde_json::json!({ "parameters": rows })),
        OutputFormat::Csv => {
            let mut out = String::from("key,value,unit,si_value,si_unit,source\n");
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.key, r.value, r.unit, r.si_value, r.si_unit, r.source.as_str()
                );
            }
            out
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

/// Two-line CSV (header, values) of a flat JSON object.
fn flat_csv<T: Serialize>(value: &T) -> String {
    let mut fields = Vec::new();
    flatten("", &serde_json::to_value(value).expect("output serializes"), &mut fields);
    let header: Vec<&str> = fields.iter().map(|(k, _)| k.as_str()).collect();
    let values: Vec<&str> = fields.iter().map(|(_, v)| v.as_str()).collect();
    format!("{}\n{}\n", header.join(","), values.join(","))
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut Vec<(String, String)>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        serde_json::Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn render<T: Serialize>(value: &T, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => to_json(value),
        OutputFormat::Csv => flat_csv(value),
    }
}

#[derive(Debug, Serialize)]
struct NoiseReport {
    geometry: Geometry,
    received_power: f64,
    #[serde(flatten)]
    noise: NoiseBreakdown,
}

#[derive(Debug, Serialize)]
struct BoundReport {
    geometry: Geometry,
    #[serde(flatten)]
    bound: BoundResult,
}

#[derive(Debug, Serialize)]
struct MoptReport {
    geometry: Geometry,
    m_lo: f64,
    m_hi: f64,
    tol: f64,
    #[serde(flatten)]
    result: sweep::MOpt,
    /// Closed-form approximation at the incidence angle of the placement.
    approximation: f64,
    relative_deviation: f64,
}

pub fn sweep_spec(args: &SweepArgs, params: &SystemParameters) -> SweepSpec {
    let figure_powers = vec![1.0, 5.0, 10.0, 15.0];
    let (p_t, m, quantity) = match args.repro {
        Some(Repro::Fig3) => (vec![1.0], vec![1.0], Quantity::CrlbSqrt),
        Some(Repro::Fig4) => (figure_powers, vec![1.0], Quantity::CrlbSqrt),
        Some(Repro::Fig5) => (figure_powers, vec![1.0], Quantity::Ratio),
        None => (vec![params.tx_power], vec![params.lambertian_order], Quantity::CrlbSqrt),
    };
    SweepSpec {
        ell_range: args.ell_range.unwrap_or(AxisRange::new(1.0, 2.0, 11)),
        h_range: args.h_range.unwrap_or(AxisRange::new(1.0, 3.0, 11)),
        p_t_list: if args.p_t_list.is_empty() { p_t } else { args.p_t_list.clone() },
        m_list: if args.m_list.is_empty() { m } else { args.m_list.clone() },
        quantity: args.quantity.map(Quantity::from).unwrap_or(quantity),
    }
}

/// Run a parsed invocation and return the rendered output.
pub fn execute(cli: &Cli) -> Result<String> {
    let resolved = resolve_parameters(&cli.common)?;
    let p = &resolved.params;
    let format = cli.common.output;
    log::info!("effective parameters: {p:?}");
    match &cli.command {
        Command::Params => Ok(render_params(&resolved, format)),
        Command::Noise(g) => {
            let geometry = Geometry::new(g.h, g.ell)?;
            let report = NoiseReport {
                geometry,
                received_power: crate::channel::received_power_total(p, &geometry),
                noise: noise::total_noise(p, &geometry)?,
            };
            Ok(render(&report, format))
        }
        Command::Bound(g) => {
            let geometry = Geometry::new(g.h, g.ell)?;
            let bound = bounds::bound_at(p, &geometry)?;
            Ok(render(&BoundReport { geometry, bound }, format))
        }
        Command::Sweep(args) => {
            let spec = sweep_spec(args, p);
            log::info!("sweep spec: {spec:?}");
            let result = sweep::run_sweep(p, &spec).map_err(|e| match e {
                e @ Error::Validation { .. } => e,
                other => Error::Domain(other.to_string()),
            })?;
            Ok(match format {
                OutputFormat::Csv => result.to_csv(),
                OutputFormat::Json => {
                    let mut s = result.to_json();
                    s.push('\n');
                    s
                }
            })
        }
        Command::Mle(args) => {
            let geometry = Geometry::new(args.geometry.h, args.geometry.ell)?;
            let search = SearchInterval::new(
                args.d_lo.unwrap_or(geometry.h),
                args.d_hi.unwrap_or(10.0 * geometry.h),
            );
            log::info!("running {} trials with seed {}", args.trials, args.seed);
            let report = mle::run_monte_carlo(p, &geometry, args.trials, args.seed, search, args.tol)?;
            Ok(render(&report, format))
        }
        Command::Mopt(args) => {
            let geometry = Geometry::new(args.geometry.h, args.geometry.ell)?;
            let result = sweep::find_m_opt(p, &geometry, (args.m_lo, args.m_hi), args.tol)?;
            let approximation = sweep::m_opt_approximation(geometry.incidence_angle())?;
            let report = MoptReport {
                geometry,
                m_lo: args.m_lo,
                m_hi: args.m_hi,
                tol: args.tol,
                result,
                approximation,
                relative_deviation: (approximation - result.m_opt) / result.m_opt,
            };
            Ok(render(&report, format))
        }
    }
}

/// Write `contents` to `path` through a temporary file in the same directory.
pub fn write_atomically(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.common.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();

    let result = execute(&cli).and_then(|out| match &cli.common.out {
        Some(path) => write_atomically(path, &out),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(out.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                1
            } else {
                2
            }
        }
    }
}
