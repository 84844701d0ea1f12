//! The `rvb` command line: exact enumeration, Monte Carlo campaigns, gas
//! closed forms, bound checks and finite-size extrapolation.
//!
//! Reports go to stdout (or `--output`), diagnostics to stderr. Exit status
//! is 0 on success, 2 for invalid input and 3 when a size guard refuses the
//! computation.
//!
//! Seeding: every `mc` chain uses the CLI `--seed` with its own ChaCha
//! stream. For the `i`-th lattice size given (in command-line order) and its
//! `j`-th chain the stream is `i * chains + j`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde::Serialize;

use crate::analysis::{
    anderson_bound, check_bound, extrapolate_with, gas_closed_forms, read_fit_csv, summarize, werner_p_exact,
    AnalysisError, BoundStatus, Chi2Handling, Correlator, FitPoint, FitResult, WernerSummary,
};
use crate::exact::{
    count_nn_coverings_transfer, exact_gas_correlator, exact_orbit_correlators, Ensemble, ExactError, MAX_GAS_N,
};
use crate::lattice::{Boundary, Lattice};
use crate::mc::{run_chains, McConfig, McError, McResult, UpdateMix, CODE_VERSION, RNG_ALGORITHM, SCHEMA_VERSION};
use crate::rational::{to_decimal, to_fraction_string};

/// Digits after the decimal point in printed exact values.
pub const DECIMAL_DIGITS: usize = 15;
/// Coordination number used for bound checks of square-lattice MC results.
pub const SQUARE_LATTICE_Z: i64 = 4;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    ResourceGuard(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::ResourceGuard(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::ResourceGuard(m) => write!(f, "refused: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ExactError> for CliError {
    fn from(e: ExactError) -> Self {
        if e.is_resource_guard() {
            CliError::ResourceGuard(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Validation(e.to_string())
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "rvb", version, about = "Two-site entanglement of RVB states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact nearest-neighbour RVB liquid on a small lattice, per bond orbit.
    Exact(ExactArgs),
    /// Loop Monte Carlo for the RVB liquid on periodic lattices.
    Mc(McArgs),
    /// Closed forms for the bipartite RVB gas, checked by enumeration.
    Gas(GasArgs),
    /// Checks a correlator against the bound for `z` equivalent partners.
    Bound(BoundArgs),
    /// Extrapolates p(L) to the thermodynamic limit.
    Fit(FitArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExactArgs {
    #[arg(long = "L")]
    pub size: usize,
    #[arg(long, default_value = "periodic")]
    pub bc: Boundary,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    /// Linear sizes; repeat the flag or give a comma-separated list.
    #[arg(long = "L", required = true, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    #[arg(long)]
    pub seed: u64,
    /// Measurement sweeps per chain.
    #[arg(long, default_value_t = 1 << 16)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 64)]
    pub bins: usize,
    /// Thermalization sweeps (default max(10^4, 100 L)).
    #[arg(long)]
    pub therm: Option<usize>,
    /// Independent chains per size, merged into one result.
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[arg(long, default_value_t = UpdateMix::default().winding)]
    pub winding_fraction: f64,
    #[arg(long, default_value_t = UpdateMix::default().worm)]
    pub worm_fraction: f64,
    /// Run without winding-changing moves (samples one sector only).
    #[arg(long)]
    pub allow_frozen_winding: bool,
    /// Directory for per-size result JSON and bin CSV files.
    #[arg(long, default_value = "mc_output")]
    pub output_dir: PathBuf,
    /// Also write an `L,p,p_err` table usable by `fit`.
    #[arg(long)]
    pub fit_csv: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GasArgs {
    /// Number of singlets (2N spins).
    #[arg(long = "N")]
    pub n: i64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BoundArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub corr: f64,
    #[arg(long, default_value_t = 0.0)]
    pub err: f64,
    #[arg(long)]
    pub z: i64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// CSV with header `L,p,p_err`.
    #[arg(long)]
    pub input: PathBuf,
    /// Keep the statistical errors even when chi2/dof exceeds 1.
    #[arg(long)]
    pub no_inflate: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

/// An exact rational and its rounded decimal expansion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactValue {
    pub rational: String,
    pub decimal: String,
}

impl ExactValue {
    pub fn new(r: &BigRational) -> Self {
        ExactValue {
            rational: to_fraction_string(r),
            decimal: to_decimal(r, DECIMAL_DIGITS),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitReport {
    pub orbit_index: usize,
    pub size: usize,
    pub distance: f64,
    pub representative: (usize, usize),
    pub bonds: Vec<(usize, usize)>,
    pub uniform: bool,
    pub z: usize,
    pub correlator: ExactValue,
    pub p: ExactValue,
    pub summary: WernerSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactReport {
    pub schema_version: u32,
    pub code_version: String,
    pub command: String,
    pub ensemble: Ensemble,
    #[serde(rename = "L")]
    pub size: usize,
    pub bc: Boundary,
    pub covering_count: usize,
    pub covering_count_transfer: String,
    pub orbits: Vec<OrbitReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GasEnumeration {
    pub pairings: usize,
    pub corr_opposite: ExactValue,
    pub corr_same: Option<ExactValue>,
    pub matches_closed_form: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReportPart {
    pub z: u64,
    pub corr_min: ExactValue,
    pub p_max: ExactValue,
    pub status: BoundStatus,
}

#[derive(Debug, Clone, Serialize)]
pub struct GasReport {
    pub schema_version: u32,
    pub code_version: String,
    pub command: String,
    pub ensemble: Ensemble,
    #[serde(rename = "N")]
    pub n: u64,
    pub n_sites: u64,
    pub corr_opposite: ExactValue,
    pub corr_same: Option<ExactValue>,
    pub p: ExactValue,
    pub enumeration: Option<GasEnumeration>,
    pub bound: BoundReportPart,
    pub summary: WernerSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub schema_version: u32,
    pub code_version: String,
    pub command: String,
    pub corr: f64,
    pub err: f64,
    pub z: u64,
    pub corr_min: ExactValue,
    pub p_max: ExactValue,
    pub status: BoundStatus,
    /// Werner quantities, when the correlator lies in `[-3/4, 0]`.
    pub summary: Option<WernerSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub code_version: String,
    pub command: String,
    pub input: String,
    pub points: Vec<FitPoint>,
    pub fit: FitResult,
    /// Werner quantities at the extrapolated `p`, with the bound for `z = 4`.
    pub summary: WernerSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct McRunReport {
    #[serde(rename = "L")]
    pub size: usize,
    pub chains: usize,
    pub streams: Vec<u64>,
    pub sweeps_per_chain: usize,
    pub corr_mean: f64,
    pub corr_err: f64,
    pub p_mean: f64,
    pub p_err: f64,
    pub tau_int: Option<f64>,
    pub acceptance_plaquette: f64,
    pub acceptance_winding: f64,
    pub acceptance_worm: f64,
    pub sector_histogram: BTreeMap<String, u64>,
    pub summary: WernerSummary,
    pub result_path: String,
    pub bins_path: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub schema_version: u32,
    pub code_version: String,
    pub rng_algorithm: String,
    pub command: String,
    pub seed: u64,
    pub runs: Vec<McRunReport>,
}

/// Parses `args` and runs the command, writing the report to `stdout`.
/// Returns the process exit status.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render();
            let sink: &mut dyn Write = if code == 0 { stdout } else { stderr };
            let _ = write!(sink, "{}", if code == 0 { rendered.to_string() } else { rendered.ansi().to_string() });
            return if code == 0 { 0 } else { 2 };
        }
    };
    match run(&cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: &Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Exact(a) => {
            let report = cmd_exact(a.size, a.bc)?;
            let csv_rows = || exact_csv(&report);
            emit(&a.out, &report, csv_rows, stdout)
        }
        Command::Mc(a) => {
            let report = cmd_mc(a, stderr)?;
            emit(&a.out, &report, || mc_csv(&report), stdout)
        }
        Command::Gas(a) => {
            let report = cmd_gas(a.n)?;
            emit(&a.out, &report, || gas_csv(&report), stdout)
        }
        Command::Bound(a) => {
            let report = cmd_bound(a.corr, a.err, a.z)?;
            emit(&a.out, &report, || bound_csv(&report), stdout)
        }
        Command::Fit(a) => {
            let handling = if a.no_inflate {
                Chi2Handling::Never
            } else {
                Chi2Handling::InflateAboveOne
            };
            let report = cmd_fit(&a.input, handling)?;
            emit(&a.out, &report, || fit_csv(&report), stdout)
        }
    }
}

fn emit<T: Serialize>(
    out: &OutputArgs,
    report: &T,
    csv_text: impl FnOnce() -> String,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let text = match out.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
            s.push('\n');
            s
        }
        Format::Csv => csv_text(),
    };
    match &out.output {
        Some(path) => fs::write(path, text).map_err(|e| io_error(path, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Validation(format!("stdout: {e}"))),
    }
}

fn csv_string<R: Serialize>(rows: impl IntoIterator<Item = R>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
}

pub fn cmd_exact(size: usize, bc: Boundary) -> Result<ExactReport, CliError> {
    let lattice = Lattice::new(size, bc).map_err(|e| CliError::Validation(e.to_string()))?;
    let (enumeration, table) = exact_orbit_correlators(&lattice)?;
    let bonds = lattice.bonds();
    let orbits = table
        .iter()
        .enumerate()
        .map(|(k, oc)| {
            let (i, j) = oc.correlator.pair;
            let z = lattice.equivalent_partner_count(i, j);
            let value = &oc.correlator.value;
            let p = werner_p_exact(value)?;
            Ok(OrbitReport {
                orbit_index: k,
                size: oc.orbit.bonds.len(),
                distance: oc.orbit.distance(),
                representative: (i, j),
                bonds: oc.orbit.bonds.iter().map(|&b| bonds[b].sites()).collect(),
                uniform: oc.uniform,
                z,
                correlator: ExactValue::new(value),
                p: ExactValue::new(&p),
                summary: summarize(&Correlator::Exact(value.clone()), Some(z as i64))?,
            })
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    Ok(ExactReport {
        schema_version: SCHEMA_VERSION,
        code_version: CODE_VERSION.to_string(),
        command: "exact".into(),
        ensemble: Ensemble::NNLiquid,
        size,
        bc,
        covering_count: enumeration.count(),
        covering_count_transfer: count_nn_coverings_transfer(size, bc).to_string(),
        orbits,
    })
}

#[derive(Serialize)]
struct ExactCsvRow<'a> {
    orbit_index: usize,
    size: usize,
    distance: f64,
    i: usize,
    j: usize,
    z: usize,
    corr_rational: &'a str,
    corr_decimal: &'a str,
    p_rational: &'a str,
    p_decimal: &'a str,
    concurrence: f64,
    eof: f64,
    entangled: bool,
}

fn exact_csv(report: &ExactReport) -> String {
    csv_string(report.orbits.iter().map(|o| ExactCsvRow {
        orbit_index: o.orbit_index,
        size: o.size,
        distance: o.distance,
        i: o.representative.0,
        j: o.representative.1,
        z: o.z,
        corr_rational: &o.correlator.rational,
        corr_decimal: &o.correlator.decimal,
        p_rational: &o.p.rational,
        p_decimal: &o.p.decimal,
        concurrence: o.summary.concurrence,
        eof: o.summary.eof,
        entangled: o.summary.entangled,
    }))
}

/// Chain configurations for `args`, following the stream rule in the module
/// documentation.
pub fn mc_configs(args: &McArgs) -> Result<Vec<Vec<McConfig>>, CliError> {
    if args.chains == 0 {
        return Err(CliError::Validation("--chains must be at least 1".into()));
    }
    let plaquette = 1.0 - args.winding_fraction - args.worm_fraction;
    let mut seen = Vec::new();
    args.sizes
        .iter()
        .enumerate()
        .map(|(i, &size)| {
            if seen.contains(&size) {
                return Err(CliError::Validation(format!("L = {size} given twice")));
            }
            seen.push(size);
            (0..args.chains)
                .map(|j| {
                    let cfg = McConfig {
                        size,
                        bc: Boundary::Periodic,
                        seed: args.seed,
                        stream: (i * args.chains + j) as u64,
                        n_therm: args.therm.unwrap_or_else(|| McConfig::default_therm(size)),
                        n_sweeps: args.sweeps,
                        n_bins: args.bins,
                        update_mix: UpdateMix {
                            plaquette,
                            winding: args.winding_fraction,
                            worm: args.worm_fraction,
                        },
                        allow_frozen_winding: args.allow_frozen_winding,
                    };
                    cfg.validate()?;
                    Ok(cfg)
                })
                .collect()
        })
        .collect()
}

pub fn cmd_mc(args: &McArgs, stderr: &mut dyn Write) -> Result<McReport, CliError> {
    let groups = mc_configs(args)?;
    fs::create_dir_all(&args.output_dir).map_err(|e| io_error(&args.output_dir, e))?;
    let flat: Vec<McConfig> = groups.iter().flatten().cloned().collect();
    let mut results = run_chains(&flat).into_iter();

    let mut runs = Vec::new();
    let mut fit_points = Vec::new();
    for group in &groups {
        let size = group[0].size;
        let mut merged: Option<McResult> = None;
        for _ in group {
            let r = results.next().expect("one result per config")?;
            merged = Some(match merged {
                None => r,
                Some(acc) => acc.merge(&r)?,
            });
        }
        let result = merged.expect("at least one chain");
        let json_path = args.output_dir.join(format!("mc_L{size}.json"));
        let bins_path = args.output_dir.join(format!("mc_L{size}_bins.csv"));
        let mut json = serde_json::to_string_pretty(&result).expect("results serialize");
        json.push('\n');
        fs::write(&json_path, json).map_err(|e| io_error(&json_path, e))?;
        fs::write(&bins_path, result.bins_csv()).map_err(|e| io_error(&bins_path, e))?;

        let corr = Correlator::Estimate {
            mean: result.corr_mean,
            err: result.corr_err,
        };
        let summary = summarize(&corr, Some(SQUARE_LATTICE_Z))?;
        let rates = &result.acceptance_rates;
        let _ = writeln!(
            stderr,
            "L={size}: p = {:.6} +- {:.6}, acceptance plaquette {:.3} winding {:.4} worm {:.3}, {} sectors, eof {:.5}, bound {:?}",
            result.p_mean,
            result.p_err,
            rates.plaquette,
            rates.winding,
            rates.worm,
            result.sector_histogram.len(),
            summary.eof,
            summary.bound_status.expect("z given"),
        );
        fit_points.push(FitPoint {
            size,
            p: result.p_mean,
            p_err: result.p_err,
        });
        runs.push(McRunReport {
            size,
            chains: result.chains.len(),
            streams: result.chains.iter().map(|c| c.stream).collect(),
            sweeps_per_chain: args.sweeps,
            corr_mean: result.corr_mean,
            corr_err: result.corr_err,
            p_mean: result.p_mean,
            p_err: result.p_err,
            tau_int: result.tau_int,
            acceptance_plaquette: rates.plaquette,
            acceptance_winding: rates.winding,
            acceptance_worm: rates.worm,
            sector_histogram: result.sector_histogram.clone(),
            summary,
            result_path: json_path.display().to_string(),
            bins_path: bins_path.display().to_string(),
        });
    }
    if let Some(path) = &args.fit_csv {
        fs::write(path, crate::analysis::write_fit_csv(&fit_points)).map_err(|e| io_error(path, e))?;
    }
    Ok(McReport {
        schema_version: SCHEMA_VERSION,
        code_version: CODE_VERSION.to_string(),
        rng_algorithm: RNG_ALGORITHM.to_string(),
        command: "mc".into(),
        seed: args.seed,
        runs,
    })
}

#[derive(Serialize)]
struct McCsvRow {
    #[serde(rename = "L")]
    size: usize,
    chains: usize,
    p: f64,
    p_err: f64,
    corr: f64,
    corr_err: f64,
    tau_int: Option<f64>,
    sectors: usize,
    eof: f64,
    entangled: bool,
    bound_status: Option<BoundStatus>,
}

fn mc_csv(report: &McReport) -> String {
    csv_string(report.runs.iter().map(|r| McCsvRow {
        size: r.size,
        chains: r.chains,
        p: r.p_mean,
        p_err: r.p_err,
        corr: r.corr_mean,
        corr_err: r.corr_err,
        tau_int: r.tau_int,
        sectors: r.sector_histogram.len(),
        eof: r.summary.eof,
        entangled: r.summary.entangled,
        bound_status: r.summary.bound_status,
    }))
}

fn bound_part(corr: &Correlator, z: i64) -> Result<BoundReportPart, AnalysisError> {
    let bound = anderson_bound(z)?;
    Ok(BoundReportPart {
        z: bound.z,
        corr_min: ExactValue::new(&bound.corr_min),
        p_max: ExactValue::new(&bound.p_max),
        status: check_bound(corr, z)?,
    })
}

pub fn cmd_gas(n: i64) -> Result<GasReport, CliError> {
    let forms = gas_closed_forms(n)?;
    let nu = forms.n as usize;
    let enumeration = if nu <= MAX_GAS_N {
        let opposite = exact_gas_correlator(nu, false)?;
        let same = if nu > 1 {
            Some(exact_gas_correlator(nu, true)?.value)
        } else {
            None
        };
        let pairings = (1..=nu).product();
        Some(GasEnumeration {
            pairings,
            matches_closed_form: opposite.value == forms.corr_opposite && same == forms.corr_same,
            corr_opposite: ExactValue::new(&opposite.value),
            corr_same: same.as_ref().map(ExactValue::new),
        })
    } else {
        None
    };
    let corr = Correlator::Exact(forms.corr_opposite.clone());
    Ok(GasReport {
        schema_version: SCHEMA_VERSION,
        code_version: CODE_VERSION.to_string(),
        command: "gas".into(),
        ensemble: Ensemble::BipartiteGas,
        n: forms.n,
        n_sites: 2 * forms.n,
        corr_opposite: ExactValue::new(&forms.corr_opposite),
        corr_same: forms.corr_same.as_ref().map(ExactValue::new),
        p: ExactValue::new(&forms.p),
        enumeration,
        bound: bound_part(&corr, n)?,
        summary: summarize(&corr, Some(n))?,
    })
}

#[derive(Serialize)]
struct GasCsvRow<'a> {
    #[serde(rename = "N")]
    n: u64,
    corr_opposite: &'a str,
    corr_same: Option<&'a str>,
    p_rational: &'a str,
    p_decimal: &'a str,
    enumerated: bool,
    matches_closed_form: Option<bool>,
    entangled: bool,
    bound_status: BoundStatus,
}

fn gas_csv(r: &GasReport) -> String {
    csv_string([GasCsvRow {
        n: r.n,
        corr_opposite: &r.corr_opposite.rational,
        corr_same: r.corr_same.as_ref().map(|v| v.rational.as_str()),
        p_rational: &r.p.rational,
        p_decimal: &r.p.decimal,
        enumerated: r.enumeration.is_some(),
        matches_closed_form: r.enumeration.as_ref().map(|e| e.matches_closed_form),
        entangled: r.summary.entangled,
        bound_status: r.bound.status,
    }])
}

pub fn cmd_bound(corr: f64, err: f64, z: i64) -> Result<BoundReport, CliError> {
    if !corr.is_finite() {
        return Err(CliError::Validation(format!("correlator must be finite, got {corr}")));
    }
    let value = Correlator::Estimate { mean: corr, err };
    let part = bound_part(&value, z)?;
    let summary = match summarize(&value, Some(z)) {
        Ok(s) => Some(s),
        Err(AnalysisError::CorrelatorOutOfRange(_)) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(BoundReport {
        schema_version: SCHEMA_VERSION,
        code_version: CODE_VERSION.to_string(),
        command: "bound".into(),
        corr,
        err,
        z: part.z,
        corr_min: part.corr_min,
        p_max: part.p_max,
        status: part.status,
        summary,
    })
}

#[derive(Serialize)]
struct BoundCsvRow<'a> {
    corr: f64,
    err: f64,
    z: u64,
    corr_min: &'a str,
    p_max: &'a str,
    status: BoundStatus,
}

fn bound_csv(r: &BoundReport) -> String {
    csv_string([BoundCsvRow {
        corr: r.corr,
        err: r.err,
        z: r.z,
        corr_min: &r.corr_min.rational,
        p_max: &r.p_max.rational,
        status: r.status,
    }])
}

pub fn cmd_fit(input: &Path, handling: Chi2Handling) -> Result<FitReport, CliError> {
    let file = fs::File::open(input).map_err(|e| io_error(input, e))?;
    let points = read_fit_csv(file)?;
    let fit = extrapolate_with(&points, handling)?;
    let corr = Correlator::Estimate {
        mean: -0.75 * fit.p_infinity,
        err: 0.75 * fit.p_infinity_err,
    };
    let summary = summarize(&corr, Some(SQUARE_LATTICE_Z))?;
    Ok(FitReport {
        schema_version: SCHEMA_VERSION,
        code_version: CODE_VERSION.to_string(),
        command: "fit".into(),
        input: input.display().to_string(),
        points,
        fit,
        summary,
    })
}

#[derive(Serialize)]
struct FitCsvRow {
    l_min: usize,
    n_points: usize,
    p_infinity: f64,
    p_infinity_err: f64,
    chi2: f64,
    dof: usize,
    chi2_per_dof: f64,
    chosen: bool,
}

fn fit_csv(r: &FitReport) -> String {
    csv_string(r.fit.candidates.iter().map(|c| FitCsvRow {
        l_min: c.l_min,
        n_points: c.n_points,
        p_infinity: c.p_infinity,
        p_infinity_err: c.p_infinity_err,
        chi2: c.chi2,
        dof: c.dof,
        chi2_per_dof: c.chi2_per_dof,
        chosen: c.l_min == r.fit.l_min_used,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = main_with_args(std::iter::once("rvb").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn exact_two_by_two() {
        let r = cmd_exact(2, Boundary::Open).unwrap();
        assert_eq!(r.covering_count, 2);
        assert_eq!(r.covering_count_transfer, "2");
        assert_eq!(r.orbits.len(), 1);
        // Weights 4, 4, 2, 2; the bond is singlet-covered or on the shared loop in all but one pair.
        assert_eq!(r.orbits[0].correlator.rational, "-1/2");
        assert_eq!(r.orbits[0].p.rational, "2/3");
    }

    #[test]
    fn gas_three() {
        let r = cmd_gas(3).unwrap();
        assert_eq!(r.p.rational, "5/9");
        assert_eq!(r.corr_opposite.rational, "-5/12");
        assert!(r.summary.entangled);
        assert!(r.enumeration.unwrap().matches_closed_form);
        assert_eq!(r.bound.status, BoundStatus::Saturated);
    }

    #[test]
    fn bound_example() {
        let r = cmd_bound(-0.29595, 0.0003, 4).unwrap();
        assert_eq!(r.status, BoundStatus::Satisfied);
        assert_eq!(r.corr_min.rational, "-3/8");
        assert!(cmd_bound(0.1, 0.0, 4).unwrap().summary.is_none());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run_args(&["gas", "--N", "0"]).0, 2);
        assert_eq!(run_args(&["exact", "--L", "3", "--bc", "open"]).0, 2);
        assert_eq!(run_args(&["exact", "--L", "8", "--bc", "periodic"]).0, 3);
        assert_eq!(run_args(&["mc", "--L", "4"]).0, 2);
        assert_eq!(run_args(&["bogus"]).0, 2);
        let (code, out, _) = run_args(&["bound", "--corr", "-0.5", "--z", "2"]);
        assert_eq!(code, 0);
        assert!(out.contains("\"Saturated\""));
    }

    #[test]
    fn stream_rule() {
        let cli = Cli::try_parse_from(["rvb", "mc", "--L", "4,6", "--seed", "9", "--chains", "3"]).unwrap();
        let Command::Mc(args) = cli.command else { panic!() };
        let groups = mc_configs(&args).unwrap();
        let streams: Vec<Vec<u64>> = groups.iter().map(|g| g.iter().map(|c| c.stream).collect()).collect();
        assert_eq!(streams, vec![vec![0, 1, 2], vec![3, 4, 5]]);
        assert!(groups.iter().flatten().all(|c| c.seed == 9));
    }
}
