//! Batch front-end: one JSON config in, one JSON or CSV document out.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action_integrals::v_on_gap;
use crate::corpus::{random_corpus, DEFAULT_SEED, DEFAULT_SIZE};
use crate::error::SpectralError;
use crate::hill_floquet::{band_edges, GapCount, SpectrumOptions};
use crate::potential::Potential;
use crate::verify::{
    analyze, hessian_check, identity_report, inequality_report, quadratic_scan, Analysis, ConvexityScan,
    HessianEstimate, IdentityReport, InequalityReport, VerifyOptions,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

const MAX_TOLERANCE: f64 = 1e-3;
const DEFAULT_PROFILE_SAMPLES: usize = 65;

#[derive(Debug, Parser)]
#[command(name = "kdv-spectral", version, about = "Hill spectrum, KdV actions and verification reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file, stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Fixed gap count, overriding the config.
    #[arg(long, global = true)]
    gaps: Option<usize>,
    /// Seed of the random corpus, for configs with a `corpus` block.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Band edges and gap data.
    Spectrum,
    /// Actions and spectral moments.
    Actions,
    /// Identity and inequality reports.
    Verify,
    /// Quadratic-form scan along an amplitude family.
    Scan,
    /// Action-space Hessian of the nonlinear term.
    Hessian,
    /// Samples of v(z + i0) across the open gaps.
    Profile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GapMax {
    Count(usize),
    Keyword(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GapsConfig {
    pub max: GapMax,
    pub tail_rel_tol: f64,
    pub closure_tol: f64,
}

impl Default for GapsConfig {
    fn default() -> Self {
        let s = SpectrumOptions::default();
        GapsConfig {
            max: GapMax::Keyword(AutoKeyword::Auto),
            tail_rel_tol: s.tail_rel_tol,
            closure_tol: s.closure_tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub ode: f64,
    pub root: f64,
    pub quad: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let s = SpectrumOptions::default();
        Tolerances {
            ode: s.ode_tol,
            root: s.root_tol,
            quad: VerifyOptions::default().quad_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub amplitudes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HessianConfig {
    /// Second direction; the first is `potential`.
    pub family_b: PotentialConfig,
    pub a0: f64,
    pub b0: f64,
    /// Defaults to `min(|a0|, |b0|) / 20`.
    #[serde(default)]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub seed: u64,
    pub size: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            seed: DEFAULT_SEED,
            size: DEFAULT_SIZE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub potential: Option<PotentialConfig>,
    #[serde(default)]
    pub gaps: GapsConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub hessian: Option<HessianConfig>,
    #[serde(default)]
    pub profile: Option<ProfileConfig>,
    /// Run `verify` over a random corpus instead of `potential`.
    #[serde(default)]
    pub corpus: Option<CorpusConfig>,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Numerical(SpectralError),
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        CliError::Numerical(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

pub fn parse_config(text: &str) -> std::result::Result<RunConfig, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        format!("{path}: {}", e.into_inner())
    })?;
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> std::result::Result<(), String> {
    let tol_fields = [
        ("gaps.tail_rel_tol", cfg.gaps.tail_rel_tol),
        ("gaps.closure_tol", cfg.gaps.closure_tol),
        ("tolerances.ode", cfg.tolerances.ode),
        ("tolerances.root", cfg.tolerances.root),
        ("tolerances.quad", cfg.tolerances.quad),
    ];
    for (path, v) in tol_fields {
        if !(v > 0.0 && v <= MAX_TOLERANCE) {
            return Err(format!("{path}: {v} not in (0, {MAX_TOLERANCE:e}]"));
        }
    }
    if let GapMax::Count(0) = cfg.gaps.max {
        return Err("gaps.max: must be positive or \"auto\"".into());
    }
    if let Some(p) = &cfg.potential {
        check_potential("potential", p)?;
    }
    if let Some(h) = &cfg.hessian {
        check_potential("hessian.family_b", &h.family_b)?;
        for (path, v) in [("hessian.a0", h.a0), ("hessian.b0", h.b0)] {
            if !v.is_finite() {
                return Err(format!("{path}: not finite"));
            }
        }
        if let Some(step) = h.step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(format!("hessian.step: {step} not positive"));
            }
        }
    }
    if let Some(s) = &cfg.scan {
        if s.amplitudes.is_empty() {
            return Err("scan.amplitudes: empty".into());
        }
        if s.amplitudes.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err("scan.amplitudes: entries must be positive".into());
        }
        if s.amplitudes.windows(2).any(|w| w[1] >= w[0]) {
            return Err("scan.amplitudes: must be strictly descending".into());
        }
    }
    if let Some(p) = &cfg.profile {
        if p.samples < 3 {
            return Err("profile.samples: need at least 3".into());
        }
    }
    Ok(())
}

fn check_potential(path: &str, p: &PotentialConfig) -> std::result::Result<(), String> {
    if p.cos.len() != p.sin.len() {
        return Err(format!("{path}: cos has {} entries, sin has {}", p.cos.len(), p.sin.len()));
    }
    for (name, v) in [("cos", &p.cos), ("sin", &p.sin)] {
        if let Some(i) = v.iter().position(|c| !c.is_finite()) {
            return Err(format!("{path}.{name}[{i}]: not finite"));
        }
    }
    Ok(())
}

fn build_potential(p: &PotentialConfig) -> CliResult<Potential> {
    Ok(Potential::new(p.cos.clone(), p.sin.clone())?)
}

fn verify_options(cfg: &RunConfig, gaps_override: Option<usize>) -> VerifyOptions {
    let gaps = match (gaps_override, cfg.gaps.max) {
        (Some(n), _) | (None, GapMax::Count(n)) => GapCount::Fixed(n),
        (None, GapMax::Keyword(AutoKeyword::Auto)) => GapCount::Auto,
    };
    VerifyOptions {
        spectrum: SpectrumOptions {
            gaps,
            tail_rel_tol: cfg.gaps.tail_rel_tol,
            closure_tol: cfg.gaps.closure_tol,
            ode_tol: cfg.tolerances.ode,
            root_tol: cfg.tolerances.root,
            ..SpectrumOptions::default()
        },
        quad_tol: cfg.tolerances.quad,
        ..VerifyOptions::default()
    }
}

#[derive(Debug, Serialize)]
struct ActionRow {
    n: usize,
    #[serde(rename = "I")]
    i: f64,
    #[serde(rename = "I_arnold")]
    i_arnold: f64,
    #[serde(rename = "V")]
    v: f64,
    nodes: usize,
    converged: bool,
}

#[derive(Debug, Serialize)]
struct Meta {
    version: &'static str,
    tolerances: VerifyOptions,
    tail_rel: f64,
    n_gaps: usize,
}

#[derive(Debug, Serialize)]
struct VerifyDocument {
    spectrum: crate::hill_floquet::BandGapSpectrum,
    actions: Vec<ActionRow>,
    moments: crate::action_integrals::ActionMomentSet,
    identities: IdentityReport,
    inequalities: InequalityReport,
    meta: Meta,
}

fn action_rows(a: &Analysis) -> Vec<ActionRow> {
    a.gaps
        .iter()
        .map(|g| ActionRow {
            n: g.n,
            i: g.action(),
            i_arnold: g.action_arnold(),
            v: g.v_term(),
            nodes: g.nodes,
            converged: g.converged,
        })
        .collect()
}

fn verify_document(a: Analysis, opts: &VerifyOptions) -> CliResult<(VerifyDocument, bool)> {
    let identities = identity_report(&a);
    let inequalities = inequality_report(&a)?;
    let pass = identities.all_pass() && inequalities.all_pass();
    let meta = Meta {
        version: env!("CARGO_PKG_VERSION"),
        tolerances: *opts,
        tail_rel: a.moments.tail_rel,
        n_gaps: a.spectrum.n_gaps,
    };
    let actions = action_rows(&a);
    Ok((
        VerifyDocument {
            spectrum: a.spectrum,
            actions,
            moments: a.moments,
            identities,
            inequalities,
            meta,
        },
        pass,
    ))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization");
    s.push('\n');
    s
}

/// Fixed-width scientific notation with 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// `(n, z, v)` with both edges, the critical point and `samples` Chebyshev
/// points per open gap.
pub fn profile_samples(q: &Potential, spec: &crate::hill_floquet::BandGapSpectrum, samples: usize) -> crate::Result<Vec<(usize, f64, f64)>> {
    let per_gap: Vec<Vec<(usize, f64, f64)>> = spec
        .open_gaps()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|g| {
            let mut zs: Vec<f64> = (0..samples)
                .map(|j| {
                    let t = 0.5 * (1.0 - (std::f64::consts::PI * j as f64 / (samples - 1) as f64).cos());
                    g.z_minus + t * g.g_len
                })
                .collect();
            zs[0] = g.z_minus;
            zs[samples - 1] = g.z_plus;
            zs.push(g.z_crit);
            zs.sort_by(f64::total_cmp);
            zs.dedup();
            zs.into_iter()
                .map(|z| Ok((g.n, z, v_on_gap(q, spec, g.n, z)?)))
                .collect::<crate::Result<Vec<_>>>()
        })
        .collect::<crate::Result<_>>()?;
    Ok(per_gap.into_iter().flatten().collect())
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok((text, pass)) => {
            if let Err(msg) = emit(cli.out.as_deref(), &text) {
                eprintln!("error: {msg}");
                return EXIT_CONFIG;
            }
            if pass {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            EXIT_CONFIG
        }
        Err(CliError::Numerical(e)) => {
            eprintln!("numerical failure: {e}");
            EXIT_NUMERICAL
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> std::result::Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).map_err(|e| e.to_string())
        }
    }
}

fn execute(cli: &Cli) -> CliResult<(String, bool)> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let cfg = parse_config(&text).map_err(CliError::Config)?;
    let opts = verify_options(&cfg, cli.gaps);
    let format = cli.format;
    let potential = || -> CliResult<Potential> {
        match &cfg.potential {
            Some(p) => build_potential(p),
            None => Err(CliError::Config("potential: missing".into())),
        }
    };

    match cli.command {
        Command::Spectrum => {
            let q = potential()?;
            let spec = band_edges(&q, &opts.spectrum)?;
            let text = match format.unwrap_or(Format::Json) {
                Format::Json => to_json(&spec),
                Format::Csv => csv_table(
                    &["n", "closed", "lambda_minus", "lambda_plus", "z_minus", "z_plus", "z_crit", "h"],
                    spec.gaps.iter().map(|g| {
                        vec![
                            g.n.to_string(),
                            g.closed.to_string(),
                            num(g.lambda_minus),
                            num(g.lambda_plus),
                            num(g.z_minus),
                            num(g.z_plus),
                            num(g.z_crit),
                            num(g.h),
                        ]
                    }),
                ),
            };
            Ok((text, true))
        }
        Command::Actions => {
            let a = analyze(&potential()?, &opts)?;
            let text = match format.unwrap_or(Format::Json) {
                Format::Json => to_json(&a.moments),
                Format::Csv => csv_table(
                    &["n", "I", "I_arnold", "V"],
                    action_rows(&a)
                        .into_iter()
                        .map(|r| vec![r.n.to_string(), num(r.i), num(r.i_arnold), num(r.v)]),
                ),
            };
            Ok((text, true))
        }
        Command::Verify => {
            if format == Some(Format::Csv) {
                return Err(CliError::Config("--format: verify emits json only".into()));
            }
            match cfg.corpus {
                Some(mut corpus) => {
                    if let Some(seed) = cli.seed {
                        corpus.seed = seed;
                    }
                    let analyses: Vec<Analysis> = random_corpus(corpus.seed, corpus.size)
                        .iter()
                        .map(|q| analyze(q, &opts))
                        .collect::<crate::Result<_>>()?;
                    let mut docs = Vec::with_capacity(analyses.len());
                    let mut pass = true;
                    for a in analyses {
                        let (doc, ok) = verify_document(a, &opts)?;
                        pass &= ok;
                        docs.push(doc);
                    }
                    Ok((to_json(&docs), pass))
                }
                None => {
                    let (doc, pass) = verify_document(analyze(&potential()?, &opts)?, &opts)?;
                    Ok((to_json(&doc), pass))
                }
            }
        }
        Command::Scan => {
            let q = potential()?;
            let scan = cfg
                .scan
                .as_ref()
                .ok_or_else(|| CliError::Config("scan: missing".into()))?;
            let rows = quadratic_scan(&q, &scan.amplitudes, &opts)?;
            let hessian = match &cfg.hessian {
                Some(h) => Some(run_hessian(&q, h, &opts)?),
                None => None,
            };
            let result = ConvexityScan {
                rows,
                hessian2: hessian.map(|h| h.matrix),
                hessian_pd: hessian.map(|h| h.positive_definite),
            };
            let text = match format.unwrap_or(Format::Csv) {
                Format::Json => to_json(&result),
                Format::Csv => csv_table(
                    &["amplitude", "I_norm_sq", "V", "ratio"],
                    result
                        .rows
                        .iter()
                        .map(|r| vec![num(r.amplitude), num(r.i_norm_sq), num(r.v), num(r.ratio)]),
                ),
            };
            Ok((text, true))
        }
        Command::Hessian => {
            let q = potential()?;
            let h = cfg
                .hessian
                .as_ref()
                .ok_or_else(|| CliError::Config("hessian: missing".into()))?;
            let est = run_hessian(&q, h, &opts)?;
            let text = match format.unwrap_or(Format::Json) {
                Format::Json => to_json(&est),
                Format::Csv => csv_table(
                    &["row", "col0", "col1"],
                    est.matrix
                        .iter()
                        .enumerate()
                        .map(|(i, r)| vec![i.to_string(), num(r[0]), num(r[1])]),
                ),
            };
            Ok((text, true))
        }
        Command::Profile => {
            if format == Some(Format::Json) {
                return Err(CliError::Config("--format: profile emits csv only".into()));
            }
            let q = potential()?;
            let spec = band_edges(&q, &opts.spectrum)?;
            let samples = cfg.profile.map_or(DEFAULT_PROFILE_SAMPLES, |p| p.samples);
            let rows = profile_samples(&q, &spec, samples)?;
            let text = csv_table(
                &["n", "z", "v"],
                rows.into_iter().map(|(n, z, v)| vec![n.to_string(), num(z), num(v)]),
            );
            Ok((text, true))
        }
    }
}

fn run_hessian(q: &Potential, h: &HessianConfig, opts: &VerifyOptions) -> CliResult<HessianEstimate> {
    let b = build_potential(&h.family_b)?;
    let step = h.step.unwrap_or(h.a0.abs().min(h.b0.abs()) / 20.0);
    Ok(hessian_check(q, &b, h.a0, h.b0, step, opts)?)
}
