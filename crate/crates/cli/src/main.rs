//! Command-line front end. Every command renders its output to a string
//! first, so a run is byte-reproducible; file outputs get a timestamped
//! manifest sidecar while the embedded header carries everything except the
//! timestamp.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use subtherm::expsim::{simulate_conditional, ExperimentConfig, SimMode};
use subtherm::homodyne::{
    quadrature_density, sample_quadratures, QuadratureModel, DEFAULT_GRID_STEP,
};
use subtherm::inference::{
    chi2_adequacy, fidelity_diagonal, fit_mu0, mean_photon_report, DiagonalState,
};
use subtherm::photon_stats::{
    build_pmf, build_polya_pmf, moments, polya_moments, polya_pmf_integer, sibling_pmf,
    PolyaParams, SubtractedThermalParams, DEFAULT_TAIL_EPS,
};
use subtherm::urn::{urn_simulate, UrnScheme};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "subtherm",
    version,
    about = "Photon statistics of multimode thermal light after photon subtraction",
    arg_required_else_help = true
)]
struct Cli {
    /// Worker threads for the simulation commands.
    #[arg(long, global = true, env = "SUBTHERM_THREADS")]
    threads: Option<usize>,
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, env = "SUBTHERM_OUT_DIR")]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Photon-number distribution of the observed modes, with moments.
    Pmf(PmfArgs),
    /// How the subtracted photons split across the modes, with moments.
    Polya(PolyaArgs),
    /// Monte Carlo ball drawing compared against the exact distribution.
    Urn(UrnArgs),
    /// Homodyne quadrature density table for plotting.
    Quadrature(QuadratureArgs),
    /// Tap-and-count experiment emitting conditional quadrature samples.
    Simulate(SimulateArgs),
    /// Maximum-likelihood reconstruction of mu0 from a sample file.
    Fit(FitArgs),
    /// Plot-ready data files for the bundled figure reproductions.
    Figures(FiguresArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    /// Draws are independent; the drawn ball goes back unchanged.
    Classical,
    /// The drawn ball is removed.
    Fermion,
    /// The drawn ball goes back with a copy.
    Boson,
}

impl From<SchemeArg> for UrnScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Classical => UrnScheme::WithReturn,
            SchemeArg::Fermion => UrnScheme::WithoutReturn,
            SchemeArg::Boson => UrnScheme::ReturnWithAddition,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Per-mode intensities, a weak tap and a click-count condition.
    Physical,
    /// Direct sampling of the conditioned state.
    Idealized,
}

#[derive(Args)]
struct PmfArgs {
    /// Number of subtracted photons.
    #[arg(long)]
    k: u64,
    /// Number of observed modes.
    #[arg(long)]
    m: u64,
    /// Total number of populated modes.
    #[arg(long = "M")]
    big_m: u64,
    /// Mean photon number per mode before subtraction.
    #[arg(long)]
    mu0: f64,
    /// Probability mass allowed past the truncation point.
    #[arg(long, default_value_t = DEFAULT_TAIL_EPS)]
    tail_eps: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PolyaArgs {
    /// Number of draws (subtracted photons).
    #[arg(long)]
    k: u64,
    /// Red balls (observed modes).
    #[arg(long)]
    m: u64,
    /// Total balls (populated modes).
    #[arg(long = "M")]
    big_m: u64,
    /// Emit exact rational probabilities as p/q strings.
    #[arg(long)]
    exact: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct UrnArgs {
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    #[arg(long)]
    k: u64,
    #[arg(long)]
    m: u64,
    #[arg(long = "M")]
    big_m: u64,
    #[arg(long)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QuadratureArgs {
    #[arg(long)]
    k: u64,
    #[arg(long)]
    m: u64,
    #[arg(long = "M")]
    big_m: u64,
    #[arg(long)]
    mu0: f64,
    /// Spacing of the emitted x grid.
    #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
    grid_step: f64,
    /// Half-width of the emitted grid; defaults to the model's own support.
    #[arg(long)]
    xmax: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Total number of populated modes.
    #[arg(long = "M")]
    big_m: u64,
    /// Click count a group must show to be accepted.
    #[arg(long)]
    k: u64,
    #[arg(long)]
    mu0: f64,
    /// Tap reflectivity.
    #[arg(long = "r", default_value_t = 0.01)]
    reflectivity: f64,
    /// Number of groups to generate.
    #[arg(long)]
    groups: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Physical)]
    mode: ModeArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Sample file: one quadrature per line, # comments ignored.
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    k: u64,
    #[arg(long)]
    m: u64,
    #[arg(long = "M")]
    big_m: u64,
    /// Known generating mu0; adds a fidelity-vs-truth field.
    #[arg(long)]
    truth_mu0: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FiguresArgs {
    /// Which figure reproduction to emit.
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
    which: u8,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

enum CliError {
    Domain(String),
    Io(String),
}

impl From<subtherm::Error> for CliError {
    fn from(e: subtherm::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

#[derive(Serialize, Clone)]
struct ManifestCore {
    command: String,
    parameters: BTreeMap<String, String>,
    seed: u64,
    tool_version: String,
}

#[derive(Serialize)]
struct RunManifest {
    #[serde(flatten)]
    core: ManifestCore,
    timestamp: String,
}

impl ManifestCore {
    fn new(command: &str, seed: u64, parameters: &[(&str, String)]) -> Self {
        Self {
            command: command.to_string(),
            parameters: parameters
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

struct Ctx {
    threads: usize,
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = cli.threads.unwrap_or(1);
    if threads == 0 {
        return Err(CliError::Domain("at least one worker thread is required".into()));
    }
    let ctx = Ctx {
        threads,
        out_dir: cli.out_dir.unwrap_or_else(|| PathBuf::from(".")),
    };
    match &cli.command {
        Command::Pmf(a) => cmd_pmf(&ctx, a),
        Command::Polya(a) => cmd_polya(&ctx, a),
        Command::Urn(a) => cmd_urn(&ctx, a),
        Command::Quadrature(a) => cmd_quadrature(&ctx, a),
        Command::Simulate(a) => cmd_simulate(&ctx, a),
        Command::Fit(a) => cmd_fit(&ctx, a),
        Command::Figures(a) => cmd_figures(&ctx, a),
    }
}

// output plumbing ----------------------------------------------------------

fn manifest_comments(core: &ManifestCore) -> String {
    let mut s = String::new();
    writeln!(s, "# manifest command={}", core.command).unwrap();
    for (key, value) in &core.parameters {
        writeln!(s, "# manifest parameters.{key}={value}").unwrap();
    }
    writeln!(s, "# manifest seed={}", core.seed).unwrap();
    writeln!(s, "# manifest tool_version={}", core.tool_version).unwrap();
    writeln!(s, "# manifest schema_version={SCHEMA_VERSION}").unwrap();
    s
}

fn json_document(core: &ManifestCore, payload: serde_json::Value) -> String {
    let mut doc = serde_json::Map::new();
    doc.insert("schema_version".into(), SCHEMA_VERSION.into());
    doc.insert("manifest".into(), serde_json::to_value(core).expect("manifest serializes"));
    if let serde_json::Value::Object(map) = payload {
        for (k, v) in map {
            doc.insert(k, v);
        }
    }
    let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(doc))
        .expect("document serializes");
    s.push('\n');
    s
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".manifest.json");
    PathBuf::from(os)
}

fn write_with_manifest(path: &Path, content: &str, core: &ManifestCore) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Io(format!("create {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, content)
        .map_err(|e| CliError::Io(format!("write {}: {e}", path.display())))?;
    let manifest = RunManifest {
        core: core.clone(),
        timestamp: chrono::Utc::now().to_rfc3339(),
    };
    let mut body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    body.push('\n');
    let sidecar = sidecar_path(path);
    std::fs::write(&sidecar, body)
        .map_err(|e| CliError::Io(format!("write {}: {e}", sidecar.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn deliver(ctx: &Ctx, out: Option<&Path>, content: &str, core: &ManifestCore) -> Result<(), CliError> {
    match out {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(rel) => {
            let path = if rel.is_absolute() { rel.to_path_buf() } else { ctx.out_dir.join(rel) };
            write_with_manifest(&path, content, core)
        }
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x}")
}

/// Moments block tolerant of the degenerate zero-mean case, where g2 has no
/// value.
struct MomentsBlock {
    mean: f64,
    second_factorial: f64,
    g2: Option<f64>,
    variance: f64,
}

impl MomentsBlock {
    fn comments(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# mean={}", fmt_f(self.mean)).unwrap();
        writeln!(s, "# second_factorial={}", fmt_f(self.second_factorial)).unwrap();
        if let Some(g2) = self.g2 {
            writeln!(s, "# g2={}", fmt_f(g2)).unwrap();
        }
        writeln!(s, "# variance={}", fmt_f(self.variance)).unwrap();
        s
    }

    fn json(&self) -> serde_json::Value {
        serde_json::json!({
            "mean": self.mean,
            "second_factorial": self.second_factorial,
            "g2": self.g2,
            "variance": self.variance,
        })
    }
}

// commands ------------------------------------------------------------------

fn cmd_pmf(ctx: &Ctx, a: &PmfArgs) -> Result<(), CliError> {
    let params = SubtractedThermalParams::new(a.big_m, a.m, a.k, a.mu0)?;
    let pmf = build_pmf(&params, a.tail_eps)?;
    let block = match moments(&params) {
        Ok(m) => MomentsBlock {
            mean: m.mean,
            second_factorial: m.second_factorial,
            g2: Some(m.g2),
            variance: m.variance,
        },
        Err(_) => MomentsBlock { mean: 0.0, second_factorial: 0.0, g2: None, variance: 0.0 },
    };
    let core = ManifestCore::new(
        "pmf",
        0,
        &[
            ("M", a.big_m.to_string()),
            ("k", a.k.to_string()),
            ("m", a.m.to_string()),
            ("mu0", fmt_f(a.mu0)),
            ("tail_eps", fmt_f(a.tail_eps)),
        ],
    );
    let content = match a.format {
        Format::Csv => {
            let mut s = manifest_comments(&core);
            s.push_str(&block.comments());
            writeln!(s, "# tail_bound={}", fmt_f(pmf.tail_bound())).unwrap();
            s.push_str("n,probability\n");
            for (n, &p) in pmf.probabilities().iter().enumerate() {
                writeln!(s, "{n},{}", fmt_f(p)).unwrap();
            }
            s
        }
        Format::Json => {
            let rows: Vec<_> = pmf
                .probabilities()
                .iter()
                .enumerate()
                .map(|(n, &p)| serde_json::json!({"n": n, "probability": p}))
                .collect();
            json_document(
                &core,
                serde_json::json!({
                    "rows": rows,
                    "moments": block.json(),
                    "tail_bound": pmf.tail_bound(),
                }),
            )
        }
    };
    deliver(ctx, a.out.as_deref(), &content, &core)
}

fn cmd_polya(ctx: &Ctx, a: &PolyaArgs) -> Result<(), CliError> {
    let params = PolyaParams::new(a.k, a.m, a.big_m)?;
    let block = if a.k == 0 {
        MomentsBlock { mean: 0.0, second_factorial: 0.0, g2: None, variance: 0.0 }
    } else {
        let m = polya_moments(&params)?;
        MomentsBlock {
            mean: m.mean,
            second_factorial: m.second_factorial,
            g2: Some(m.g2),
            variance: m.variance,
        }
    };
    let exact_column: Option<Vec<BigRational>> = if a.exact {
        Some(if a.m < a.big_m {
            (0..=a.k)
                .map(|j| polya_pmf_integer(j, &params))
                .collect::<Result<_, _>>()?
        } else {
            // every draw is red, so the count is always k
            (0..=a.k)
                .map(|j| if j == a.k { BigRational::one() } else { BigRational::zero() })
                .collect()
        })
    } else {
        None
    };
    let core = ManifestCore::new(
        "polya",
        0,
        &[
            ("M", a.big_m.to_string()),
            ("exact", a.exact.to_string()),
            ("k", a.k.to_string()),
            ("m", a.m.to_string()),
        ],
    );
    let pmf = build_polya_pmf(&params)?;
    let content = match a.format {
        Format::Csv => {
            let mut s = manifest_comments(&core);
            s.push_str(&block.comments());
            s.push_str("j,probability\n");
            match &exact_column {
                Some(col) => {
                    for (j, q) in col.iter().enumerate() {
                        writeln!(s, "{j},{q}").unwrap();
                    }
                }
                None => {
                    for (j, &p) in pmf.probabilities().iter().enumerate() {
                        writeln!(s, "{j},{}", fmt_f(p)).unwrap();
                    }
                }
            }
            s
        }
        Format::Json => {
            let rows: Vec<_> = match &exact_column {
                Some(col) => col
                    .iter()
                    .enumerate()
                    .map(|(j, q)| serde_json::json!({"j": j, "probability": q.to_string()}))
                    .collect(),
                None => pmf
                    .probabilities()
                    .iter()
                    .enumerate()
                    .map(|(j, &p)| serde_json::json!({"j": j, "probability": p}))
                    .collect(),
            };
            json_document(&core, serde_json::json!({"rows": rows, "moments": block.json()}))
        }
    };
    deliver(ctx, a.out.as_deref(), &content, &core)
}

fn cmd_urn(ctx: &Ctx, a: &UrnArgs) -> Result<(), CliError> {
    let scheme: UrnScheme = a.scheme.into();
    let params = PolyaParams::new(a.k, a.m, a.big_m)?;
    let run = urn_simulate(scheme, &params, a.trials, a.seed, ctx.threads)?;
    let mut rows = Vec::with_capacity(run.counts.len());
    for (j, &count) in run.counts.iter().enumerate() {
        let exact = sibling_pmf(scheme, j as u64, &params)?;
        let expected = a.trials as f64 * exact;
        let se = (a.trials as f64 * exact * (1.0 - exact)).sqrt();
        let dev = count as f64 - expected;
        let z = if se > 0.0 {
            dev / se
        } else if dev == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        rows.push((j, count, count as f64 / a.trials as f64, exact, z));
    }
    let core = ManifestCore::new(
        "urn",
        a.seed,
        &[
            ("M", a.big_m.to_string()),
            ("k", a.k.to_string()),
            ("m", a.m.to_string()),
            ("scheme", scheme.label().to_string()),
            ("threads", ctx.threads.to_string()),
            ("trials", a.trials.to_string()),
        ],
    );
    let content = match a.format {
        Format::Csv => {
            let mut s = manifest_comments(&core);
            s.push_str("outcome,count,frequency,exact,z\n");
            for (j, count, freq, exact, z) in &rows {
                writeln!(s, "{j},{count},{},{},{}", fmt_f(*freq), fmt_f(*exact), fmt_f(*z))
                    .unwrap();
            }
            s
        }
        Format::Json => {
            let rows: Vec<_> = rows
                .iter()
                .map(|(j, count, freq, exact, z)| {
                    serde_json::json!({
                        "outcome": j,
                        "count": count,
                        "frequency": freq,
                        "exact": exact,
                        "z": z,
                    })
                })
                .collect();
            json_document(&core, serde_json::json!({"rows": rows}))
        }
    };
    deliver(ctx, a.out.as_deref(), &content, &core)
}

fn quadrature_rows(model: &QuadratureModel, xmax: f64, step: f64) -> Result<Vec<(f64, f64)>, CliError> {
    if !(step > 0.0 && step.is_finite()) || !(xmax > 0.0 && xmax.is_finite()) {
        return Err(CliError::Domain(format!(
            "grid step and half-width must be positive, got step {step} xmax {xmax}"
        )));
    }
    let half = (xmax / step).floor() as i64;
    if half > 2_000_000 {
        return Err(CliError::Domain(format!(
            "grid of {} points is too fine",
            2 * half + 1
        )));
    }
    Ok((-half..=half)
        .map(|i| {
            let x = i as f64 * step;
            (x, quadrature_density(x, model))
        })
        .collect())
}

fn cmd_quadrature(ctx: &Ctx, a: &QuadratureArgs) -> Result<(), CliError> {
    let params = SubtractedThermalParams::new(a.big_m, a.m, a.k, a.mu0)?;
    let model = QuadratureModel::new(build_pmf(&params, DEFAULT_TAIL_EPS)?);
    let xmax = a.xmax.unwrap_or_else(|| model.x_max());
    let rows = quadrature_rows(&model, xmax, a.grid_step)?;
    let core = ManifestCore::new(
        "quadrature",
        0,
        &[
            ("M", a.big_m.to_string()),
            ("grid_step", fmt_f(a.grid_step)),
            ("k", a.k.to_string()),
            ("m", a.m.to_string()),
            ("mu0", fmt_f(a.mu0)),
            ("xmax", fmt_f(xmax)),
        ],
    );
    let content = match a.format {
        Format::Csv => {
            let mut s = manifest_comments(&core);
            writeln!(s, "# convention={}", model.convention()).unwrap();
            s.push_str("x,density\n");
            for (x, d) in &rows {
                writeln!(s, "{},{}", fmt_f(*x), fmt_f(*d)).unwrap();
            }
            s
        }
        Format::Json => {
            let rows: Vec<_> = rows
                .iter()
                .map(|(x, d)| serde_json::json!({"x": x, "density": d}))
                .collect();
            json_document(
                &core,
                serde_json::json!({"rows": rows, "convention": model.convention()}),
            )
        }
    };
    deliver(ctx, a.out.as_deref(), &content, &core)
}

fn cmd_simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<(), CliError> {
    let mode = match a.mode {
        ModeArg::Physical => SimMode::Physical,
        ModeArg::Idealized => SimMode::Idealized,
    };
    let cfg = ExperimentConfig::new(
        a.big_m,
        a.k,
        a.mu0,
        a.reflectivity,
        a.groups,
        mode,
        a.seed,
    )?;
    let set = simulate_conditional(&cfg, ctx.threads)?;
    let core = ManifestCore::new(
        "simulate",
        a.seed,
        &[
            ("M", a.big_m.to_string()),
            ("groups", a.groups.to_string()),
            ("k", a.k.to_string()),
            ("mode", match a.mode { ModeArg::Physical => "physical", ModeArg::Idealized => "idealized" }.to_string()),
            ("mu0", fmt_f(a.mu0)),
            ("r", fmt_f(a.reflectivity)),
            ("threads", ctx.threads.to_string()),
        ],
    );
    let mut s = manifest_comments(&core);
    writeln!(s, "# accepted={}", set.accepted).unwrap();
    writeln!(s, "# generated={}", set.generated).unwrap();
    writeln!(s, "# acceptance_rate={}", fmt_f(set.acceptance_rate)).unwrap();
    writeln!(s, "# empty={}", set.is_empty()).unwrap();
    s.push_str("quadrature\n");
    for x in &set.quadratures {
        writeln!(s, "{}", fmt_f(*x)).unwrap();
    }
    deliver(ctx, Some(a.out.as_path()), &s, &core)
}

fn read_samples(path: &Path) -> Result<Vec<f64>, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("read {}: {e}", path.display())))?;
    let mut samples = Vec::new();
    for line in raw.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.split(',').next().unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) => samples.push(v),
            // tolerate one leading header row
            Err(_) if samples.is_empty() => continue,
            Err(_) => {
                return Err(CliError::Domain(format!(
                    "unparseable sample line {line:?} in {}",
                    path.display()
                )))
            }
        }
    }
    if samples.is_empty() {
        return Err(CliError::Domain(format!("no samples found in {}", path.display())));
    }
    Ok(samples)
}

fn cmd_fit(ctx: &Ctx, a: &FitArgs) -> Result<(), CliError> {
    let samples = read_samples(&a.samples)?;
    let fit = fit_mu0(&samples, a.k, a.m, a.big_m)?;
    let fitted_params = SubtractedThermalParams::new(a.big_m, a.m, a.k, fit.mu0_hat)?;
    let fitted_pmf = build_pmf(&fitted_params, DEFAULT_TAIL_EPS)?;
    let chi2 = if samples.len() >= 500 {
        Some(chi2_adequacy(&samples, &QuadratureModel::new(fitted_pmf.clone()), true)?)
    } else {
        None
    };
    let fidelity = match a.truth_mu0 {
        Some(truth) => {
            let truth_params = SubtractedThermalParams::new(a.big_m, a.m, a.k, truth)?;
            let truth_pmf = build_pmf(&truth_params, DEFAULT_TAIL_EPS)?;
            Some(fidelity_diagonal(
                &DiagonalState::new(truth_pmf),
                &DiagonalState::new(fitted_pmf.clone()),
            ))
        }
        None => None,
    };
    let mut parameters = vec![
        ("M", a.big_m.to_string()),
        ("k", a.k.to_string()),
        ("m", a.m.to_string()),
        ("samples", a.samples.display().to_string()),
    ];
    if let Some(truth) = a.truth_mu0 {
        parameters.push(("truth_mu0", fmt_f(truth)));
    }
    let core = ManifestCore::new("fit", 0, &parameters);
    let content = json_document(
        &core,
        serde_json::json!({
            "fit": fit,
            "chi2": chi2,
            "fidelity_vs_truth": fidelity,
        }),
    );
    deliver(ctx, a.out.as_deref(), &content, &core)
}

const FIGURE2_SETS: [(u64, u64, f64); 3] = [(1, 3, 0.675), (2, 3, 0.644), (3, 3, 0.645)];
const FIGURE2_SAMPLES: usize = 10_000;
const HIST_HALF_WIDTH: f64 = 6.0;
const HIST_BIN_WIDTH: f64 = 0.2;

fn histogram_csv(samples: &[f64], core: &ManifestCore) -> String {
    let bins = (2.0 * HIST_HALF_WIDTH / HIST_BIN_WIDTH).round() as usize;
    let mut counts = vec![0u64; bins];
    let mut dropped = 0u64;
    for &x in samples {
        let idx = ((x + HIST_HALF_WIDTH) / HIST_BIN_WIDTH).floor();
        if idx < 0.0 || idx >= bins as f64 {
            dropped += 1;
        } else {
            counts[idx as usize] += 1;
        }
    }
    let n = samples.len() as f64;
    let mut s = manifest_comments(core);
    writeln!(s, "# samples={}", samples.len()).unwrap();
    writeln!(s, "# dropped={dropped}").unwrap();
    s.push_str("bin_left,bin_right,count,density\n");
    for (i, &count) in counts.iter().enumerate() {
        let left = -HIST_HALF_WIDTH + i as f64 * HIST_BIN_WIDTH;
        let right = left + HIST_BIN_WIDTH;
        let density = count as f64 / (n * HIST_BIN_WIDTH);
        writeln!(s, "{},{},{count},{}", fmt_f(left), fmt_f(right), fmt_f(density)).unwrap();
    }
    s
}

fn cmd_figures(ctx: &Ctx, a: &FiguresArgs) -> Result<(), CliError> {
    match a.which {
        2 => {
            for (i, &(modes, subtracted, mu0)) in FIGURE2_SETS.iter().enumerate() {
                let params = SubtractedThermalParams::new(modes, 1, subtracted, mu0)?;
                let model = QuadratureModel::new(build_pmf(&params, DEFAULT_TAIL_EPS)?);
                let shared = [
                    ("M", modes.to_string()),
                    ("k", subtracted.to_string()),
                    ("m", "1".to_string()),
                    ("mu0", fmt_f(mu0)),
                ];

                let curve_core = ManifestCore::new("figures", a.seed, &shared);
                let rows = quadrature_rows(&model, model.x_max(), DEFAULT_GRID_STEP)?;
                let mut curve = manifest_comments(&curve_core);
                curve.push_str("x,density\n");
                for (x, d) in &rows {
                    writeln!(curve, "{},{}", fmt_f(*x), fmt_f(*d)).unwrap();
                }
                let path = ctx.out_dir.join(format!("fig2_M{modes}_curve.csv"));
                write_with_manifest(&path, &curve, &curve_core)?;

                let mut hist_params = shared.to_vec();
                hist_params.push(("n", FIGURE2_SAMPLES.to_string()));
                let hist_core = ManifestCore::new("figures", a.seed, &hist_params);
                let samples =
                    sample_quadratures(&model, FIGURE2_SAMPLES, a.seed.wrapping_add(i as u64))?;
                let hist = histogram_csv(&samples, &hist_core);
                let path = ctx.out_dir.join(format!("fig2_M{modes}_hist.csv"));
                write_with_manifest(&path, &hist, &hist_core)?;
            }
            Ok(())
        }
        3 => {
            let core = ManifestCore::new("figures", a.seed, &[("which", "3".to_string())]);
            let mut s = manifest_comments(&core);
            s.push_str("modes,subtracted,mu0,mean,pmf_mean\n");
            for &(modes, mu0) in &[(1u64, 0.675), (2, 0.644), (3, 0.645)] {
                let rows = mean_photon_report(&[modes], &[0, 1, 2, 3, 4, 5], mu0)?;
                for row in &rows {
                    writeln!(
                        s,
                        "{},{},{},{},{}",
                        row.modes,
                        row.subtracted,
                        fmt_f(row.mu0),
                        fmt_f(row.mean),
                        fmt_f(row.pmf_mean)
                    )
                    .unwrap();
                }
            }
            let path = ctx.out_dir.join("fig3.csv");
            write_with_manifest(&path, &s, &core)
        }
        _ => unreachable!("clap range guards which"),
    }
}
