use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use funnel_cli::{
    parse_grid, parse_shape, parse_sizes, run_experiment, run_protocol, ExperimentConfig, ExperimentKind, PriorFamily,
};
use funnel_core::data::{self, CategoryCodebook, DatasetSchema, IngestOptions, RowCounts};
use funnel_core::mechanisms::{ldp_of, lip_of, Protocol};
use funnel_core::optimal::{self, BundleKind, ProtocolBundle, CERTIFICATE_TOL};
use funnel_core::{Channel, Error, JointDistribution};
use serde::Serialize;
use serde_json::json;

/// Optimal and explicit local sanitisation protocols for the privacy funnel.
#[derive(Parser)]
#[command(name = "funnel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesise the optimal protocol for a prior and write it as JSON.
    Optimal {
        #[arg(long, value_enum)]
        metric: MetricArg,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epsilon: f64,
    },
    /// Calibrate GRR, OUE or CR to a target LIP level.
    Solve {
        #[arg(long, value_enum)]
        protocol: ProtocolArg,
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with = "eps_grid")]
        epsilon: Option<f64>,
        /// Comma-separated ε values; one result per value.
        #[arg(long)]
        eps_grid: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Also print utilities in bits.
        #[arg(long)]
        bits: bool,
    },
    /// Measure the leakage and utility of a channel or protocol bundle file.
    Eval {
        /// Channel JSON, or a bundle written by `optimal`.
        #[arg(long)]
        channel: PathBuf,
        #[arg(long, value_enum, default_value_t = MetricArg::Lip)]
        metric: MetricArg,
        #[command(flatten)]
        common: Common,
        /// Also report whether the leakage is within this level.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        bits: bool,
    },
    /// Build an empirical prior from a categorical CSV file.
    Ingest {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        secret: String,
        /// Comma-separated data column names.
        #[arg(long, value_delimiter = ',', required = true)]
        data: Vec<String>,
        #[arg(long, default_value_t = ',')]
        delimiter: char,
        #[arg(long, default_value = "?")]
        missing: String,
        /// Pseudo-count added to every cell.
        #[arg(long, default_value_t = 0.0)]
        smoothing: f64,
        /// Encode observed data tuples as one flat alphabet.
        #[arg(long)]
        flatten: bool,
        /// Where to write the prior JSON.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        codebook: Option<PathBuf>,
    },
    /// Run a seeded sweep and write CSV results.
    Experiment {
        #[arg(value_enum)]
        kind: KindArg,
        #[arg(long)]
        eps_grid: Option<String>,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Data attribute sizes, e.g. `5` or `3,3,4`.
        #[arg(long)]
        shape: Option<String>,
        /// Secret alphabet size.
        #[arg(long)]
        secrets: Option<usize>,
        /// `a:c` pairs for the size sweeps, e.g. `5:2,2:5`.
        #[arg(long)]
        sizes: Option<String>,
        #[arg(long, value_enum, default_value_t = FamilyArg::Jeffreys)]
        family: FamilyArg,
        /// Prior JSON for protocols-on-dataset.
        #[arg(long)]
        prior: Option<PathBuf>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Also print every row as JSON lines on stdout.
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Draw a synthetic prior.
    Gen {
        #[arg(long)]
        secrets: usize,
        #[arg(long)]
        shape: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = FamilyArg::Jeffreys)]
        family: FamilyArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Prior JSON (from `gen` or `ingest`).
    #[arg(long)]
    prior: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Ldp,
    Lip,
    Srlip,
}

impl From<MetricArg> for BundleKind {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Ldp => BundleKind::Ldp,
            MetricArg::Lip => BundleKind::Lip,
            MetricArg::Srlip => BundleKind::Srlip,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Grr,
    Oue,
    Cr,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Grr => Protocol::Grr,
            ProtocolArg::Oue => Protocol::Oue,
            ProtocolArg::Cr => Protocol::Cr,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    LdpVsLip,
    LipVsSrlip,
    ProtocolsOnDataset,
    GrrVsCrSynthetic,
    AlphaVsEpsilon,
}

impl From<KindArg> for ExperimentKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::LdpVsLip => ExperimentKind::LdpVsLip,
            KindArg::LipVsSrlip => ExperimentKind::LipVsSrlip,
            KindArg::ProtocolsOnDataset => ExperimentKind::ProtocolsOnDataset,
            KindArg::GrrVsCrSynthetic => ExperimentKind::GrrVsCrSynthetic,
            KindArg::AlphaVsEpsilon => ExperimentKind::AlphaVsEpsilon,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Jeffreys,
    Uniform,
}

impl From<FamilyArg> for PriorFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Jeffreys => PriorFamily::Jeffreys,
            FamilyArg::Uniform => PriorFamily::Uniform,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// A failed certificate: the result is written but the exit code is 2.
#[derive(Debug)]
struct CertificateFailed(String);

impl CertificateFailed {
    fn leakage(measured: f64, epsilon: f64) -> Self {
        CertificateFailed(format!("measured leakage {measured} exceeds {epsilon}"))
    }
}

impl std::fmt::Display for CertificateFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CertificateFailed {}

fn load_prior(path: &PathBuf) -> anyhow::Result<JointDistribution> {
    data::load_json(path).with_context(|| format!("reading prior {}", path.display()))
}

fn emit<T: Serialize>(out: Option<&PathBuf>, value: &T) -> anyhow::Result<()> {
    match out {
        Some(path) => data::save_json(path, value)?,
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

fn bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

fn cmd_optimal(metric: MetricArg, common: &Common, epsilon: f64) -> anyhow::Result<()> {
    let joint = load_prior(&common.prior)?;
    let bundle = optimal::synthesise(metric.into(), &joint, epsilon)?;
    emit(common.out.as_ref(), &bundle)?;
    if !bundle.certificate.passed {
        return Err(CertificateFailed::leakage(bundle.certificate.measured, epsilon).into());
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveRecord {
    protocol: &'static str,
    #[serde(serialize_with = "ser_f64")]
    epsilon: f64,
    #[serde(serialize_with = "ser_f64")]
    alpha: f64,
    /// Leakage re-measured on the calibrated channel.
    #[serde(serialize_with = "ser_f64")]
    leakage: f64,
    utility: f64,
    normalised_utility: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    utility_bits: Option<f64>,
    certificate: bool,
}

fn ser_f64<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    funnel_core::float_serde::serialize(v, s)
}

fn cmd_solve(
    protocol: ProtocolArg,
    common: &Common,
    epsilon: Option<f64>,
    grid: Option<&str>,
    format: Format,
    show_bits: bool,
) -> anyhow::Result<()> {
    let joint = load_prior(&common.prior)?;
    let grid = match (epsilon, grid) {
        (Some(e), None) => vec![e],
        (None, Some(g)) => parse_grid(g)?,
        _ => bail!(Error::InvalidInput("give --epsilon or --eps-grid".into())),
    };
    let protocol = Protocol::from(protocol);
    let h = joint.entropy_x();
    let records = grid
        .iter()
        .map(|&eps| {
            let (alpha, leakage, utility) = run_protocol(protocol, &joint, eps)?;
            Ok(SolveRecord {
                protocol: protocol.name(),
                epsilon: eps,
                alpha,
                leakage,
                utility,
                normalised_utility: if h > 0.0 { utility / h } else { 0.0 },
                utility_bits: show_bits.then(|| bits(utility)),
                certificate: leakage <= eps + CERTIFICATE_TOL,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    match format {
        Format::Json if records.len() == 1 => emit(common.out.as_ref(), &records[0])?,
        Format::Json => emit(common.out.as_ref(), &records)?,
        Format::Csv => {
            let sink: Box<dyn Write> = match &common.out {
                Some(p) => Box::new(std::fs::File::create(p)?),
                None => Box::new(std::io::stdout()),
            };
            let mut w = csv::Writer::from_writer(sink);
            for r in &records {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    if let Some(bad) = records.iter().find(|r| !r.certificate) {
        return Err(CertificateFailed::leakage(bad.leakage, bad.epsilon).into());
    }
    Ok(())
}

fn read_channel(path: &PathBuf) -> anyhow::Result<Channel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(Error::from)?;
    let channel = if value.get("certificate").is_some() {
        serde_json::from_value::<ProtocolBundle>(value).map_err(Error::from)?.channel
    } else {
        serde_json::from_value::<Channel>(value).map_err(Error::from)?
    };
    Ok(channel)
}

fn cmd_eval(path: &PathBuf, metric: MetricArg, common: &Common, epsilon: Option<f64>, show_bits: bool) -> anyhow::Result<()> {
    let joint = load_prior(&common.prior)?;
    let channel = read_channel(path)?;
    let utility = channel.mutual_information(joint.p_x());
    let (report, measured) = match metric {
        MetricArg::Ldp => {
            let r = ldp_of(&channel, &joint)?;
            (serde_json::to_value(&r)?, r.value)
        }
        MetricArg::Lip => {
            let r = lip_of(&channel, &joint)?;
            (serde_json::to_value(&r)?, r.value)
        }
        MetricArg::Srlip => {
            let r = optimal::srlip_check(&channel, &joint, epsilon.unwrap_or(0.0))?;
            (serde_json::to_value(&r)?, r.value)
        }
    };
    let mut out = json!({
        "metric": BundleKind::from(metric),
        "report": report,
        "utility": utility,
        "normalised_utility": if joint.entropy_x() > 0.0 { utility / joint.entropy_x() } else { 0.0 },
    });
    if show_bits {
        out["utility_bits"] = json!(bits(utility));
    }
    if let Some(eps) = epsilon {
        out["within_epsilon"] = json!(measured <= eps + CERTIFICATE_TOL);
    }
    emit(common.out.as_ref(), &out)
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    c: usize,
    a: usize,
    shape: Option<&'a [usize]>,
    rows: RowCounts,
    codebook: &'a CategoryCodebook,
}

#[allow(clippy::too_many_arguments)]
fn cmd_ingest(
    csv: &Path,
    secret: &str,
    columns: &[String],
    delimiter: char,
    missing: &str,
    smoothing: f64,
    flatten: bool,
    out: &PathBuf,
    codebook: Option<&PathBuf>,
) -> anyhow::Result<()> {
    let schema = DatasetSchema {
        path: csv.to_path_buf(),
        secret: secret.into(),
        data: columns.to_vec(),
        delimiter,
        missing: missing.into(),
    };
    let ingested = data::ingest(&schema, IngestOptions { smoothing, flatten }).map_err(|e| match e {
        Error::ZeroMarginal { .. } => anyhow::Error::from(e)
            .context("some attribute combination never occurs; retry with --smoothing or --flatten"),
        e => e.into(),
    })?;
    data::save_json(out, &ingested.joint)?;
    if let Some(path) = codebook {
        data::save_json(path, &ingested.codebook)?;
    }
    let summary = IngestSummary {
        c: ingested.joint.c(),
        a: ingested.joint.a(),
        shape: ingested.joint.shape(),
        rows: ingested.rows,
        codebook: &ingested.codebook,
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_experiment(
    kind: KindArg,
    eps_grid: Option<&str>,
    instances: Option<usize>,
    seed: u64,
    shape: Option<&str>,
    secrets: Option<usize>,
    sizes: Option<&str>,
    family: FamilyArg,
    prior: Option<&PathBuf>,
    out: &PathBuf,
    format: Format,
) -> anyhow::Result<()> {
    let kind = ExperimentKind::from(kind);
    let mut cfg = ExperimentConfig::new(kind, out);
    cfg.seed = seed;
    cfg.family = family.into();
    if let Some(g) = eps_grid {
        cfg.eps_grid = parse_grid(g)?;
    }
    if let Some(n) = instances {
        cfg.instances = n;
    }
    if let Some(s) = shape {
        cfg.shape = parse_shape(s)?;
    }
    if let Some(c) = secrets {
        cfg.c = c;
    }
    if let Some(s) = sizes {
        cfg.sizes = parse_sizes(s)?;
    }
    if let Some(p) = prior {
        cfg.prior = Some(load_prior(p)?);
    }
    let result = run_experiment(&cfg)?;
    let (rows, summary) = result.write_csv(&cfg.out_dir, kind)?;
    if format == Format::Json {
        for r in &result.rows {
            println!("{}", serde_json::to_string(r)?);
        }
    }
    let failed = result.rows.iter().filter(|r| r.certificate != funnel_cli::CertificateStatus::Pass).count();
    eprintln!(
        "{} rows ({} failed) -> {}, {}",
        result.rows.len(),
        failed,
        rows.display(),
        summary.display()
    );
    if failed > 0 {
        bail!(CertificateFailed(format!("{failed} rows without a passing certificate")));
    }
    Ok(())
}

fn cmd_gen(secrets: usize, shape: &str, seed: u64, family: FamilyArg, out: Option<&PathBuf>) -> anyhow::Result<()> {
    let shape = parse_shape(shape)?;
    let joint = PriorFamily::from(family).sample_shaped(secrets, &shape, seed)?;
    emit(out, &joint)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Optimal { metric, common, epsilon } => cmd_optimal(metric, &common, epsilon),
        Command::Solve {
            protocol,
            common,
            epsilon,
            eps_grid,
            format,
            bits,
        } => cmd_solve(protocol, &common, epsilon, eps_grid.as_deref(), format, bits),
        Command::Eval {
            channel,
            metric,
            common,
            epsilon,
            bits,
        } => cmd_eval(&channel, metric, &common, epsilon, bits),
        Command::Ingest {
            csv,
            secret,
            data,
            delimiter,
            missing,
            smoothing,
            flatten,
            out,
            codebook,
        } => cmd_ingest(&csv, &secret, &data, delimiter, &missing, smoothing, flatten, &out, codebook.as_ref()),
        Command::Experiment {
            kind,
            eps_grid,
            instances,
            seed,
            shape,
            secrets,
            sizes,
            family,
            prior,
            out,
            format,
        } => cmd_experiment(
            kind,
            eps_grid.as_deref(),
            instances,
            seed,
            shape.as_deref(),
            secrets,
            sizes.as_deref(),
            family,
            prior.as_ref(),
            &out,
            format,
        ),
        Command::Gen {
            secrets,
            shape,
            seed,
            family,
            out,
        } => cmd_gen(secrets, &shape, seed, family, out.as_ref()),
    }
}

/// 2 for certificate or computational failures, 3 for bad input.
fn exit_code(err: &anyhow::Error) -> (u8, &'static str) {
    if err.downcast_ref::<CertificateFailed>().is_some() {
        return (2, "certificate_failed");
    }
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_computational() => (2, e.kind()),
        Some(e) => (3, e.kind()),
        None => (3, "invalid_input"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind) = exit_code(&err);
            let body = json!({ "error": kind, "message": format!("{err:#}") });
            eprintln!("{body}");
            ExitCode::from(code)
        }
    }
}
