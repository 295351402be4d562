//! Experiment harness behind the `funnel` binary.
//!
//! Every sweep produces one [`Row`] per instance, ε and method. Rows are
//! computed in parallel but returned in a fixed order, and every random
//! draw is seeded from `(master seed, instance index)`, so reruns differ
//! only in the `seconds` column.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use funnel_core::mechanisms::{self, cr_channel, grr, lip_of_secret_aware, oue_channel, Protocol};
use funnel_core::optimal::{self, BundleKind, CERTIFICATE_TOL};
use funnel_core::prob::{sample_jeffreys, sample_uniform_normalised};
use funnel_core::{Error, JointDistribution, Result};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_EPS_GRID: [f64; 4] = [0.5, 1.0, 1.5, 2.0];

/// `(a, c)` pairs of the synthetic GRR/CR comparison.
pub const DEFAULT_SWEEP_SIZES: [(usize, usize); 6] = [(5, 2), (2, 5), (5, 5), (3, 5), (5, 7), (7, 5)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    LdpVsLip,
    LipVsSrlip,
    ProtocolsOnDataset,
    GrrVsCrSynthetic,
    AlphaVsEpsilon,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::LdpVsLip,
        ExperimentKind::LipVsSrlip,
        ExperimentKind::ProtocolsOnDataset,
        ExperimentKind::GrrVsCrSynthetic,
        ExperimentKind::AlphaVsEpsilon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::LdpVsLip => "ldp-vs-lip",
            ExperimentKind::LipVsSrlip => "lip-vs-srlip",
            ExperimentKind::ProtocolsOnDataset => "protocols-on-dataset",
            ExperimentKind::GrrVsCrSynthetic => "grr-vs-cr-synthetic",
            ExperimentKind::AlphaVsEpsilon => "alpha-vs-epsilon",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown experiment {s}")))
    }
}

/// Which synthetic prior family to draw instances from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorFamily {
    #[default]
    Jeffreys,
    Uniform,
}

impl PriorFamily {
    pub fn sample(self, c: usize, a: usize, seed: u64) -> Result<JointDistribution> {
        match self {
            PriorFamily::Jeffreys => sample_jeffreys(c, a, seed),
            PriorFamily::Uniform => sample_uniform_normalised(c, a, seed),
        }
    }

    /// Samples a `c x prod(shape)` joint and attaches the attribute shape
    /// when there is more than one attribute.
    pub fn sample_shaped(self, c: usize, shape: &[usize], seed: u64) -> Result<JointDistribution> {
        let joint = self.sample(c, shape.iter().product(), seed)?;
        if shape.len() > 1 {
            joint.with_shape(shape.to_vec())
        } else {
            Ok(joint)
        }
    }
}

impl FromStr for PriorFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jeffreys" => Ok(PriorFamily::Jeffreys),
            "uniform" => Ok(PriorFamily::Uniform),
            other => Err(Error::InvalidInput(format!("unknown prior family {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub eps_grid: Vec<f64>,
    pub instances: usize,
    pub seed: u64,
    /// Secret alphabet size for single-size experiments.
    pub c: usize,
    /// Data attribute sizes for single-size experiments.
    pub shape: Vec<usize>,
    /// `(a, c)` pairs for the sweeps over alphabet sizes.
    pub sizes: Vec<(usize, usize)>,
    pub family: PriorFamily,
    /// Fixed prior for `protocols-on-dataset`.
    #[serde(skip)]
    pub prior: Option<JointDistribution>,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    /// The default grid for `kind`, sized like the reference runs.
    pub fn new(kind: ExperimentKind, out_dir: impl Into<PathBuf>) -> Self {
        let (instances, c, shape) = match kind {
            ExperimentKind::LdpVsLip => (10, 2, vec![5]),
            ExperimentKind::LipVsSrlip => (10, 2, vec![3, 3, 4]),
            ExperimentKind::ProtocolsOnDataset => (1, 0, vec![]),
            ExperimentKind::GrrVsCrSynthetic | ExperimentKind::AlphaVsEpsilon => (100, 0, vec![]),
        };
        let sizes = match kind {
            ExperimentKind::GrrVsCrSynthetic => DEFAULT_SWEEP_SIZES.to_vec(),
            ExperimentKind::AlphaVsEpsilon => vec![(5, 2), (2, 5), (5, 5)],
            _ => vec![],
        };
        let eps_grid = match kind {
            ExperimentKind::AlphaVsEpsilon => (1..=20).map(|k| k as f64 * 0.25).collect(),
            _ => DEFAULT_EPS_GRID.to_vec(),
        };
        ExperimentConfig {
            kind,
            eps_grid,
            instances,
            seed: 0,
            c,
            shape,
            sizes,
            family: PriorFamily::Jeffreys,
            prior: None,
            out_dir: out_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_grid.is_empty() || self.eps_grid.iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::InvalidInput("epsilon grid must be non-empty with values >= 0".into()));
        }
        match self.kind {
            ExperimentKind::ProtocolsOnDataset if self.prior.is_none() => {
                Err(Error::InvalidInput("protocols-on-dataset needs a prior".into()))
            }
            ExperimentKind::LdpVsLip | ExperimentKind::LipVsSrlip
                if self.c == 0 || self.shape.is_empty() || self.shape.contains(&0) =>
            {
                Err(Error::InvalidInput("alphabet sizes must be positive".into()))
            }
            ExperimentKind::LipVsSrlip if self.shape.len() < 2 => {
                Err(Error::InvalidInput("lip-vs-srlip needs at least two attributes".into()))
            }
            ExperimentKind::GrrVsCrSynthetic | ExperimentKind::AlphaVsEpsilon
                if self.sizes.is_empty() || self.sizes.iter().any(|&(a, c)| a == 0 || c == 0) =>
            {
                Err(Error::InvalidInput("alphabet sizes must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Seed of instance `index` under `master`: the first output of the ChaCha
/// stream numbered `index`.
pub fn instance_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateStatus {
    Pass,
    Fail,
    Error,
}

/// One CSV line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub experiment: String,
    pub instance: usize,
    pub seed: u64,
    pub c: usize,
    pub a: usize,
    /// Attribute sizes joined with `x`, e.g. `3x3x4`.
    pub shape: String,
    pub epsilon: f64,
    pub method: String,
    pub alpha: Option<f64>,
    /// Re-measured leakage in the method's own metric.
    pub leakage: Option<f64>,
    pub utility: Option<f64>,
    pub normalised_utility: Option<f64>,
    pub vertex_count: Option<usize>,
    pub seconds: f64,
    pub certificate: CertificateStatus,
    pub note: String,
}

impl Row {
    /// Row equality ignoring wall-clock time.
    pub fn same_result(&self, other: &Row) -> bool {
        let strip = |r: &Row| Row { seconds: 0.0, ..r.clone() };
        strip(self) == strip(other)
    }
}

/// Mean and sample standard deviation of `normalised_utility` per group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub c: usize,
    pub a: usize,
    pub shape: String,
    pub epsilon: f64,
    pub method: String,
    pub n: usize,
    pub failures: usize,
    pub mean_utility: f64,
    pub mean_normalised_utility: f64,
    pub sd_normalised_utility: f64,
    pub mean_alpha: Option<f64>,
    pub mean_seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<Row>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentOutput {
    pub fn all_certified(&self) -> bool {
        self.rows.iter().all(|r| r.certificate == CertificateStatus::Pass)
    }

    /// Writes `<kind>.csv` and `<kind>_summary.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path, kind: ExperimentKind) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let rows = dir.join(format!("{kind}.csv"));
        let summary = dir.join(format!("{kind}_summary.csv"));
        write_records(&rows, &self.rows)?;
        write_records(&summary, &self.summary)?;
        Ok((rows, summary))
    }
}

fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

fn shape_label(joint: &JointDistribution) -> String {
    match joint.shape() {
        Some(s) => s.iter().map(usize::to_string).collect::<Vec<_>>().join("x"),
        None => joint.a().to_string(),
    }
}

/// What a single method run reports before it becomes a row.
struct Outcome {
    alpha: Option<f64>,
    leakage: f64,
    utility: f64,
    vertex_count: Option<usize>,
    note: String,
}

struct Instance {
    index: usize,
    seed: u64,
    joint: JointDistribution,
}

fn timed<F: FnOnce() -> Result<Outcome>>(f: F) -> (Result<Outcome>, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

fn make_row(kind: ExperimentKind, inst: &Instance, epsilon: f64, method: &str, run: (Result<Outcome>, f64)) -> Row {
    let (outcome, seconds) = run;
    let h = inst.joint.entropy_x();
    let mut row = Row {
        experiment: kind.name().into(),
        instance: inst.index,
        seed: inst.seed,
        c: inst.joint.c(),
        a: inst.joint.a(),
        shape: shape_label(&inst.joint),
        epsilon,
        method: method.into(),
        alpha: None,
        leakage: None,
        utility: None,
        normalised_utility: None,
        vertex_count: None,
        seconds,
        certificate: CertificateStatus::Error,
        note: String::new(),
    };
    match outcome {
        Ok(o) => {
            row.alpha = o.alpha;
            row.leakage = Some(o.leakage);
            row.utility = Some(o.utility);
            row.normalised_utility = Some(if h > 0.0 { o.utility / h } else { 0.0 });
            row.vertex_count = o.vertex_count;
            row.certificate = if o.leakage <= epsilon + CERTIFICATE_TOL {
                CertificateStatus::Pass
            } else {
                CertificateStatus::Fail
            };
            row.note = o.note;
        }
        Err(e) => row.note = format!("{}: {e}", e.kind()),
    }
    row
}

fn run_optimal(kind: BundleKind, joint: &JointDistribution, epsilon: f64) -> Result<Outcome> {
    let (measured, utility, vertex_count, note) = match kind {
        BundleKind::Srlip => {
            // the bundle path re-runs the exhaustive check; reuse the one inside the solution
            let s = optimal::srlip_protocol(joint, epsilon)?;
            let note = if s.composition_held {
                String::new()
            } else {
                format!("budgets rescaled by {}", s.budget_scale)
            };
            (s.check.value, s.utility, s.vertex_count, note)
        }
        _ => {
            let b = optimal::synthesise(kind, joint, epsilon)?;
            (b.certificate.measured, b.utility_nats, b.vertex_count, String::new())
        }
    };
    Ok(Outcome {
        alpha: None,
        leakage: measured,
        utility,
        vertex_count: Some(vertex_count),
        note,
    })
}

/// Solves α for `protocol` at `epsilon` and re-measures the leakage of the
/// explicit channel with the generic evaluator when the alphabet allows it.
pub fn run_protocol(protocol: Protocol, joint: &JointDistribution, epsilon: f64) -> Result<(f64, f64, f64)> {
    let sol = protocol.solve(epsilon, joint)?;
    let alpha = sol.alpha;
    let utility = protocol.utility(alpha, joint)?;
    let measured = match protocol {
        Protocol::Grr => mechanisms::lip_of(&grr(alpha, joint.a())?, joint)?.value,
        Protocol::Cr => lip_of_secret_aware(&cr_channel(alpha, joint)?.channel, joint)?.value,
        Protocol::Oue if joint.a() <= mechanisms::OUE_EXPLICIT_MAX_ALPHABET => {
            mechanisms::lip_of(&oue_channel(alpha, joint.a())?, joint)?.value
        }
        Protocol::Oue => protocol.leakage(alpha, joint)?,
    };
    Ok((alpha, measured, utility))
}

fn protocol_outcome(protocol: Protocol, joint: &JointDistribution, epsilon: f64) -> Result<Outcome> {
    let (alpha, leakage, utility) = run_protocol(protocol, joint, epsilon)?;
    Ok(Outcome {
        alpha: Some(alpha),
        leakage,
        utility,
        vertex_count: None,
        note: String::new(),
    })
}

#[derive(Clone, Copy)]
enum Method {
    Optimal(BundleKind),
    Explicit(Protocol),
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Optimal(BundleKind::Ldp) => "opt-ldp",
            Method::Optimal(BundleKind::Lip) => "opt-lip",
            Method::Optimal(BundleKind::Srlip) => "srlip",
            Method::Explicit(p) => p.name(),
        }
    }

    fn run(self, joint: &JointDistribution, epsilon: f64) -> Result<Outcome> {
        match self {
            Method::Optimal(k) => run_optimal(k, joint, epsilon),
            Method::Explicit(p) => protocol_outcome(p, joint, epsilon),
        }
    }
}

fn methods(kind: ExperimentKind) -> Vec<Method> {
    use Method::*;
    match kind {
        ExperimentKind::LdpVsLip => vec![Optimal(BundleKind::Ldp), Optimal(BundleKind::Lip)],
        ExperimentKind::LipVsSrlip => vec![Optimal(BundleKind::Lip), Optimal(BundleKind::Srlip)],
        ExperimentKind::ProtocolsOnDataset => vec![
            Explicit(Protocol::Grr),
            Explicit(Protocol::Oue),
            Explicit(Protocol::Cr),
            Optimal(BundleKind::Lip),
        ],
        ExperimentKind::GrrVsCrSynthetic | ExperimentKind::AlphaVsEpsilon => {
            vec![Explicit(Protocol::Grr), Explicit(Protocol::Cr)]
        }
    }
}

fn instances(config: &ExperimentConfig) -> Result<Vec<Instance>> {
    if let Some(prior) = &config.prior {
        return Ok(vec![Instance {
            index: 0,
            seed: config.seed,
            joint: prior.clone(),
        }]);
    }
    // one block of `instances` draws per (a, c) pair, or a single block
    let blocks: Vec<(usize, Vec<usize>)> = if config.sizes.is_empty() {
        vec![(config.c, config.shape.clone())]
    } else {
        config.sizes.iter().map(|&(a, c)| (c, vec![a])).collect()
    };
    let mut out = Vec::new();
    for (c, shape) in blocks {
        for index in 0..config.instances {
            let seed = instance_seed(config.seed, out.len() as u64);
            let joint = config.family.sample_shaped(c, &shape, seed)?;
            out.push(Instance { index, seed, joint });
        }
    }
    Ok(out)
}

/// Runs every (instance, ε, method) cell. Failures are kept as rows with
/// certificate `error` and the error in `note`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let instances = instances(config)?;
    let methods = methods(config.kind);
    let mut cells: Vec<(usize, f64, Method)> = Vec::new();
    for i in 0..instances.len() {
        for &e in &config.eps_grid {
            cells.extend(methods.iter().map(|&m| (i, e, m)));
        }
    }
    let rows: Vec<Row> = cells
        .into_par_iter()
        .map(|(i, eps, m)| {
            let inst = &instances[i];
            make_row(config.kind, inst, eps, m.name(), timed(|| m.run(&inst.joint, eps)))
        })
        .collect();
    let summary = summarise(&rows);
    Ok(ExperimentOutput { rows, summary })
}

/// Groups rows by (c, a, shape, ε, method) in first-appearance order.
pub fn summarise(rows: &[Row]) -> Vec<SummaryRow> {
    let mut order: Vec<(usize, usize, String, u64, String)> = Vec::new();
    let mut groups: BTreeMap<(usize, usize, String, u64, String), Vec<&Row>> = BTreeMap::new();
    for r in rows {
        let key = (r.c, r.a, r.shape.clone(), r.epsilon.to_bits(), r.method.clone());
        let g = groups.entry(key.clone()).or_default();
        if g.is_empty() {
            order.push(key);
        }
        g.push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let ok: Vec<&&Row> = g.iter().filter(|r| r.certificate == CertificateStatus::Pass).collect();
            let mean = |f: &dyn Fn(&Row) -> f64| ok.iter().map(|r| f(r)).sum::<f64>() / ok.len().max(1) as f64;
            let mean_norm = mean(&|r| r.normalised_utility.unwrap_or(0.0));
            let var = if ok.len() > 1 {
                ok.iter()
                    .map(|r| (r.normalised_utility.unwrap_or(0.0) - mean_norm).powi(2))
                    .sum::<f64>()
                    / (ok.len() - 1) as f64
            } else {
                0.0
            };
            let alphas: Vec<f64> = ok.iter().filter_map(|r| r.alpha).collect();
            SummaryRow {
                experiment: g[0].experiment.clone(),
                c: key.0,
                a: key.1,
                shape: key.2.clone(),
                epsilon: f64::from_bits(key.3),
                method: key.4.clone(),
                n: g.len(),
                failures: g.len() - ok.len(),
                mean_utility: mean(&|r| r.utility.unwrap_or(0.0)),
                mean_normalised_utility: mean_norm,
                sd_normalised_utility: var.sqrt(),
                mean_alpha: (!alphas.is_empty()).then(|| alphas.iter().sum::<f64>() / alphas.len() as f64),
                mean_seconds: g.iter().map(|r| r.seconds).sum::<f64>() / g.len() as f64,
            }
        })
        .collect()
}

/// Parses `0.5,1,1.5` into a grid.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            let v = if t.eq_ignore_ascii_case("inf") {
                f64::INFINITY
            } else {
                t.parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("not a number: {t}")))?
            };
            if v >= 0.0 {
                Ok(v)
            } else {
                Err(Error::InvalidInput(format!("epsilon must be >= 0, got {t}")))
            }
        })
        .collect()
}

/// Parses `3,3,4` (or `3x3x4`) into attribute sizes.
pub fn parse_shape(s: &str) -> Result<Vec<usize>> {
    s.split([',', 'x'])
        .map(|t| match t.trim().parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(Error::InvalidInput(format!("bad alphabet size {t:?}"))),
        })
        .collect()
}

/// Parses `5:2,2:5` into `(a, c)` pairs.
pub fn parse_sizes(s: &str) -> Result<Vec<(usize, usize)>> {
    s.split(',')
        .map(|t| {
            let bad = || Error::InvalidInput(format!("expected a:c, got {t:?}"));
            let (a, c) = t.trim().split_once(':').ok_or_else(bad)?;
            match (a.parse::<usize>(), c.parse::<usize>()) {
                (Ok(a), Ok(c)) if a > 0 && c > 0 => Ok((a, c)),
                _ => Err(bad()),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_per_index_and_repeat_per_master() {
        let a: Vec<u64> = (0..50).map(|i| instance_seed(7, i)).collect();
        let mut dedup = a.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 50);
        assert_eq!(a, (0..50).map(|i| instance_seed(7, i)).collect::<Vec<_>>());
        assert_ne!(instance_seed(7, 0), instance_seed(8, 0));
    }

    #[test]
    fn parsers() {
        assert_eq!(parse_grid("0.5, 1,inf").unwrap(), vec![0.5, 1.0, f64::INFINITY]);
        assert!(parse_grid("-1").is_err());
        assert!(parse_grid("x").is_err());
        assert_eq!(parse_shape("3x3x4").unwrap(), vec![3, 3, 4]);
        assert_eq!(parse_shape("5").unwrap(), vec![5]);
        assert!(parse_shape("3,0").is_err());
        assert_eq!(parse_sizes("5:2, 2:5").unwrap(), vec![(5, 2), (2, 5)]);
        assert!(parse_sizes("5").is_err());
        assert_eq!("lip-vs-srlip".parse::<ExperimentKind>().unwrap(), ExperimentKind::LipVsSrlip);
    }

    #[test]
    fn summary_statistics() {
        let base = Row {
            experiment: "x".into(),
            instance: 0,
            seed: 0,
            c: 2,
            a: 2,
            shape: "2".into(),
            epsilon: 1.0,
            method: "grr".into(),
            alpha: Some(1.0),
            leakage: Some(0.5),
            utility: Some(0.2),
            normalised_utility: Some(0.2),
            vertex_count: None,
            seconds: 0.0,
            certificate: CertificateStatus::Pass,
            note: String::new(),
        };
        let rows = vec![
            base.clone(),
            Row { normalised_utility: Some(0.4), alpha: Some(3.0), ..base.clone() },
            Row { certificate: CertificateStatus::Error, normalised_utility: None, ..base.clone() },
            Row { method: "cr".into(), ..base.clone() },
        ];
        let s = summarise(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].method.as_str(), s[0].n, s[0].failures), ("grr", 3, 1));
        assert!((s[0].mean_normalised_utility - 0.3).abs() < 1e-15);
        assert!((s[0].sd_normalised_utility - 0.02f64.sqrt()).abs() < 1e-15);
        assert_eq!(s[0].mean_alpha, Some(2.0));
        assert_eq!(s[1].sd_normalised_utility, 0.0);
    }

    #[test]
    fn small_sweep_is_certified_and_ordered() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::GrrVsCrSynthetic, "unused");
        cfg.instances = 3;
        cfg.sizes = vec![(3, 2), (2, 3)];
        cfg.eps_grid = vec![0.5, 1.0];
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.rows.len(), 2 * 3 * 2 * 2);
        assert!(out.all_certified());
        assert_eq!((out.rows[0].a, out.rows[0].c, out.rows[0].method.as_str()), (3, 2, "grr"));
        assert_eq!(out.rows.last().unwrap().a, 2);
        assert_eq!(out.summary.len(), 2 * 2 * 2);
    }

    #[test]
    fn failures_become_rows() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::ProtocolsOnDataset, "unused");
        // OUE cannot handle this alphabet; the other methods still report
        cfg.prior = Some(sample_jeffreys(2, mechanisms::OUE_MAX_ALPHABET + 1, 3).unwrap());
        cfg.eps_grid = vec![1.0];
        let out = run_experiment(&cfg).unwrap();
        let oue = out.rows.iter().find(|r| r.method == "oue").unwrap();
        assert_eq!(oue.certificate, CertificateStatus::Error);
        assert!(oue.note.starts_with("alphabet_too_large"));
        assert!(out.rows.iter().filter(|r| r.method != "oue").all(|r| r.certificate == CertificateStatus::Pass));
    }
}
