//! Channels, leakage evaluators, and the explicit protocols GRR, OUE and
//! Conditional Reporting together with their closed-form leakage and a
//! bisection search for the parameter that meets a target LIP level.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{channel_mutual_information, JointDistribution, MASS_TOL};

/// Largest data alphabet for which OUE is evaluated (2^a outputs).
pub const OUE_MAX_ALPHABET: usize = 20;
/// Largest data alphabet for which the explicit OUE matrix is materialised.
pub const OUE_EXPLICIT_MAX_ALPHABET: usize = 16;

const WITNESS_TOL: f64 = 1e-12;

/// A sanitisation protocol `Q[y][x] = P(Y = y | X = x)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Channel {
    a: usize,
    b: usize,
    labels: Vec<String>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct ChannelRepr {
    a: usize,
    b: usize,
    #[serde(default)]
    labels: Vec<String>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
}

impl Channel {
    /// Validates that `q` is non-negative and column-stochastic.
    pub fn new(q: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (0..q.len()).map(|y| y.to_string()).collect();
        Self::with_labels(q, labels)
    }

    pub fn with_labels(q: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        let b = q.len();
        if b == 0 || q[0].is_empty() {
            return Err(Error::InvalidInput("channel must be non-empty".into()));
        }
        let a = q[0].len();
        if labels.len() != b {
            return Err(Error::DimensionMismatch {
                expected: b,
                got: labels.len(),
            });
        }
        for row in &q {
            if row.len() != a {
                return Err(Error::DimensionMismatch {
                    expected: a,
                    got: row.len(),
                });
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidInput(format!("invalid channel entry {v}")));
            }
        }
        for x in 0..a {
            let col: f64 = q.iter().map(|r| r[x]).sum();
            if (col - 1.0).abs() > MASS_TOL {
                return Err(Error::InvalidInput(format!(
                    "column {x} of the channel sums to {col}"
                )));
            }
        }
        Ok(Channel { a, b, labels, q })
    }

    /// Clamps entries below `floor` to zero, drops all-zero outputs and
    /// rescales every column to unit mass.
    pub fn from_approximate(mut q: Vec<Vec<f64>>, floor: f64) -> Result<Self> {
        for v in q.iter_mut().flatten() {
            if !v.is_finite() {
                return Err(Error::InvalidInput("non-finite channel entry".into()));
            }
            if *v < floor {
                *v = 0.0;
            }
        }
        q.retain(|r| r.iter().any(|&v| v > 0.0));
        let a = q.first().map_or(0, |r| r.len());
        for x in 0..a {
            let col: f64 = q.iter().map(|r| r[x]).sum();
            if col <= 0.0 {
                return Err(Error::InvalidInput(format!("column {x} has no mass")));
            }
            q.iter_mut().for_each(|r| r[x] /= col);
        }
        Self::new(q)
    }

    pub fn identity(a: usize) -> Self {
        let q = (0..a)
            .map(|y| (0..a).map(|x| if x == y { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(q).expect("identity is stochastic")
    }

    /// Single output that every input maps to.
    pub fn constant(a: usize) -> Self {
        Self::new(vec![vec![1.0; a]]).expect("constant channel is stochastic")
    }

    pub fn a(&self) -> usize {
        self.a
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.q
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.q[y][x]
    }

    /// `Q v` for a vector over inputs.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.q
            .iter()
            .map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Sorts outputs in decreasing lexicographic order of their rows and
    /// relabels them `0..b`. Utility and leakage are invariant under this.
    pub fn canonical(&self) -> Channel {
        let mut rows = self.q.clone();
        rows.sort_by(|a, b| crate::polytope::lex_cmp(b, a));
        Channel::new(rows).expect("row permutation keeps the channel stochastic")
    }

    /// I(X;Y) in nats under the input distribution `p_x`.
    pub fn mutual_information(&self, p_x: &[f64]) -> f64 {
        channel_mutual_information(&self.q, p_x)
    }

    /// Product channel `Q^1 x ... x Q^m` on mixed-radix inputs and outputs
    /// (first factor most significant).
    pub fn product(factors: &[Channel]) -> Result<Channel> {
        let mut acc = Channel::new(vec![vec![1.0]])?;
        for f in factors {
            let mut q = vec![vec![0.0; acc.a * f.a]; acc.b * f.b];
            for (y1, r1) in acc.q.iter().enumerate() {
                for (y2, r2) in f.q.iter().enumerate() {
                    let row = &mut q[y1 * f.b + y2];
                    for (x1, v1) in r1.iter().enumerate() {
                        for (x2, v2) in r2.iter().enumerate() {
                            row[x1 * f.a + x2] = v1 * v2;
                        }
                    }
                }
            }
            acc = Channel::from_approximate(q, 0.0)?;
        }
        Ok(acc)
    }
}

impl<'de> Deserialize<'de> for Channel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = ChannelRepr::deserialize(d)?;
        if r.q.len() != r.b || r.q.iter().any(|row| row.len() != r.a) {
            return Err(D::Error::custom("matrix dimensions disagree with a and b"));
        }
        let labels = if r.labels.is_empty() {
            (0..r.b).map(|y| y.to_string()).collect()
        } else {
            r.labels
        };
        Channel::with_labels(r.q, labels).map_err(D::Error::custom)
    }
}

/// A protocol that reads both the data and the secret: `Q[y][x][s]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecretAwareChannel {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<Vec<f64>>>,
}

impl SecretAwareChannel {
    pub fn new(q: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let b = q.len();
        let a = q.first().map_or(0, |r| r.len());
        let c = q.first().and_then(|r| r.first()).map_or(0, |r| r.len());
        if a == 0 || b == 0 || c == 0 {
            return Err(Error::InvalidInput("secret-aware channel must be non-empty".into()));
        }
        if q.iter().any(|r| r.len() != a || r.iter().any(|cell| cell.len() != c)) {
            return Err(Error::InvalidInput("ragged secret-aware channel".into()));
        }
        if q.iter().flatten().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput("invalid channel entry".into()));
        }
        for x in 0..a {
            for s in 0..c {
                let col: f64 = q.iter().map(|r| r[x][s]).sum();
                if (col - 1.0).abs() > MASS_TOL {
                    return Err(Error::InvalidInput(format!(
                        "column (x = {x}, s = {s}) sums to {col}"
                    )));
                }
            }
        }
        Ok(SecretAwareChannel { a, b, c, q })
    }

    /// P(Y = y | S = s) as `[s][y]`.
    pub fn output_given_secret(&self, joint: &JointDistribution) -> Vec<Vec<f64>> {
        let pxs = joint.x_given_s_matrix();
        (0..self.c)
            .map(|s| {
                (0..self.b)
                    .map(|y| (0..self.a).map(|x| self.q[y][x][s] * pxs[s][x]).sum())
                    .collect()
            })
            .collect()
    }

    /// The secret-blind channel P(Y = y | X = x) = sum_s Q[y][x][s] p_{s|x}.
    pub fn marginal_channel(&self, joint: &JointDistribution) -> Result<Channel> {
        let psx = joint.s_given_x_matrix();
        let q = (0..self.b)
            .map(|y| {
                (0..self.a)
                    .map(|x| (0..self.c).map(|s| self.q[y][x][s] * psx[s][x]).sum())
                    .collect()
            })
            .collect();
        Channel::from_approximate(q, 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Ldp,
    Lip,
}

/// A cell achieving the maximal leakage: output `y`, secret `s` and, for
/// LDP, the comparison secret `s_prime`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub y: usize,
    pub s: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_prime: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub metric: Metric,
    /// Measured leakage in nats; `+inf` when some ratio has a zero denominator.
    #[serde(with = "crate::float_serde")]
    pub value: f64,
    pub witnesses: Vec<Witness>,
}

impl PrivacyReport {
    pub fn satisfies(&self, epsilon: f64, tol: f64) -> bool {
        self.value <= epsilon + tol
    }
}

fn collect_max(cells: impl Iterator<Item = (f64, Witness)>, metric: Metric) -> PrivacyReport {
    let cells: Vec<(f64, Witness)> = cells.collect();
    let value = cells.iter().map(|c| c.0).fold(0.0, f64::max);
    let witnesses = cells
        .iter()
        .filter(|(v, _)| {
            if value.is_infinite() {
                v.is_infinite()
            } else {
                *v >= value - WITNESS_TOL
            }
        })
        .map(|c| c.1)
        .collect();
    PrivacyReport {
        metric,
        value,
        witnesses,
    }
}

fn log_ratio(num: f64, den: f64) -> Option<f64> {
    match (num > 0.0, den > 0.0) {
        (false, false) => None,
        (true, false) | (false, true) => Some(f64::INFINITY),
        (true, true) => Some((num / den).ln().abs()),
    }
}

/// LIP leakage from `P(Y|S)` (indexed `[s][y]`) and `P(Y)`; outputs with
/// `P(Y = y) = 0` are skipped.
pub fn lip_from_output_laws(y_given_s: &[Vec<f64>], p_y: &[f64]) -> PrivacyReport {
    let cells = p_y
        .iter()
        .enumerate()
        .filter(|(_, &py)| py > 0.0)
        .flat_map(|(y, &py)| {
            y_given_s.iter().enumerate().filter_map(move |(s, row)| {
                log_ratio(row[y], py).map(|v| (v, Witness { y, s, s_prime: None }))
            })
        });
    collect_max(cells, Metric::Lip)
}

/// LDP leakage from `P(Y|S)` (indexed `[s][y]`): max over y, s != s' of
/// `ln P(y|s)/P(y|s')`, with 0/0 ignored and p/0 infinite.
pub fn ldp_from_output_laws(y_given_s: &[Vec<f64>]) -> PrivacyReport {
    let c = y_given_s.len();
    let b = y_given_s.first().map_or(0, |r| r.len());
    let cells = (0..b).flat_map(|y| {
        (0..c).flat_map(move |s| {
            (0..c).filter(move |&t| t != s).filter_map(move |t| {
                let (num, den) = (y_given_s[s][y], y_given_s[t][y]);
                let v = match (num > 0.0, den > 0.0) {
                    (false, _) => return None,
                    (true, false) => f64::INFINITY,
                    (true, true) => (num / den).ln(),
                };
                Some((v, Witness { y, s, s_prime: Some(t) }))
            })
        })
    });
    collect_max(cells, Metric::Ldp)
}

fn channel_output_laws(q: &Channel, joint: &JointDistribution) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if q.a() != joint.a() {
        return Err(Error::DimensionMismatch {
            expected: joint.a(),
            got: q.a(),
        });
    }
    let y_given_s = joint.x_given_s_matrix().iter().map(|pxs| q.apply(pxs)).collect();
    let p_y = q.apply(joint.p_x());
    Ok((y_given_s, p_y))
}

/// Measured ε-LDP level of a channel with respect to the secret.
pub fn ldp_of(q: &Channel, joint: &JointDistribution) -> Result<PrivacyReport> {
    let (y_given_s, _) = channel_output_laws(q, joint)?;
    Ok(ldp_from_output_laws(&y_given_s))
}

/// Measured ε-LIP level: `max_{y,s} |ln (Q p_{X|s})_y / (Q p_X)_y|`.
pub fn lip_of(q: &Channel, joint: &JointDistribution) -> Result<PrivacyReport> {
    let (y_given_s, p_y) = channel_output_laws(q, joint)?;
    Ok(lip_from_output_laws(&y_given_s, &p_y))
}

fn secret_aware_laws(
    q: &SecretAwareChannel,
    joint: &JointDistribution,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if q.a != joint.a() || q.c != joint.c() {
        return Err(Error::DimensionMismatch {
            expected: joint.a(),
            got: q.a,
        });
    }
    let y_given_s = q.output_given_secret(joint);
    let p_y = (0..q.b)
        .map(|y| (0..q.c).map(|s| joint.p_s()[s] * y_given_s[s][y]).sum())
        .collect();
    Ok((y_given_s, p_y))
}

pub fn lip_of_secret_aware(q: &SecretAwareChannel, joint: &JointDistribution) -> Result<PrivacyReport> {
    let (y_given_s, p_y) = secret_aware_laws(q, joint)?;
    Ok(lip_from_output_laws(&y_given_s, &p_y))
}

pub fn ldp_of_secret_aware(q: &SecretAwareChannel, joint: &JointDistribution) -> Result<PrivacyReport> {
    let (y_given_s, _) = secret_aware_laws(q, joint)?;
    Ok(ldp_from_output_laws(&y_given_s))
}

fn check_alpha(alpha: f64) -> Result<f64> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::InvalidInput(format!("alpha must be >= 0, got {alpha}")));
    }
    // e^{-alpha}; zero for alpha = +inf
    Ok((-alpha).exp())
}

/// Generalised randomised response on `a` symbols.
pub fn grr(alpha: f64, a: usize) -> Result<Channel> {
    let w = check_alpha(alpha)?;
    let norm = 1.0 + (a as f64 - 1.0) * w;
    let q = (0..a)
        .map(|y| (0..a).map(|x| if x == y { 1.0 } else { w } / norm).collect())
        .collect();
    Channel::from_approximate(q, 0.0)
}

/// Closed-form LIP of GRR^α: `max_{x,s} |ln (1+(e^α-1)p_{x|s}) / (1+(e^α-1)p_x)|`.
pub fn lip_grr(alpha: f64, joint: &JointDistribution) -> Result<f64> {
    let w = check_alpha(alpha)?;
    let pxs = joint.x_given_s_matrix();
    let mut worst: f64 = 0.0;
    for row in &pxs {
        for (&cond, &px) in row.iter().zip(joint.p_x()) {
            // (1 + (e^α - 1) p) scaled by e^{-α}
            let num = w + (1.0 - w) * cond;
            let den = w + (1.0 - w) * px;
            worst = worst.max(log_ratio(num, den).unwrap_or(0.0));
        }
    }
    Ok(worst)
}

pub fn grr_utility(alpha: f64, joint: &JointDistribution) -> Result<f64> {
    Ok(grr(alpha, joint.a())?.mutual_information(joint.p_x()))
}

fn check_oue_alphabet(a: usize, max: usize) -> Result<()> {
    if a > max {
        return Err(Error::AlphabetTooLarge { a, max });
    }
    Ok(())
}

/// Probability that OUE^α outputs the subset `mask` given an input inside
/// (`inside = true`) or outside of it. `u = 1/(e^α + 1)`.
fn oue_cell(u: f64, a: usize, size: usize, inside: bool) -> f64 {
    let (ones, zeros) = if inside {
        (size - 1, a - size)
    } else {
        (size, a - 1 - size)
    };
    0.5 * u.powi(ones as i32) * (1.0 - u).powi(zeros as i32)
}

/// The explicit OUE^α matrix with rows indexed by subsets (bit `x` set
/// iff `x` is in the output set).
pub fn oue_channel(alpha: f64, a: usize) -> Result<Channel> {
    let w = check_alpha(alpha)?;
    check_oue_alphabet(a, OUE_EXPLICIT_MAX_ALPHABET)?;
    let u = w / (1.0 + w);
    let rows = 1usize << a;
    let mut q = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    for mask in 0..rows {
        let size = mask.count_ones() as usize;
        q.push(
            (0..a)
                .map(|x| oue_cell(u, a, size, mask >> x & 1 == 1))
                .collect(),
        );
        let members: Vec<String> = (0..a).filter(|x| mask >> x & 1 == 1).map(|x| x.to_string()).collect();
        labels.push(format!("{{{}}}", members.join(",")));
    }
    Channel::with_labels(q, labels)
}

/// Precomputed subset sums for evaluating OUE without materialising its matrix.
pub struct OueEvaluator<'a> {
    joint: &'a JointDistribution,
    /// `sums[0]` holds sums of p_x over each subset, `sums[1 + s]` of p_{x|s}.
    sums: Vec<Vec<f64>>,
}

impl<'a> OueEvaluator<'a> {
    pub fn new(joint: &'a JointDistribution) -> Result<Self> {
        let a = joint.a();
        check_oue_alphabet(a, OUE_MAX_ALPHABET)?;
        let mut vectors = vec![joint.p_x().to_vec()];
        vectors.extend(joint.x_given_s_matrix());
        let sums = vectors
            .iter()
            .map(|v| {
                let mut out = vec![0.0; 1 << a];
                for mask in 1usize..1 << a {
                    let low = mask.trailing_zeros() as usize;
                    out[mask] = out[mask & (mask - 1)] + v[low];
                }
                out
            })
            .collect();
        Ok(OueEvaluator { joint, sums })
    }

    /// `max_{y,s} |ln (1+(e^α-1) sum_{x in y} p_{x|s}) / (1+(e^α-1) sum_{x in y} p_x)|`.
    pub fn lip(&self, alpha: f64) -> Result<f64> {
        let w = check_alpha(alpha)?;
        let mut worst: f64 = 0.0;
        let marg = &self.sums[0];
        for cond in &self.sums[1..] {
            for (&m, &cs) in marg.iter().zip(cond) {
                let num = w + (1.0 - w) * cs;
                let den = w + (1.0 - w) * m;
                worst = worst.max(log_ratio(num, den).unwrap_or(0.0));
            }
        }
        Ok(worst)
    }

    /// I(X;Y) for Y = OUE^α(X).
    pub fn utility(&self, alpha: f64) -> Result<f64> {
        let w = check_alpha(alpha)?;
        let a = self.joint.a();
        let u = w / (1.0 + w);
        let mut mi = 0.0;
        for (mask, &mass) in self.sums[0].iter().enumerate() {
            let size = mask.count_ones() as usize;
            // P(y) = Q_out(y) e^{α} (w (1 - B) + B) with B the subset mass
            let scale = w * (1.0 - mass) + mass;
            if size > 0 {
                let q_in = oue_cell(u, a, size, true);
                if q_in > 0.0 && mass > 0.0 {
                    mi += mass * q_in * (1.0 / scale).ln();
                }
            }
            if size < a {
                let q_out = oue_cell(u, a, size, false);
                if q_out > 0.0 {
                    let ratio = if mass == 0.0 { 1.0 } else { w / scale };
                    if ratio > 0.0 {
                        mi += (1.0 - mass) * q_out * ratio.ln();
                    }
                }
            }
        }
        Ok(mi.max(0.0))
    }
}

/// `(LIP(OUE^α), I(X;Y))`.
pub fn oue_leakage_and_utility(alpha: f64, joint: &JointDistribution) -> Result<(f64, f64)> {
    let ev = OueEvaluator::new(joint)?;
    Ok((ev.lip(alpha)?, ev.utility(alpha)?))
}

/// Conditional Reporting as a secret-aware channel plus its induced output laws.
#[derive(Clone, Debug, PartialEq)]
pub struct CrChannel {
    pub channel: SecretAwareChannel,
    /// P(Y = y | S = s) as `[s][y]`, from the closed form.
    pub y_given_s: Vec<Vec<f64>>,
    /// P(Y = y), from the closed form.
    pub p_y: Vec<f64>,
}

/// Builds CR^α: `Q_{y|x,s} = (e^α 1{y=x} + sum_{s' != s} p_{y|s'}) / (e^α + c - 1)`.
pub fn cr_channel(alpha: f64, joint: &JointDistribution) -> Result<CrChannel> {
    let w = check_alpha(alpha)?;
    let (a, c) = (joint.a(), joint.c());
    let pxs = joint.x_given_s_matrix();
    let norm = 1.0 + (c as f64 - 1.0) * w;
    let col_sum: Vec<f64> = (0..a).map(|y| pxs.iter().map(|r| r[y]).sum()).collect();
    let q = (0..a)
        .map(|y| {
            (0..a)
                .map(|x| {
                    (0..c)
                        .map(|s| {
                            let keep = if x == y { 1.0 } else { 0.0 };
                            (keep + w * (col_sum[y] - pxs[s][y])) / norm
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let y_given_s = (0..c)
        .map(|s| {
            (0..a)
                .map(|y| ((1.0 - w) * pxs[s][y] + w * col_sum[y]) / norm)
                .collect()
        })
        .collect();
    let p_y = (0..a)
        .map(|y| ((1.0 - w) * joint.p_x()[y] + w * col_sum[y]) / norm)
        .collect();
    let channel = SecretAwareChannel::new(fix_columns(q))?;
    Ok(CrChannel {
        channel,
        y_given_s,
        p_y,
    })
}

/// Rescales each (x, s) column of a secret-aware tensor to unit mass.
fn fix_columns(mut q: Vec<Vec<Vec<f64>>>) -> Vec<Vec<Vec<f64>>> {
    let a = q[0].len();
    let c = q[0][0].len();
    for x in 0..a {
        for s in 0..c {
            let total: f64 = q.iter().map(|r| r[x][s]).sum();
            q.iter_mut().for_each(|r| r[x][s] /= total);
        }
    }
    q
}

/// L(α), the exact LIP level of CR^α.
pub fn cr_lip(alpha: f64, joint: &JointDistribution) -> Result<f64> {
    let w = check_alpha(alpha)?;
    let pxs = joint.x_given_s_matrix();
    let mut worst: f64 = 0.0;
    for x in 0..joint.a() {
        let col: f64 = pxs.iter().map(|r| r[x]).sum();
        let den = (1.0 - w) * joint.p_x()[x] + w * col;
        for row in &pxs {
            let num = (1.0 - w) * row[x] + w * col;
            worst = worst.max(log_ratio(num, den).unwrap_or(0.0));
        }
    }
    Ok(worst)
}

/// I(X;Y) for Y = CR^α(X, S).
pub fn cr_utility(alpha: f64, joint: &JointDistribution) -> Result<f64> {
    let cr = cr_channel(alpha, joint)?;
    Ok(cr.channel.marginal_channel(joint)?.mutual_information(joint.p_x()))
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroProbabilityEvent("sampling from zero mass".into()));
    }
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return Ok(i);
        }
        u -= w;
    }
    Ok(weights.iter().rposition(|&w| w > 0.0).unwrap_or(0))
}

/// One run of Conditional Reporting on the record `(s, x)`.
pub fn cr_sample<R: Rng + ?Sized>(
    alpha: f64,
    joint: &JointDistribution,
    s: usize,
    x: usize,
    rng: &mut R,
) -> Result<usize> {
    let w = check_alpha(alpha)?;
    let c = joint.c();
    if s >= c || x >= joint.a() {
        return Err(Error::InvalidInput(format!("record ({s}, {x}) out of range")));
    }
    let keep = 1.0 / (1.0 + (c as f64 - 1.0) * w);
    let fake = if c == 1 || rng.random::<f64>() < keep {
        s
    } else {
        // uniform over the other c - 1 secrets
        let k = rng.random_range(0..c - 1);
        if k >= s {
            k + 1
        } else {
            k
        }
    };
    if fake == s {
        Ok(x)
    } else {
        sample_index(&joint.x_given_s(fake)?, rng)
    }
}

/// Explicit protocols that can be tuned to a target LIP level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Grr,
    Oue,
    Cr,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Grr => "grr",
            Protocol::Oue => "oue",
            Protocol::Cr => "cr",
        }
    }

    pub fn leakage(self, alpha: f64, joint: &JointDistribution) -> Result<f64> {
        match self {
            Protocol::Grr => lip_grr(alpha, joint),
            Protocol::Oue => OueEvaluator::new(joint)?.lip(alpha),
            Protocol::Cr => cr_lip(alpha, joint),
        }
    }

    pub fn utility(self, alpha: f64, joint: &JointDistribution) -> Result<f64> {
        match self {
            Protocol::Grr => grr_utility(alpha, joint),
            Protocol::Oue => OueEvaluator::new(joint)?.utility(alpha),
            Protocol::Cr => cr_utility(alpha, joint),
        }
    }

    /// Largest α whose leakage does not exceed `target`.
    pub fn solve(self, target: f64, joint: &JointDistribution) -> Result<AlphaSolution> {
        match self {
            Protocol::Oue => {
                let ev = OueEvaluator::new(joint)?;
                solve_alpha(target, |a| ev.lip(a))
            }
            _ => solve_alpha(target, |a| self.leakage(a, joint)),
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "grr" => Ok(Protocol::Grr),
            "oue" => Ok(Protocol::Oue),
            "cr" => Ok(Protocol::Cr),
            other => Err(Error::InvalidInput(format!("unknown protocol {other}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaSolution {
    /// `+inf` when the leakage never reaches the target.
    #[serde(with = "crate::float_serde")]
    pub alpha: f64,
    #[serde(with = "crate::float_serde")]
    pub leakage: f64,
}

const MONOTONE_TOL: f64 = 1e-9;
const ALPHA_CEILING: f64 = 1e4;
const BISECTION_STEPS: usize = 200;

/// Bracketing-and-bisection for `leakage(α) = target` on a leakage curve
/// that starts at `leakage(0) <= target` and is expected to be
/// non-decreasing. Returns the upper end of `{α : leakage(α) <= target}`,
/// or `α = +inf` when the curve saturates below the target.
pub fn solve_alpha<F>(target: f64, leakage: F) -> Result<AlphaSolution>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(target >= 0.0) {
        return Err(Error::InvalidInput(format!("target must be >= 0, got {target}")));
    }
    let mut lo = 0.0;
    let mut l_lo = leakage(lo)?;
    if l_lo > target + MONOTONE_TOL {
        return Err(Error::InvalidInput(format!(
            "leakage at alpha = 0 is {l_lo}, above the target {target}"
        )));
    }
    let non_monotone = |alpha_lo: f64, alpha_hi: f64, before: f64, after: f64| {
        Error::NonMonotoneDetected {
            alpha_lo,
            alpha_hi,
            before,
            after,
        }
    };
    let mut hi = 1.0;
    let mut l_hi = leakage(hi)?;
    if l_hi < l_lo - MONOTONE_TOL {
        return Err(non_monotone(lo, hi, l_lo, l_hi));
    }
    while l_hi < target {
        if hi > ALPHA_CEILING {
            let at_inf = leakage(f64::INFINITY)?;
            return Ok(AlphaSolution {
                alpha: f64::INFINITY,
                leakage: at_inf,
            });
        }
        lo = hi;
        l_lo = l_hi;
        hi *= 2.0;
        l_hi = leakage(hi)?;
        if l_hi < l_lo - MONOTONE_TOL {
            return Err(non_monotone(lo, hi, l_lo, l_hi));
        }
    }
    if l_lo >= target {
        return Ok(AlphaSolution {
            alpha: lo,
            leakage: l_lo,
        });
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let l_mid = leakage(mid)?;
        if l_mid < l_lo - MONOTONE_TOL {
            return Err(non_monotone(lo, mid, l_lo, l_mid));
        }
        if l_mid > l_hi + MONOTONE_TOL {
            return Err(non_monotone(mid, hi, l_mid, l_hi));
        }
        if l_mid <= target {
            lo = mid;
            l_lo = l_mid;
        } else {
            hi = mid;
            l_hi = l_mid;
        }
        if target - l_lo <= 1e-13 {
            break;
        }
    }
    Ok(AlphaSolution {
        alpha: lo,
        leakage: l_lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{entropy, mutual_information, pushforward, sample_jeffreys, sample_uniform_normalised};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag() -> JointDistribution {
        JointDistribution::new(vec![vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap()
    }

    fn correlated() -> JointDistribution {
        JointDistribution::new(vec![vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap()
    }

    fn independent(c: usize, a: usize) -> JointDistribution {
        JointDistribution::new(vec![vec![1.0 / (c * a) as f64; a]; c]).unwrap()
    }

    #[test]
    fn grr_examples() {
        let g = grr(0.0, 4).unwrap();
        assert!(g.rows().iter().flatten().all(|&v| (v - 0.25).abs() < 1e-15));
        let g = grr(50.0, 2).unwrap();
        assert!((g.get(0, 0) - 1.0).abs() < 1e-20 && g.get(1, 0) < 1e-20);
        let g = grr(3f64.ln(), 2).unwrap();
        assert_abs_diff_eq!(g.get(0, 0), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(g.get(1, 0), 0.25, epsilon = 1e-15);
        assert_eq!(grr(f64::INFINITY, 3).unwrap(), Channel::identity(3));
        assert!(grr(-1.0, 2).is_err());
    }

    #[test]
    fn pushforward_examples() {
        let j = correlated();
        let id = pushforward(&Channel::identity(2), &j).unwrap();
        assert_eq!(id.y_s, vec![vec![0.4, 0.1], vec![0.1, 0.4]]);
        let k = pushforward(&Channel::constant(2), &j).unwrap();
        assert_eq!(k.y_s.len(), 1);
        assert_abs_diff_eq!(k.y_s[0][0], 0.5, epsilon = 1e-15);
        let g = pushforward(&grr(3f64.ln(), 2).unwrap(), &diag()).unwrap();
        for (row, want) in g.y_s.iter().zip([[0.375, 0.125], [0.125, 0.375]]) {
            for (v, w) in row.iter().zip(want) {
                assert_abs_diff_eq!(*v, w, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn ldp_examples() {
        let j = correlated();
        assert_abs_diff_eq!(ldp_of(&Channel::constant(2), &j).unwrap().value, 0.0, epsilon = 1e-15);
        let id = ldp_of(&Channel::identity(2), &diag()).unwrap();
        assert!(id.value.is_infinite());
        // P(Y|S=0) = Q (0.8, 0.2) = (0.65, 0.35)
        let r = ldp_of(&grr(3f64.ln(), 2).unwrap(), &j).unwrap();
        assert_abs_diff_eq!(r.value, (0.65f64 / 0.35).ln(), epsilon = 1e-12);
        assert_eq!(r.witnesses.len(), 2);
    }

    #[test]
    fn lip_examples() {
        assert_abs_diff_eq!(lip_of(&Channel::constant(2), &correlated()).unwrap().value, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lip_of(&Channel::identity(3), &independent(2, 3)).unwrap().value, 0.0, epsilon = 1e-15);
        let r = lip_of(&grr(3f64.ln(), 2).unwrap(), &diag()).unwrap();
        assert_abs_diff_eq!(r.value, 2f64.ln(), epsilon = 1e-12);
        assert!(r.satisfies(2f64.ln(), 1e-9));
    }

    #[test]
    fn unreachable_outputs_carry_no_leakage() {
        let q = Channel::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let r = lip_of(&q, &correlated()).unwrap();
        assert!(r.witnesses.iter().all(|w| w.y < 2));
    }

    #[test]
    fn lip_grr_examples() {
        let j = sample_jeffreys(3, 4, 5).unwrap();
        assert_eq!(lip_grr(0.0, &j).unwrap(), 0.0);
        assert_abs_diff_eq!(lip_grr(2.3, &independent(3, 4)).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(lip_grr(3f64.ln(), &diag()).unwrap(), 2f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn oue_examples() {
        let (l, _) = oue_leakage_and_utility(1.7, &independent(2, 4)).unwrap();
        assert_abs_diff_eq!(l, 0.0, epsilon = 1e-14);
        // oracle: enumerate the four subsets of {0, 1} and sum I(X;Y) directly
        let q = oue_channel(3f64.ln(), 2).unwrap();
        let p_x = [0.5, 0.5];
        let joint: Vec<Vec<f64>> = q.rows().iter().map(|r| vec![r[0] * p_x[0], r[1] * p_x[1]]).collect();
        let direct = mutual_information(&joint);
        assert_abs_diff_eq!(direct, 0.375 * 1.5f64.ln() - 0.125 * 2f64.ln(), epsilon = 1e-15);
        let (_, u) = oue_leakage_and_utility(3f64.ln(), &diag()).unwrap();
        assert_abs_diff_eq!(u, direct, epsilon = 1e-14);
        assert_abs_diff_eq!(u, 0.065406, epsilon = 1e-6);
        assert!(matches!(
            OueEvaluator::new(&sample_jeffreys(1, 21, 0).unwrap()),
            Err(Error::AlphabetTooLarge { a: 21, max: 20 })
        ));
    }

    #[test]
    fn oue_large_alpha_keeps_half_the_entropy() {
        let j = sample_jeffreys(2, 5, 11).unwrap();
        let u = OueEvaluator::new(&j).unwrap().utility(f64::INFINITY).unwrap();
        assert_abs_diff_eq!(u / j.entropy_x(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn oue_evaluator_matches_explicit_channel() {
        for seed in 0..5 {
            let j = sample_jeffreys(3, 5, seed).unwrap();
            let ev = OueEvaluator::new(&j).unwrap();
            for alpha in [0.0, 0.3, 1.0, 4.0] {
                let q = oue_channel(alpha, 5).unwrap();
                assert_abs_diff_eq!(ev.lip(alpha).unwrap(), lip_of(&q, &j).unwrap().value, epsilon = 1e-10);
                assert_abs_diff_eq!(ev.utility(alpha).unwrap(), q.mutual_information(j.p_x()), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn cr_channel_examples() {
        let j = sample_jeffreys(2, 3, 4).unwrap();
        let cr = cr_channel(0.0, &j).unwrap();
        for y in 0..3 {
            assert_abs_diff_eq!(cr.y_given_s[0][y], cr.y_given_s[1][y], epsilon = 1e-15);
        }
        let ind = independent(3, 4);
        let cr = cr_channel(1.3, &ind).unwrap();
        for row in &cr.y_given_s {
            for (v, px) in row.iter().zip(ind.p_x()) {
                assert_abs_diff_eq!(*v, px, epsilon = 1e-15);
            }
        }
        let cr = cr_channel(3f64.ln(), &diag()).unwrap();
        assert_abs_diff_eq!(cr.y_given_s[0][0], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(cr.y_given_s[0][1], 0.25, epsilon = 1e-15);
        // closed forms agree with the tensor
        let j = sample_jeffreys(4, 3, 8).unwrap();
        let cr = cr_channel(0.8, &j).unwrap();
        let direct = cr.channel.output_given_secret(&j);
        for (r1, r2) in direct.iter().zip(&cr.y_given_s) {
            for (a, b) in r1.iter().zip(r2) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-14);
            }
            assert_abs_diff_eq!(r1.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn cr_lip_examples() {
        let j = sample_jeffreys(3, 4, 2).unwrap();
        assert_abs_diff_eq!(cr_lip(0.0, &j).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cr_lip(2.0, &independent(3, 4)).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(cr_lip(3f64.ln(), &diag()).unwrap(), 2f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn cr_utility_examples() {
        let j = sample_jeffreys(2, 4, 6).unwrap();
        assert_abs_diff_eq!(cr_utility(60.0, &j).unwrap(), j.entropy_x(), epsilon = 1e-12);
        // c = 2, α = 0, S independent of X: Y = X w.p. 1/2, else a fresh draw from p_X
        let ind = JointDistribution::new(vec![vec![0.1, 0.15, 0.25], vec![0.1, 0.15, 0.25]]).unwrap();
        let p_x = ind.p_x().to_vec();
        let mix: Vec<Vec<f64>> = (0..3)
            .map(|y| (0..3).map(|x| p_x[x] * (0.5 * (x == y) as u8 as f64 + 0.5 * p_x[y])).collect())
            .collect();
        assert_abs_diff_eq!(cr_utility(0.0, &ind).unwrap(), mutual_information(&mix), epsilon = 1e-14);
        let bsc = 2f64.ln() - entropy(&[0.25, 0.75]);
        assert_abs_diff_eq!(cr_utility(3f64.ln(), &diag()).unwrap(), bsc, epsilon = 1e-14);
        assert_abs_diff_eq!(bsc, 0.1308, epsilon = 1e-4);
    }

    #[test]
    fn cr_sampling_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let j = sample_jeffreys(3, 4, 1).unwrap();
        for _ in 0..200 {
            assert_eq!(cr_sample(50.0, &j, 1, 2, &mut rng).unwrap(), 2);
        }
        let single = sample_jeffreys(1, 4, 1).unwrap();
        for _ in 0..200 {
            assert_eq!(cr_sample(0.0, &single, 0, 3, &mut rng).unwrap(), 3);
        }
        let a = cr_sample(0.5, &j, 0, 0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = cr_sample(0.5, &j, 0, 0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn solve_alpha_examples() {
        let j = sample_jeffreys(2, 3, 9).unwrap();
        assert_eq!(Protocol::Grr.solve(0.0, &j).unwrap().alpha, 0.0);
        let sol = Protocol::Cr.solve(1.0, &independent(2, 3)).unwrap();
        assert!(sol.alpha.is_infinite());
        let sol = Protocol::Grr.solve(2f64.ln(), &diag()).unwrap();
        assert_abs_diff_eq!(sol.alpha, 3f64.ln(), epsilon = 1e-9);
        assert!((sol.leakage - 2f64.ln()).abs() <= 1e-9);
    }

    #[test]
    fn solve_alpha_detects_non_monotone_curves() {
        let bumpy = |a: f64| Ok(if a > 0.0 && a < 1.5 { 0.9 } else { (a / 10.0).min(5.0) });
        assert!(matches!(solve_alpha(1.0, bumpy), Err(Error::NonMonotoneDetected { .. })));
        assert!(solve_alpha(-1.0, |_| Ok(0.0)).is_err());
    }

    #[test]
    fn product_channel_is_kronecker() {
        let p = Channel::product(&[grr(1.0, 2).unwrap(), grr(0.5, 3).unwrap()]).unwrap();
        assert_eq!((p.a(), p.b()), (6, 6));
        let (g1, g2) = (grr(1.0, 2).unwrap(), grr(0.5, 3).unwrap());
        // output (1, 2) is row 5, input (0, 1) is column 1
        assert_abs_diff_eq!(p.get(5, 1), g1.get(1, 0) * g2.get(2, 1), epsilon = 1e-15);
    }

    #[test]
    fn channel_json_round_trip() {
        let q = oue_channel(0.7, 3).unwrap();
        let text = serde_json::to_string(&q).unwrap();
        assert!(text.contains("\"Q\""));
        let back: Channel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, q);
        assert!(serde_json::from_str::<Channel>(r#"{"a":2,"b":1,"Q":[[1.0,0.5]]}"#).is_err());
    }

    #[test]
    fn data_processing_inequality() {
        for seed in 0..50 {
            let j = sample_uniform_normalised(3, 4, seed).unwrap();
            let q = Channel::from_approximate(
                sample_uniform_normalised(5, 4, seed + 1000).unwrap().matrix().to_vec(),
                0.0,
            )
            .unwrap();
            let push = pushforward(&q, &j).unwrap();
            let total: f64 = push.y_s.iter().flatten().sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
            assert!(mutual_information(&push.y_s) <= j.mutual_information() + 1e-9);
        }
    }
}
