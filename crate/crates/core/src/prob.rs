//! Finite probability: joint priors over (secret, data), their marginals and
//! conditionals, entropy and mutual information (in nats), and seeded random
//! instance generation.

use std::ops::Deref;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::Channel;

/// Tolerance on total probability mass.
pub const MASS_TOL: f64 = 1e-12;

/// `x ln x` with the convention `0 ln 0 = 0`.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Shannon entropy in nats. Non-positive entries contribute nothing.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().map(|&v| xlogx(v)).sum::<f64>()
}

/// Mutual information (nats) of a joint distribution given as a matrix
/// `joint[u][v]`. Cells with zero mass contribute nothing.
pub fn mutual_information(joint: &[Vec<f64>]) -> f64 {
    if joint.is_empty() {
        return 0.0;
    }
    let cols = joint[0].len();
    let rows: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let mut col = vec![0.0; cols];
    for r in joint {
        for (c, v) in col.iter_mut().zip(r) {
            *c += v;
        }
    }
    let mut mi = 0.0;
    for (u, r) in joint.iter().enumerate() {
        for (v, &p) in r.iter().enumerate() {
            if p > 0.0 {
                mi += p * (p / (rows[u] * col[v])).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Mutual information I(X;Y) between the input and output of a channel
/// `q[y][x]` driven by the input distribution `p_x`.
pub fn channel_mutual_information(q: &[Vec<f64>], p_x: &[f64]) -> f64 {
    let mut mi = 0.0;
    for row in q {
        let p_y: f64 = row.iter().zip(p_x).map(|(qv, px)| qv * px).sum();
        if p_y <= 0.0 {
            continue;
        }
        for (&qv, &px) in row.iter().zip(p_x) {
            if qv > 0.0 && px > 0.0 {
                mi += px * qv * (qv / p_y).ln();
            }
        }
    }
    mi.max(0.0)
}

/// A probability vector over a finite alphabet.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidInput("empty distribution".into()));
        }
        if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidInput(format!("invalid probability {v}")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Distribution(p))
    }

    /// Clamps negative round-off to zero and rescales to unit mass.
    pub fn normalised(mut p: Vec<f64>) -> Result<Self> {
        for v in p.iter_mut() {
            if !v.is_finite() {
                return Err(Error::InvalidInput("non-finite weight".into()));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let total: f64 = p.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroProbabilityEvent("all weights are zero".into()));
        }
        p.iter_mut().for_each(|v| *v /= total);
        Ok(Distribution(p))
    }

    pub fn uniform(n: usize) -> Self {
        Distribution(vec![1.0 / n as f64; n])
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Distribution {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl<'de> Deserialize<'de> for Distribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        Distribution::new(v).map_err(serde::de::Error::custom)
    }
}

/// A fixed assignment `X^j = x^j` for a subset of attributes, as `(j, x^j)` pairs.
pub type AttributeContext = [(usize, usize)];

/// The prior p_{S,X}, stored as `p[s][x]`.
///
/// When an attribute shape `(a^1, ..., a^m)` is present, `x` is the mixed-radix
/// index of `(x^1, ..., x^m)` with the first attribute most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    p: Vec<Vec<f64>>,
    shape: Option<Vec<usize>>,
    p_s: Vec<f64>,
    p_x: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct JointRepr {
    c: usize,
    a: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shape: Option<Vec<usize>>,
    p: Vec<Vec<f64>>,
}

impl JointDistribution {
    /// Validates the matrix and rejects any zero marginal.
    pub fn new(p: Vec<Vec<f64>>) -> Result<Self> {
        let c = p.len();
        if c == 0 || p[0].is_empty() {
            return Err(Error::InvalidInput("joint must be non-empty".into()));
        }
        let a = p[0].len();
        for row in &p {
            if row.len() != a {
                return Err(Error::DimensionMismatch {
                    expected: a,
                    got: row.len(),
                });
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidInput(format!("invalid probability {v}")));
            }
        }
        let total: f64 = p.iter().flatten().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidInput(format!(
                "joint sums to {total}, not 1"
            )));
        }
        let p_s: Vec<f64> = p.iter().map(|r| r.iter().sum()).collect();
        let mut p_x = vec![0.0; a];
        for row in &p {
            for (acc, v) in p_x.iter_mut().zip(row) {
                *acc += v;
            }
        }
        if let Some(index) = p_s.iter().position(|&v| v <= 0.0) {
            return Err(Error::ZeroMarginal { axis: "s", index });
        }
        if let Some(index) = p_x.iter().position(|&v| v <= 0.0) {
            return Err(Error::ZeroMarginal { axis: "x", index });
        }
        Ok(JointDistribution {
            p,
            shape: None,
            p_s,
            p_x,
        })
    }

    /// Builds a joint from non-negative weights (e.g. counts) by normalising.
    pub fn from_weights(w: Vec<Vec<f64>>) -> Result<Self> {
        let total: f64 = w.iter().flatten().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidInput("weights sum to zero".into()));
        }
        let p = w
            .into_iter()
            .map(|r| r.into_iter().map(|v| v / total).collect())
            .collect();
        Self::new(p)
    }

    /// Attaches an attribute shape; the product of the shape must equal `a`.
    pub fn with_shape(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::InvalidInput("attribute shape must be non-empty and positive".into()));
        }
        let prod: usize = shape.iter().product();
        if prod != self.a() {
            return Err(Error::DimensionMismatch {
                expected: self.a(),
                got: prod,
            });
        }
        self.shape = Some(shape);
        Ok(self)
    }

    pub fn c(&self) -> usize {
        self.p.len()
    }

    pub fn a(&self) -> usize {
        self.p_x.len()
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.p
    }

    pub fn get(&self, s: usize, x: usize) -> f64 {
        self.p[s][x]
    }

    pub fn p_s(&self) -> &[f64] {
        &self.p_s
    }

    pub fn p_x(&self) -> &[f64] {
        &self.p_x
    }

    pub fn shape(&self) -> Option<&[usize]> {
        self.shape.as_deref()
    }

    /// Number of attributes; 1 when no shape is attached.
    pub fn num_attributes(&self) -> usize {
        self.shape.as_ref().map_or(1, |s| s.len())
    }

    pub fn entropy_x(&self) -> f64 {
        entropy(&self.p_x)
    }

    pub fn entropy_s(&self) -> f64 {
        entropy(&self.p_s)
    }

    /// I(S;X) in nats.
    pub fn mutual_information(&self) -> f64 {
        mutual_information(&self.p)
    }

    /// p_{X|s}.
    pub fn x_given_s(&self, s: usize) -> Result<Distribution> {
        let ps = self.p_s[s];
        if ps <= 0.0 {
            return Err(Error::ZeroProbabilityEvent(format!("S = {s}")));
        }
        Distribution::normalised(self.p[s].iter().map(|v| v / ps).collect())
    }

    /// p_{S|x}.
    pub fn s_given_x(&self, x: usize) -> Result<Distribution> {
        let px = self.p_x[x];
        if px <= 0.0 {
            return Err(Error::ZeroProbabilityEvent(format!("X = {x}")));
        }
        Distribution::normalised(self.p.iter().map(|r| r[x] / px).collect())
    }

    /// All rows p_{X|s}, indexed `[s][x]`.
    pub fn x_given_s_matrix(&self) -> Vec<Vec<f64>> {
        self.p
            .iter()
            .zip(&self.p_s)
            .map(|(r, ps)| r.iter().map(|v| v / ps).collect())
            .collect()
    }

    /// All p_{S|x} laid out as `[s][x]` (the row vectors p_{s|X}).
    pub fn s_given_x_matrix(&self) -> Vec<Vec<f64>> {
        self.p
            .iter()
            .map(|r| r.iter().zip(&self.p_x).map(|(v, px)| v / px).collect())
            .collect()
    }

    fn require_shape(&self) -> Result<&[usize]> {
        self.shape
            .as_deref()
            .ok_or_else(|| Error::InvalidInput("joint has no attribute shape".into()))
    }

    /// Mixed-radix digits `(x^1, ..., x^m)` of a flat data index.
    pub fn digits(&self, x: usize) -> Vec<usize> {
        match &self.shape {
            None => vec![x],
            Some(shape) => decode_mixed_radix(x, shape),
        }
    }

    /// Flat data index from attribute digits.
    pub fn index(&self, digits: &[usize]) -> usize {
        match &self.shape {
            None => digits[0],
            Some(shape) => encode_mixed_radix(digits, shape),
        }
    }

    /// P(X^J = x^J) or, with `s`, P(S = s, X^J = x^J).
    pub fn context_mass(&self, ctx: &AttributeContext, s: Option<usize>) -> Result<f64> {
        let shape = self.require_shape()?;
        let mut total = 0.0;
        for x in 0..self.a() {
            let d = decode_mixed_radix(x, shape);
            if ctx.iter().all(|&(j, v)| d[j] == v) {
                total += match s {
                    Some(s) => self.p[s][x],
                    None => self.p_x[x],
                };
            }
        }
        Ok(total)
    }

    /// p_{X^j | x^J} or, with `s`, p_{X^j | s, x^J}.
    pub fn attribute_conditional(
        &self,
        j: usize,
        ctx: &AttributeContext,
        s: Option<usize>,
    ) -> Result<Distribution> {
        let shape = self.require_shape()?;
        if j >= shape.len() || ctx.iter().any(|&(k, v)| k >= shape.len() || v >= shape[k]) {
            return Err(Error::InvalidInput("attribute index out of range".into()));
        }
        let mut w = vec![0.0; shape[j]];
        for x in 0..self.a() {
            let d = decode_mixed_radix(x, shape);
            if ctx.iter().all(|&(k, v)| d[k] == v) {
                w[d[j]] += match s {
                    Some(s) => self.p[s][x],
                    None => self.p_x[x],
                };
            }
        }
        let mass: f64 = w.iter().sum();
        if mass <= 0.0 {
            return Err(Error::ZeroProbabilityEvent(format!(
                "s = {s:?}, context {ctx:?}"
            )));
        }
        Distribution::normalised(w)
    }

    /// Marginal distribution of attribute `j`.
    pub fn attribute_marginal(&self, j: usize) -> Result<Distribution> {
        self.attribute_conditional(j, &[], None)
    }

    /// Joint p_{S,X} restricted to an attribute context and renormalised,
    /// i.e. the prior an attacker holds after learning `x^J`.
    pub fn conditioned_on(&self, ctx: &AttributeContext) -> Result<Vec<Vec<f64>>> {
        let shape = self.require_shape()?;
        let mass = self.context_mass(ctx, None)?;
        if mass <= 0.0 {
            return Err(Error::ZeroProbabilityEvent(format!("context {ctx:?}")));
        }
        Ok(self
            .p
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(x, v)| {
                        let d = decode_mixed_radix(x, shape);
                        if ctx.iter().all(|&(k, val)| d[k] == val) {
                            v / mass
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect())
    }
}

impl Serialize for JointDistribution {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        JointRepr {
            c: self.c(),
            a: self.a(),
            shape: self.shape.clone(),
            p: self.p.clone(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for JointDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = JointRepr::deserialize(d)?;
        if r.p.len() != r.c || r.p.iter().any(|row| row.len() != r.a) {
            return Err(D::Error::custom("matrix dimensions disagree with c and a"));
        }
        let j = JointDistribution::new(r.p).map_err(D::Error::custom)?;
        match r.shape {
            Some(shape) => j.with_shape(shape).map_err(D::Error::custom),
            None => Ok(j),
        }
    }
}

pub fn decode_mixed_radix(mut x: usize, shape: &[usize]) -> Vec<usize> {
    let mut d = vec![0; shape.len()];
    for (slot, &k) in d.iter_mut().zip(shape).rev() {
        *slot = x % k;
        x /= k;
    }
    d
}

pub fn encode_mixed_radix(digits: &[usize], shape: &[usize]) -> usize {
    digits.iter().zip(shape).fold(0, |acc, (&d, &k)| acc * k + d)
}

/// Output-side joints induced by running a channel on the prior.
#[derive(Clone, Debug, PartialEq)]
pub struct Pushforward {
    /// p_{Y,S} as `[y][s]`.
    pub y_s: Vec<Vec<f64>>,
    /// p_{Y,X} as `[y][x]`.
    pub y_x: Vec<Vec<f64>>,
}

pub fn pushforward(q: &Channel, joint: &JointDistribution) -> Result<Pushforward> {
    if q.a() != joint.a() {
        return Err(Error::DimensionMismatch {
            expected: joint.a(),
            got: q.a(),
        });
    }
    let y_s = q
        .rows()
        .iter()
        .map(|row| {
            joint
                .matrix()
                .iter()
                .map(|ps| row.iter().zip(ps).map(|(qv, pv)| qv * pv).sum())
                .collect()
        })
        .collect();
    let y_x = q
        .rows()
        .iter()
        .map(|row| row.iter().zip(joint.p_x()).map(|(qv, px)| qv * px).collect())
        .collect();
    Ok(Pushforward { y_s, y_x })
}

fn check_sizes(c: usize, a: usize) -> Result<()> {
    if c < 1 || a < 1 {
        return Err(Error::InvalidInput("alphabet sizes must be positive".into()));
    }
    Ok(())
}

/// Draws p_{S,X} from the Jeffreys prior: a symmetric Dirichlet(1/2) over
/// all `c * a` cells, via normalised Gamma(1/2, 1) variates.
pub fn sample_jeffreys(c: usize, a: usize, seed: u64) -> Result<JointDistribution> {
    check_sizes(c, a)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = Gamma::new(0.5, 1.0).expect("valid gamma parameters");
    loop {
        let w: Vec<Vec<f64>> = (0..c)
            .map(|_| (0..a).map(|_| gamma.sample(&mut rng)).collect())
            .collect();
        // a zero marginal needs every Gamma draw in a row to underflow; redraw
        match JointDistribution::from_weights(w) {
            Err(Error::ZeroMarginal { .. }) => continue,
            other => return other,
        }
    }
}

/// Draws each cell uniformly from (0, 1] and normalises.
pub fn sample_uniform_normalised(c: usize, a: usize, seed: u64) -> Result<JointDistribution> {
    check_sizes(c, a)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<Vec<f64>> = (0..c)
        .map(|_| (0..a).map(|_| 1.0 - rng.random::<f64>()).collect())
        .collect();
    JointDistribution::from_weights(w)
}
