//! Optimal protocols under LDP, LIP and SRLIP, obtained from the vertices
//! of the corresponding feasible polytopes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp;
use crate::mechanisms::{ldp_of, lip_of, Channel, Metric};
use crate::polytope::{lex_cmp, EnumerationOptions, Polytope};
use crate::prob::{decode_mixed_radix, entropy, JointDistribution};

/// Support threshold for reading the output alphabet off the LP weights.
pub const SUPPORT_TOL: f64 = 1e-10;
/// Slack allowed when re-verifying a synthesised protocol.
pub const CERTIFICATE_TOL: f64 = 1e-9;
/// Largest attribute count for SRLIP synthesis and checking.
pub const MAX_ATTRIBUTES: usize = 8;

const UTILITY_TIE_TOL: f64 = 1e-12;
const ENTRY_FLOOR: f64 = 1e-12;

/// `e^ε`, with `ε = +inf` meaning "no constraint".
fn bound(epsilon: f64) -> Result<f64> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidInput(format!("epsilon must be >= 0, got {epsilon}")));
    }
    Ok(epsilon.exp())
}

/// Polytope of `a x a` column-stochastic matrices, variables `Q[y][x]` at
/// index `y * a + x`.
fn stochastic_matrices(a: usize) -> Polytope {
    let mut p = Polytope::new(a * a);
    p.add_nonnegativity();
    for x in 0..a {
        let mut row = vec![0.0; a * a];
        for y in 0..a {
            row[y * a + x] = 1.0;
        }
        p.add_eq(row, 1.0);
    }
    p
}

fn matrix_from_vertex(v: &[f64], a: usize) -> Vec<Vec<f64>> {
    v.chunks(a).map(|r| r.iter().map(|x| x.max(0.0)).collect()).collect()
}

/// Index of the best utility; near-ties go to the earliest (lexicographically
/// smallest) vertex so the answer does not depend on evaluation order.
fn argmax(utilities: &[f64]) -> Option<usize> {
    let best = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    utilities.iter().position(|&u| u >= best - UTILITY_TIE_TOL)
}

/// Coefficient vectors `c = p_{X|s} - e^ε p_{X|s'}`; the LDP constraints
/// are `c . Q_y <= 0` for every output row `Q_y`.
fn ldp_cone_rows(joint: &JointDistribution, epsilon: f64) -> Result<Vec<Vec<f64>>> {
    let e = bound(epsilon)?;
    let mut rows = Vec::new();
    if e.is_finite() {
        let pxs = joint.x_given_s_matrix();
        for (s, ps) in pxs.iter().enumerate() {
            for (t, pt) in pxs.iter().enumerate() {
                let coef: Vec<f64> = ps.iter().zip(pt).map(|(u, v)| u - e * v).collect();
                // rows with no positive coefficient are implied by Q >= 0
                if s != t && coef.iter().any(|&c| c > 0.0) {
                    rows.push(coef);
                }
            }
        }
    }
    Ok(rows)
}

/// Stochastic `a x a` matrices whose every row satisfies `c . Q_y <= 0`.
fn row_cone_polytope(rows: &[Vec<f64>], a: usize) -> Polytope {
    let mut p = stochastic_matrices(a);
    for coef in rows {
        for y in 0..a {
            let mut row = vec![0.0; a * a];
            row[y * a..(y + 1) * a].copy_from_slice(coef);
            p.add_le(row, 0.0);
        }
    }
    p
}

/// The LDP polytope: stochastic `Q` with `(Q p_{X|s})_y <= e^ε (Q p_{X|s'})_y`.
pub fn build_gamma(joint: &JointDistribution, epsilon: f64) -> Result<Polytope> {
    Ok(row_cone_polytope(&ldp_cone_rows(joint, epsilon)?, joint.a()))
}

/// Contribution of one output row to I(X;Y): `sum_x q_x p_x ln(q_x / q.p)`.
/// Positively homogeneous and subadditive in `q`.
fn row_information(q: &[f64], p: &[f64]) -> f64 {
    let py: f64 = q.iter().zip(p).map(|(a, b)| a * b).sum();
    if py <= 0.0 {
        return 0.0;
    }
    q.iter()
        .zip(p)
        .filter(|(&qx, &px)| qx > 0.0 && px > 0.0)
        .map(|(qx, px)| qx * px * (qx / py).ln())
        .sum()
}

/// Best channel whose output rows all lie in the cone
/// `K = {q >= 0 : c . q <= 0 for every row c}`.
///
/// Since row utility is homogeneous and subadditive, splitting a row into
/// extreme rays of `K` never loses information, so the optimum is an LP
/// over the extreme rays `e_i`: max `sum_i λ_i f(e_i)` s.t. `sum_i λ_i e_i = 1`.
/// Returns the channel and the number of extreme rays of `K`.
pub fn best_channel_in_row_cone(
    rows: &[Vec<f64>],
    p: &[f64],
    opts: &EnumerationOptions,
) -> Result<(Channel, usize)> {
    let a = p.len();
    let mut section = Polytope::new(a);
    section.add_nonnegativity().add_eq(vec![1.0; a], 1.0);
    for c in rows {
        section.add_le(c.clone(), 0.0);
    }
    let rays = section.enumerate_vertices_with(opts)?.vertices;
    let cost: Vec<f64> = rays.iter().map(|e| -row_information(e, p)).collect();
    let cols: Vec<Vec<f64>> = (0..a).map(|x| rays.iter().map(|e| e[x]).collect()).collect();
    let sol = lp::minimise(&cost, &cols, &vec![1.0; a])?;
    let q: Vec<Vec<f64>> = (0..rays.len())
        .filter(|&i| sol.x[i] > SUPPORT_TOL)
        .map(|i| rays[i].iter().map(|v| sol.x[i] * v).collect())
        .collect();
    Ok((Channel::from_approximate(q, ENTRY_FLOOR)?.canonical(), rays.len()))
}

/// Optimal LDP channel computed through the row-cone LP instead of the
/// vertices of the full matrix polytope. Same optimum, far fewer vertices.
pub fn optimal_ldp_via_rays(joint: &JointDistribution, epsilon: f64) -> Result<LdpSolution> {
    let rows = ldp_cone_rows(joint, epsilon)?;
    let (channel, vertex_count) = best_channel_in_row_cone(&rows, joint.p_x(), &EnumerationOptions::default())?;
    Ok(LdpSolution {
        utility: channel.mutual_information(joint.p_x()),
        channel,
        vertex_count,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LdpSolution {
    pub channel: Channel,
    pub utility: f64,
    pub vertex_count: usize,
}

pub fn optimal_ldp(joint: &JointDistribution, epsilon: f64) -> Result<LdpSolution> {
    optimal_ldp_with(joint, epsilon, &EnumerationOptions::default())
}

pub fn optimal_ldp_with(
    joint: &JointDistribution,
    epsilon: f64,
    opts: &EnumerationOptions,
) -> Result<LdpSolution> {
    let a = joint.a();
    let vertices = build_gamma(joint, epsilon)?.enumerate_vertices_with(opts)?;
    let utilities: Vec<f64> = vertices
        .vertices
        .par_iter()
        .map(|v| crate::prob::channel_mutual_information(&matrix_from_vertex(v, a), joint.p_x()))
        .collect();
    let best = argmax(&utilities).ok_or(Error::EmptyPolytope)?;
    let channel = Channel::from_approximate(matrix_from_vertex(&vertices.vertices[best], a), ENTRY_FLOOR)?
        .canonical();
    let utility = channel.mutual_information(joint.p_x());
    Ok(LdpSolution {
        channel,
        utility,
        vertex_count: vertices.len(),
    })
}

/// The LIP posterior polytope: distributions `v` on X with
/// `e^{-ε} p_s <= p_{s|X} . v <= e^ε p_s` for every secret.
pub fn build_delta(joint: &JointDistribution, epsilon: f64) -> Result<Polytope> {
    let e = bound(epsilon)?;
    let a = joint.a();
    let mut p = Polytope::new(a);
    p.add_nonnegativity().add_eq(vec![1.0; a], 1.0);
    if e.is_finite() {
        for (row, &ps) in joint.s_given_x_matrix().iter().zip(joint.p_s()) {
            p.add_le(row.clone(), e * ps);
            p.add_ge(row.clone(), ps / e);
        }
    }
    Ok(p)
}

/// A protocol as output masses `q` and posterior columns `R[x][y]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReverseChannel {
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
    pub q: Vec<f64>,
}

impl ReverseChannel {
    pub fn b(&self) -> usize {
        self.q.len()
    }

    /// `R q`, which equals `p_X` for a protocol consistent with the prior.
    pub fn data_marginal(&self) -> Vec<f64> {
        self.r
            .iter()
            .map(|row| row.iter().zip(&self.q).map(|(r, q)| r * q).sum())
            .collect()
    }

    /// Forward channel `Q_{y|x} = q_y R_{x|y} / p_x`.
    pub fn forward(&self, p_x: &[f64]) -> Result<Channel> {
        let q = (0..self.b())
            .map(|y| {
                p_x.iter()
                    .enumerate()
                    .map(|(x, px)| self.q[y] * self.r[x][y] / px)
                    .collect()
            })
            .collect();
        Channel::from_approximate(q, 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    /// One weight per vertex of the posterior polytope.
    pub weights: Vec<f64>,
    /// `sum_i weights_i H(v_i)`.
    pub objective: f64,
    /// Vertex indices with weight above [`SUPPORT_TOL`].
    pub support: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LipSolution {
    pub reverse: ReverseChannel,
    pub channel: Channel,
    /// `H(X) - objective`.
    pub utility: f64,
    pub vertex_count: usize,
    pub lp: LpSolution,
}

pub fn optimal_lip(joint: &JointDistribution, epsilon: f64) -> Result<LipSolution> {
    optimal_lip_with(joint, epsilon, &EnumerationOptions::default())
}

pub fn optimal_lip_with(
    joint: &JointDistribution,
    epsilon: f64,
    opts: &EnumerationOptions,
) -> Result<LipSolution> {
    let a = joint.a();
    let vertices = build_delta(joint, epsilon)?.enumerate_vertices_with(opts)?;
    let v = &vertices.vertices;
    let cost: Vec<f64> = v.iter().map(|vi| entropy(vi)).collect();
    let rows: Vec<Vec<f64>> = (0..a).map(|x| v.iter().map(|vi| vi[x]).collect()).collect();
    let sol = lp::minimise(&cost, &rows, joint.p_x())?;
    let support: Vec<usize> = (0..v.len()).filter(|&i| sol.x[i] > SUPPORT_TOL).collect();

    // order outputs by their forward rows so the result is canonical
    let p_x = joint.p_x();
    let mut outputs: Vec<(Vec<f64>, usize)> = support
        .iter()
        .map(|&i| (p_x.iter().enumerate().map(|(x, px)| sol.x[i] * v[i][x] / px).collect(), i))
        .collect();
    outputs.sort_by(|(r1, i1), (r2, i2)| lex_cmp(r2, r1).then(i1.cmp(i2)));
    let reverse = ReverseChannel {
        r: (0..a).map(|x| outputs.iter().map(|(_, i)| v[*i][x]).collect()).collect(),
        q: outputs.iter().map(|(_, i)| sol.x[*i]).collect(),
    };
    let channel = Channel::from_approximate(outputs.into_iter().map(|(r, _)| r).collect(), 0.0)?;
    Ok(LipSolution {
        reverse,
        channel,
        utility: entropy(p_x) - sol.objective,
        vertex_count: v.len(),
        lp: LpSolution {
            weights: sol.x,
            objective: sol.objective,
            support,
        },
    })
}

fn require_shape(joint: &JointDistribution) -> Result<&[usize]> {
    let shape = joint
        .shape()
        .ok_or_else(|| Error::InvalidInput("joint has no attribute shape".into()))?;
    if shape.len() > MAX_ATTRIBUTES {
        return Err(Error::AttributeBudgetExceeded {
            m: shape.len(),
            max: MAX_ATTRIBUTES,
        });
    }
    Ok(shape)
}

/// Digits of `x` restricted to the attributes in `mask`, as one mixed-radix key.
fn context_key(digits: &[usize], shape: &[usize], mask: usize) -> usize {
    (0..shape.len())
        .filter(|k| mask >> k & 1 == 1)
        .fold(0, |acc, k| acc * shape[k] + digits[k])
}

/// Attribute assignments `(k, v)` encoded by a context key.
fn context_of(key: usize, shape: &[usize], mask: usize) -> Vec<(usize, usize)> {
    let attrs: Vec<usize> = (0..shape.len()).filter(|k| mask >> k & 1 == 1).collect();
    let radix: Vec<usize> = attrs.iter().map(|&k| shape[k]).collect();
    attrs.into_iter().zip(decode_mixed_radix(key, &radix)).collect()
}

fn contexts(shape: &[usize], mask: usize) -> usize {
    (0..shape.len())
        .filter(|k| mask >> k & 1 == 1)
        .map(|k| shape[k])
        .product()
}

/// For attribute `jdx` and a set of other attributes, the weights
/// `P(S = s, X^J = x^J, X^jdx = x^j)` grouped by context key: `[key][s][x^j]`.
fn attribute_tables(joint: &JointDistribution, shape: &[usize], jdx: usize, mask: usize) -> Vec<Vec<Vec<f64>>> {
    let mut t = vec![vec![vec![0.0; shape[jdx]]; joint.c()]; contexts(shape, mask)];
    for x in 0..joint.a() {
        let d = decode_mixed_radix(x, shape);
        let key = context_key(&d, shape, mask);
        for s in 0..joint.c() {
            t[key][s][d[jdx]] += joint.get(s, x);
        }
    }
    t
}

/// Pairs `(p_{X^j | x^J}, [(s, p_{X^j | s, x^J})])` for every side-channel
/// context of attribute `jdx` with positive mass; zero-mass cells are skipped.
type ConditionedPriors = Vec<(Vec<f64>, Vec<(usize, Vec<f64>)>)>;

fn attribute_priors(joint: &JointDistribution, shape: &[usize], jdx: usize) -> ConditionedPriors {
    let m = shape.len();
    let mut out = Vec::new();
    for mask in 0..1usize << m {
        if mask >> jdx & 1 == 1 {
            continue;
        }
        for table in attribute_tables(joint, shape, jdx, mask) {
            let aj = shape[jdx];
            let base: Vec<f64> = (0..aj).map(|x| table.iter().map(|r| r[x]).sum()).collect();
            let mass: f64 = base.iter().sum();
            if mass <= 0.0 {
                continue;
            }
            let conds = table
                .iter()
                .enumerate()
                .filter_map(|(s, row)| {
                    let ms: f64 = row.iter().sum();
                    (ms > 0.0).then(|| (s, row.iter().map(|v| v / ms).collect()))
                })
                .collect();
            out.push((base.iter().map(|v| v / mass).collect(), conds));
        }
    }
    out
}

/// Even budget split `ε / m`.
pub fn uniform_split(epsilon: f64, m: usize) -> Vec<f64> {
    vec![epsilon / m as f64; m]
}

/// Irredundant coefficient vectors `c` such that `ε^j`-LIP of `Q^j` with
/// respect to every prior `p_{S,X | x^J}` (J avoiding `jdx`) reads
/// `c . Q^j_y <= 0` for every output row.
pub fn srlip_cone_rows(joint: &JointDistribution, epsilon_j: f64, jdx: usize) -> Result<Vec<Vec<f64>>> {
    let shape = require_shape(joint)?;
    if jdx >= shape.len() {
        return Err(Error::InvalidInput(format!("attribute {jdx} out of range")));
    }
    let e = bound(epsilon_j)?;
    if !e.is_finite() {
        return Ok(Vec::new());
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (base, conds) in attribute_priors(joint, shape, jdx) {
        for (_, cond) in conds {
            let upper: Vec<f64> = cond.iter().zip(&base).map(|(c, b)| c - e * b).collect();
            let lower: Vec<f64> = cond.iter().zip(&base).map(|(c, b)| b / e - c).collect();
            for coef in [upper, lower] {
                if coef.iter().any(|&c| c > 0.0) {
                    rows.push(coef);
                }
            }
        }
    }
    prune_cone_rows(rows)
}

/// Polytope of `a^j x a^j` stochastic matrices that are `ε^j`-LIP with
/// respect to every prior `p_{S,X | x^J}` where `J` avoids `jdx`.
pub fn build_srlip_polytope(joint: &JointDistribution, epsilon_j: f64, jdx: usize) -> Result<Polytope> {
    let rows = srlip_cone_rows(joint, epsilon_j, jdx)?;
    Ok(row_cone_polytope(&rows, require_shape(joint)?[jdx]))
}

/// Drops every `c` for which `c . q <= 0` is implied by `q >= 0` and the
/// remaining rows, so the returned set describes the same cone.
fn prune_cone_rows(mut rows: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    for r in rows.iter_mut() {
        let s = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        r.iter_mut().for_each(|v| *v /= s);
    }
    rows.sort_by(|a, b| lex_cmp(a, b));
    rows.dedup_by(|a, b| a.iter().zip(b.iter()).all(|(u, v)| (u - v).abs() <= 1e-14));
    let n = rows.first().map_or(0, |r| r.len());
    let mut keep = vec![true; rows.len()];
    for k in 0..rows.len() {
        let others: Vec<usize> = (0..rows.len()).filter(|&i| i != k && keep[i]).collect();
        // max c_k . q  s.t.  sum q = 1, c_i . q + slack_i = 0, q, slack >= 0
        let width = n + others.len();
        let mut a = Vec::with_capacity(others.len() + 1);
        let mut simplex_row = vec![0.0; width];
        simplex_row[..n].iter_mut().for_each(|v| *v = 1.0);
        a.push(simplex_row);
        for (j, &i) in others.iter().enumerate() {
            let mut row = vec![0.0; width];
            row[..n].copy_from_slice(&rows[i]);
            row[n + j] = 1.0;
            a.push(row);
        }
        let mut b = vec![0.0; a.len()];
        b[0] = 1.0;
        let mut cost = vec![0.0; width];
        cost[..n].iter_mut().zip(&rows[k]).for_each(|(c, v)| *c = -v);
        let best = lp::minimise(&cost, &a, &b)?;
        if -best.objective <= 1e-12 {
            keep[k] = false;
        }
    }
    Ok(rows.into_iter().zip(keep).filter_map(|(r, k)| k.then_some(r)).collect())
}

/// One SRLIP failure or worst case: the side-channel context, the secret
/// and the output, with the log-ratio attained there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrlipWitness {
    pub context: Vec<(usize, usize)>,
    pub s: usize,
    pub y: usize,
    #[serde(with = "crate::float_serde")]
    pub log_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrlipReport {
    #[serde(with = "crate::float_serde")]
    pub value: f64,
    pub satisfied: bool,
    pub witness: Option<SrlipWitness>,
}

/// Exhaustive SRLIP check over every attribute subset and context.
pub fn srlip_check(q: &Channel, joint: &JointDistribution, epsilon: f64) -> Result<SrlipReport> {
    let shape = require_shape(joint)?.to_vec();
    if q.a() != joint.a() {
        return Err(Error::DimensionMismatch {
            expected: joint.a(),
            got: q.a(),
        });
    }
    let (b, c, m) = (q.b(), joint.c(), shape.len());
    let per_subset: Vec<(f64, Option<SrlipWitness>)> = (0..1usize << m)
        .into_par_iter()
        .map(|mask| {
            let keys = contexts(&shape, mask);
            // joint[key][s][y] = P(Y = y, S = s, X^J = key)
            let mut acc = vec![vec![vec![0.0; b]; c]; keys];
            let mut mass = vec![vec![0.0; c]; keys];
            for x in 0..joint.a() {
                let key = context_key(&decode_mixed_radix(x, &shape), &shape, mask);
                for s in 0..c {
                    let p = joint.get(s, x);
                    if p == 0.0 {
                        continue;
                    }
                    mass[key][s] += p;
                    for (y, row) in q.rows().iter().enumerate() {
                        acc[key][s][y] += row[x] * p;
                    }
                }
            }
            let mut worst = (0.0, None);
            for key in 0..keys {
                let total: f64 = mass[key].iter().sum();
                if total <= 0.0 {
                    continue;
                }
                for y in 0..b {
                    let py = acc[key].iter().map(|r| r[y]).sum::<f64>() / total;
                    if py <= 0.0 {
                        continue;
                    }
                    for s in 0..c {
                        if mass[key][s] <= 0.0 {
                            continue;
                        }
                        let pys = acc[key][s][y] / mass[key][s];
                        let v = if pys > 0.0 { (pys / py).ln().abs() } else { f64::INFINITY };
                        if v > worst.0 || worst.1.is_none() {
                            worst = (
                                v,
                                Some(SrlipWitness {
                                    context: context_of(key, &shape, mask),
                                    s,
                                    y,
                                    log_ratio: v,
                                }),
                            );
                        }
                    }
                }
            }
            worst
        })
        .collect();
    let (value, witness) = per_subset
        .into_iter()
        .fold((0.0, None), |acc, cur| if cur.0 > acc.0 || acc.1.is_none() { cur } else { acc });
    Ok(SrlipReport {
        value,
        satisfied: value <= epsilon + CERTIFICATE_TOL,
        witness,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SrlipBundle {
    pub channels: Vec<Channel>,
    /// Budgets the channels were synthesised with (after any rescaling).
    pub budgets: Vec<f64>,
    /// Target level: the sum of the requested budgets.
    pub bound: f64,
    pub product: Channel,
    /// I(X;Y) of the product channel under the full data prior.
    pub utility: f64,
    pub vertex_count: usize,
    /// Whether the product of the channels synthesised at the requested
    /// budgets already met the target.
    pub composition_held: bool,
    /// Factor applied to the requested budgets; 0 means every attribute fell
    /// back to the constant channel.
    pub budget_scale: f64,
    pub check: SrlipReport,
}

/// How the per-attribute channel is picked from its feasible set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SrlipMethod {
    /// LP over the extreme rays of the per-row cone.
    #[default]
    RayLp,
    /// Enumerate every vertex of the `a^j x a^j` matrix polytope.
    Vertices,
}

pub fn srlip_protocol(joint: &JointDistribution, epsilon: f64) -> Result<SrlipBundle> {
    let m = require_shape(joint)?.len();
    srlip_protocol_with(
        joint,
        &uniform_split(epsilon, m),
        SrlipMethod::default(),
        &EnumerationOptions::default(),
    )
}

/// SRLIP synthesis with an explicit per-attribute budget vector.
pub fn srlip_protocol_with(
    joint: &JointDistribution,
    budgets: &[f64],
    method: SrlipMethod,
    opts: &EnumerationOptions,
) -> Result<SrlipBundle> {
    let shape = require_shape(joint)?.to_vec();
    if budgets.len() != shape.len() {
        return Err(Error::DimensionMismatch {
            expected: shape.len(),
            got: budgets.len(),
        });
    }
    let target: f64 = budgets.iter().sum();
    let (channels, vertex_count) = per_attribute_channels(joint, &shape, budgets, method, opts)?;
    let product = Channel::product(&channels)?;
    let check = srlip_check(&product, joint, target)?;
    let mut best = (channels, product, check, 1.0);
    let composition_held = best.2.satisfied;
    if !composition_held {
        best = repair(joint, &shape, budgets, method, opts, target)?;
    }
    let (channels, product, check, budget_scale) = best;
    Ok(SrlipBundle {
        channels,
        budgets: budgets.iter().map(|b| b * budget_scale).collect(),
        bound: target,
        utility: product.mutual_information(joint.p_x()),
        product,
        vertex_count,
        composition_held,
        budget_scale,
        check,
    })
}

const REPAIR_SHRINK: f64 = 0.9;
const REPAIR_STEPS: usize = 40;
const REPAIR_BISECTIONS: usize = 20;

type Candidate = (Vec<Channel>, Channel, SrlipReport, f64);

/// Per-attribute budgets need not compose: the product of channels that
/// meet their own conditions can still exceed the summed budget. Shrinks
/// all budgets by a common factor until the product passes the check,
/// bisects towards the largest passing factor found, and falls back to
/// constant channels if nothing passes.
fn repair(
    joint: &JointDistribution,
    shape: &[usize],
    budgets: &[f64],
    method: SrlipMethod,
    opts: &EnumerationOptions,
    target: f64,
) -> Result<Candidate> {
    let attempt = |t: f64| -> Result<Candidate> {
        let scaled: Vec<f64> = budgets.iter().map(|b| b * t).collect();
        let (channels, _) = per_attribute_channels(joint, shape, &scaled, method, opts)?;
        let product = Channel::product(&channels)?;
        let check = srlip_check(&product, joint, target)?;
        Ok((channels, product, check, t))
    };
    let mut failed = 1.0;
    let mut t = 1.0;
    let mut passing = None;
    for _ in 0..REPAIR_STEPS {
        t *= REPAIR_SHRINK;
        let cand = attempt(t)?;
        if cand.2.satisfied {
            passing = Some(cand);
            break;
        }
        failed = t;
    }
    let Some(mut pass) = passing else {
        let channels: Vec<Channel> = shape.iter().map(|&a| Channel::constant(a)).collect();
        let product = Channel::product(&channels)?;
        let check = srlip_check(&product, joint, target)?;
        return Ok((channels, product, check, 0.0));
    };
    for _ in 0..REPAIR_BISECTIONS {
        let mid = 0.5 * (pass.3 + failed);
        let cand = attempt(mid)?;
        if cand.2.satisfied {
            pass = cand;
        } else {
            failed = mid;
        }
    }
    Ok(pass)
}

fn per_attribute_channels(
    joint: &JointDistribution,
    shape: &[usize],
    budgets: &[f64],
    method: SrlipMethod,
    opts: &EnumerationOptions,
) -> Result<(Vec<Channel>, usize)> {
    let per_attribute: Vec<(Channel, usize)> = (0..shape.len())
        .into_par_iter()
        .map(|jdx| {
            let aj = shape[jdx];
            let marginal = joint.attribute_marginal(jdx)?;
            let rows = srlip_cone_rows(joint, budgets[jdx], jdx)?;
            if method == SrlipMethod::RayLp {
                return best_channel_in_row_cone(&rows, &marginal, opts);
            }
            let vertices = row_cone_polytope(&rows, aj).enumerate_vertices_with(opts)?;
            let utilities: Vec<f64> = vertices
                .vertices
                .iter()
                .map(|v| crate::prob::channel_mutual_information(&matrix_from_vertex(v, aj), &marginal))
                .collect();
            let best = argmax(&utilities).ok_or(Error::EmptyPolytope)?;
            let channel =
                Channel::from_approximate(matrix_from_vertex(&vertices.vertices[best], aj), ENTRY_FLOOR)?.canonical();
            Ok((channel, vertices.len()))
        })
        .collect::<Result<_>>()?;
    let count = per_attribute.iter().map(|(_, n)| n).sum();
    Ok((per_attribute.into_iter().map(|(c, _)| c).collect(), count))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BundleKind {
    Ldp,
    Lip,
    Srlip,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub metric: BundleKind,
    #[serde(with = "crate::float_serde")]
    pub measured: f64,
    pub passed: bool,
}

/// A synthesised protocol with its re-verified leakage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolBundle {
    pub kind: BundleKind,
    #[serde(with = "crate::float_serde")]
    pub epsilon: f64,
    pub channel: Channel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reverse: Option<ReverseChannel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute_channels: Option<Vec<Channel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budgets: Option<Vec<f64>>,
    /// SRLIP only: whether the per-attribute budgets composed without rescaling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composition_held: Option<bool>,
    pub utility_nats: f64,
    pub vertex_count: usize,
    pub certificate: Certificate,
}

/// Re-measures a channel's leakage with the generic evaluators.
pub fn certify(kind: BundleKind, q: &Channel, joint: &JointDistribution, epsilon: f64) -> Result<Certificate> {
    let measured = match kind {
        BundleKind::Ldp => ldp_of(q, joint)?.value,
        BundleKind::Lip => lip_of(q, joint)?.value,
        BundleKind::Srlip => srlip_check(q, joint, epsilon)?.value,
    };
    Ok(Certificate {
        metric: kind,
        measured,
        passed: measured <= epsilon + CERTIFICATE_TOL,
    })
}

/// Runs the synthesis for `kind` and packages it with its certificate.
pub fn synthesise(kind: BundleKind, joint: &JointDistribution, epsilon: f64) -> Result<ProtocolBundle> {
    let (channel, reverse, parts, utility, vertex_count) = match kind {
        BundleKind::Ldp => {
            let s = optimal_ldp(joint, epsilon)?;
            (s.channel, None, None, s.utility, s.vertex_count)
        }
        BundleKind::Lip => {
            let s = optimal_lip(joint, epsilon)?;
            (s.channel, Some(s.reverse), None, s.utility, s.vertex_count)
        }
        BundleKind::Srlip => {
            let s = srlip_protocol(joint, epsilon)?;
            (
                s.product,
                None,
                Some((s.channels, s.budgets, s.composition_held)),
                s.utility,
                s.vertex_count,
            )
        }
    };
    let certificate = certify(kind, &channel, joint, epsilon)?;
    let (attribute_channels, budgets, composition_held) = match parts {
        Some((c, b, h)) => (Some(c), Some(b), Some(h)),
        None => (None, None, None),
    };
    Ok(ProtocolBundle {
        kind,
        epsilon,
        channel,
        reverse,
        attribute_channels,
        budgets,
        composition_held,
        utility_nats: utility,
        vertex_count,
        certificate,
    })
}

impl From<BundleKind> for Metric {
    fn from(k: BundleKind) -> Metric {
        match k {
            BundleKind::Ldp => Metric::Ldp,
            BundleKind::Lip | BundleKind::Srlip => Metric::Lip,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::sample_jeffreys;
    use approx::assert_abs_diff_eq;

    fn correlated() -> JointDistribution {
        JointDistribution::new(vec![vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap()
    }

    fn equal_binary() -> JointDistribution {
        JointDistribution::new(vec![vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap()
    }

    fn flat(q: &Channel) -> Vec<f64> {
        q.rows().iter().flatten().copied().collect()
    }

    #[test]
    fn gamma_membership() {
        let j = correlated();
        let g = build_gamma(&j, 0.5).unwrap();
        assert!(!g.contains(&flat(&Channel::identity(2)), 1e-12));
        let constant = vec![0.3, 0.3, 0.7, 0.7];
        assert!(g.contains(&constant, 1e-12));
        assert!(build_gamma(&j, 0.0).unwrap().contains(&constant, 1e-12));
    }

    #[test]
    fn unconstrained_gamma_has_deterministic_vertices() {
        let j = sample_jeffreys(2, 3, 1).unwrap();
        let vs = build_gamma(&j, f64::INFINITY).unwrap().enumerate_vertices().unwrap();
        assert_eq!(vs.len(), 27);
        assert!(vs.iter().flatten().all(|v| v.abs() < 1e-9 || (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn ldp_endpoints() {
        let j = sample_jeffreys(2, 3, 2).unwrap();
        let s = optimal_ldp(&j, 20.0).unwrap();
        assert_abs_diff_eq!(s.utility, j.entropy_x(), epsilon = 1e-9);
        assert_eq!(s.channel.b(), 3);
        let z = optimal_ldp(&equal_binary(), 0.0).unwrap();
        assert_abs_diff_eq!(z.utility, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn delta_examples() {
        let j = sample_jeffreys(3, 4, 3).unwrap();
        let d = build_delta(&j, f64::INFINITY).unwrap().enumerate_vertices().unwrap();
        assert_eq!(d.len(), 4);
        for eps in [0.0, 0.3, 1.0] {
            assert!(build_delta(&j, eps).unwrap().contains(j.p_x(), 1e-12));
        }
        let z = build_delta(&equal_binary(), 0.0).unwrap().enumerate_vertices().unwrap();
        assert_eq!(z.len(), 1);
        assert_abs_diff_eq!(z.vertices[0][0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn lip_structure() {
        for seed in 0..5 {
            let j = sample_jeffreys(2, 4, seed).unwrap();
            for eps in [0.25, 0.5, 1.0] {
                let s = optimal_lip(&j, eps).unwrap();
                assert!(s.reverse.b() <= j.a());
                for (got, want) in s.reverse.data_marginal().iter().zip(j.p_x()) {
                    assert_abs_diff_eq!(got, want, epsilon = 1e-8);
                }
                assert_abs_diff_eq!(s.reverse.q.iter().sum::<f64>(), 1.0, epsilon = 1e-8);
                assert_abs_diff_eq!(s.utility, s.channel.mutual_information(j.p_x()), epsilon = 1e-9);
                assert!(lip_of(&s.channel, &j).unwrap().value <= eps + 1e-9);
            }
        }
    }

    #[test]
    fn lip_endpoints() {
        let j = sample_jeffreys(2, 3, 7).unwrap();
        assert_abs_diff_eq!(optimal_lip(&j, 30.0).unwrap().utility, j.entropy_x(), epsilon = 1e-9);
        let z = optimal_lip(&equal_binary(), 0.0).unwrap();
        assert_abs_diff_eq!(z.utility, 0.0, epsilon = 1e-12);
        assert_eq!(z.reverse.b(), 1);
    }

    #[test]
    fn independent_secret_gives_identity_per_attribute() {
        let p: Vec<f64> = (1..=4).map(|v| v as f64 / 10.0).collect();
        let j = JointDistribution::new(vec![p.iter().map(|v| v * 0.5).collect(); 2])
            .unwrap()
            .with_shape(vec![2, 2])
            .unwrap();
        let b = srlip_protocol(&j, 0.7).unwrap();
        assert_abs_diff_eq!(b.utility, j.entropy_x(), epsilon = 1e-9);
        let g = build_srlip_polytope(&j, 0.0, 1).unwrap();
        assert!(g.contains(&[1.0, 0.0, 0.0, 1.0], 1e-12));
    }

    #[test]
    fn srlip_empty_context_matches_lip() {
        let j = sample_jeffreys(2, 4, 3).unwrap().with_shape(vec![2, 2]).unwrap();
        let q = crate::mechanisms::grr(0.9, 4).unwrap();
        let r = srlip_check(&q, &j, 10.0).unwrap();
        assert!(r.value >= lip_of(&q, &j).unwrap().value - 1e-12);
        assert!(srlip_check(&Channel::constant(4), &j, 0.0).unwrap().satisfied);
    }

    #[test]
    fn too_many_attributes() {
        let j = sample_jeffreys(2, 512, 0).unwrap().with_shape(vec![2; 9]).unwrap();
        assert!(matches!(
            build_srlip_polytope(&j, 1.0, 0),
            Err(Error::AttributeBudgetExceeded { m: 9, max: 8 })
        ));
    }

    #[test]
    fn bundle_json_round_trip() {
        let j = sample_jeffreys(2, 3, 4).unwrap();
        let b = synthesise(BundleKind::Lip, &j, 0.5).unwrap();
        assert!(b.certificate.passed);
        let text = serde_json::to_string(&b).unwrap();
        assert!(text.contains("\"reverse\"") && text.contains("\"utility_nats\""));
        let back: ProtocolBundle = serde_json::from_str(&text).unwrap();
        assert_eq!(back, b);
        let inf = synthesise(BundleKind::Ldp, &j, f64::INFINITY).unwrap();
        let text = serde_json::to_string(&inf).unwrap();
        assert!(text.contains("\"epsilon\":\"inf\""));
    }
}
