//! H-representation polytopes `{v : A v <= b, E v = f}` and vertex
//! enumeration by the double description method.
//!
//! Equalities are removed first by parametrising the affine hull of
//! `{E v = f}` as `v = v0 + N t`. The remaining inequalities on `t` are
//! homogenised into the cone `{(x0, t) : x0 b' - A' t >= 0, x0 >= 0}` whose
//! extreme rays with `x0 > 0` are exactly the vertices. Rays are built by
//! inserting one constraint at a time, combining every adjacent pair of rays
//! on opposite sides of the new hyperplane. Adjacency is decided
//! combinatorially from the sets of tight constraints.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Feasibility / tightness tolerance.
pub const FEAS_TOL: f64 = 1e-9;
/// Two vertices closer than this in the max norm are the same vertex.
pub const DEDUPE_TOL: f64 = 1e-7;
/// Default cap on the number of rays alive at any point of the enumeration.
pub const DEFAULT_MAX_VERTICES: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Polytope {
    dim: usize,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    e: Vec<Vec<f64>>,
    f: Vec<f64>,
}

impl Polytope {
    pub fn new(dim: usize) -> Self {
        Polytope {
            dim,
            a: Vec::new(),
            b: Vec::new(),
            e: Vec::new(),
            f: Vec::new(),
        }
    }

    /// Adds `row . v <= rhs`.
    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        assert_eq!(row.len(), self.dim, "inequality row has the wrong length");
        self.a.push(row);
        self.b.push(rhs);
        self
    }

    /// Adds `row . v >= rhs`.
    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.add_le(row.into_iter().map(|v| -v).collect(), -rhs)
    }

    /// Adds `row . v = rhs`.
    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        assert_eq!(row.len(), self.dim, "equality row has the wrong length");
        self.e.push(row);
        self.f.push(rhs);
        self
    }

    /// Adds `v_i >= 0` for every coordinate.
    pub fn add_nonnegativity(&mut self) -> &mut Self {
        for i in 0..self.dim {
            let mut row = vec![0.0; self.dim];
            row[i] = -1.0;
            self.add_le(row, 0.0);
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inequalities(&self) -> (&[Vec<f64>], &[f64]) {
        (&self.a, &self.b)
    }

    pub fn equalities(&self) -> (&[Vec<f64>], &[f64]) {
        (&self.e, &self.f)
    }

    pub fn num_inequalities(&self) -> usize {
        self.a.len()
    }

    /// True iff every constraint holds within `tol`.
    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        if v.len() != self.dim {
            return false;
        }
        self.a.iter().zip(&self.b).all(|(row, &rhs)| dot(row, v) <= rhs + tol)
            && self
                .e
                .iter()
                .zip(&self.f)
                .all(|(row, &rhs)| (dot(row, v) - rhs).abs() <= tol)
    }

    /// Largest constraint violation at `v` (0 when feasible).
    pub fn max_violation(&self, v: &[f64]) -> f64 {
        let ineq = self
            .a
            .iter()
            .zip(&self.b)
            .map(|(row, &rhs)| dot(row, v) - rhs)
            .fold(0.0, f64::max);
        self.e
            .iter()
            .zip(&self.f)
            .map(|(row, &rhs)| (dot(row, v) - rhs).abs())
            .fold(ineq, f64::max)
    }

    pub fn enumerate_vertices(&self) -> Result<VertexSet> {
        self.enumerate_vertices_with(&EnumerationOptions::default())
    }

    pub fn enumerate_vertices_with(&self, opts: &EnumerationOptions) -> Result<VertexSet> {
        enumerate(self, opts)
    }
}

/// Order in which inequalities are inserted into the double description.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertionOrder {
    /// Next constraint is the one violated by the most current rays.
    MaxViolation,
    /// Next constraint is the one violated by the fewest (but at least one) rays.
    MinViolation,
    /// Constraints in the order they were added.
    Index,
}

#[derive(Clone, Debug)]
pub struct EnumerationOptions {
    pub max_vertices: usize,
    pub feas_tol: f64,
    pub dedupe_tol: f64,
    pub order: InsertionOrder,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions {
            max_vertices: DEFAULT_MAX_VERTICES,
            feas_tol: FEAS_TOL,
            dedupe_tol: DEDUPE_TOL,
            order: InsertionOrder::MaxViolation,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VertexSet {
    pub vertices: Vec<Vec<f64>>,
    pub dedupe_tol: f64,
}

impl VertexSet {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Vec<f64>> {
        self.vertices.iter()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Affine parametrisation `v = origin + sum_k t_k basis[k]` of `{E v = f}`.
struct AffineHull {
    origin: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

impl AffineHull {
    fn lift(&self, t: &[f64]) -> Vec<f64> {
        let mut v = self.origin.clone();
        for (tk, bk) in t.iter().zip(&self.basis) {
            for (vi, bi) in v.iter_mut().zip(bk) {
                *vi += tk * bi;
            }
        }
        v
    }
}

/// Reduced row echelon form with partial pivoting.
fn affine_hull(e: &[Vec<f64>], f: &[f64], dim: usize, tol: f64) -> Result<AffineHull> {
    let mut rows: Vec<Vec<f64>> = e
        .iter()
        .zip(f)
        .map(|(r, &rhs)| {
            let mut row = r.clone();
            row.push(rhs);
            let s = max_abs(r);
            if s > 0.0 {
                row.iter_mut().for_each(|v| *v /= s);
            }
            row
        })
        .collect();
    let mut pivots: Vec<usize> = Vec::new();
    let mut r = 0;
    for col in 0..dim {
        if r == rows.len() {
            break;
        }
        let (best, mag) = (r..rows.len())
            .map(|i| (i, rows[i][col].abs()))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if mag <= tol {
            continue;
        }
        rows.swap(r, best);
        let p = rows[r][col];
        rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r {
                let factor = row[col];
                if factor != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= factor * pv;
                    }
                }
            }
        }
        pivots.push(col);
        r += 1;
    }
    if rows[r..].iter().any(|row| row[dim].abs() > tol) {
        return Err(Error::EmptyPolytope);
    }
    let mut origin = vec![0.0; dim];
    for (i, &pc) in pivots.iter().enumerate() {
        origin[pc] = rows[i][dim];
    }
    let mut is_pivot = vec![false; dim];
    pivots.iter().for_each(|&p| is_pivot[p] = true);
    let basis = (0..dim)
        .filter(|&c| !is_pivot[c])
        .map(|free| {
            let mut v = vec![0.0; dim];
            v[free] = 1.0;
            for (i, &pc) in pivots.iter().enumerate() {
                v[pc] = -rows[i][free];
            }
            v
        })
        .collect();
    Ok(AffineHull { origin, basis })
}

/// Fixed-width bitset over constraint indices.
#[derive(Clone, Debug, PartialEq, Eq)]
struct ZeroSet(Vec<u64>);

impl ZeroSet {
    fn new(bits: usize) -> Self {
        ZeroSet(vec![0; bits.div_ceil(64).max(1)])
    }

    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn intersect(&self, other: &ZeroSet) -> ZeroSet {
        ZeroSet(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    fn intersection_count(&self, other: &ZeroSet) -> usize {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &word)| {
            (0..64).filter(move |b| word >> b & 1 == 1).map(move |b| w * 64 + b)
        })
    }

    fn is_subset_of(&self, other: &ZeroSet) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & !b == 0)
    }
}

struct Ray {
    z: Vec<f64>,
    zero: ZeroSet,
}

fn normalise(mut z: Vec<f64>) -> Vec<f64> {
    let s = max_abs(&z);
    if s > 0.0 {
        z.iter_mut().for_each(|v| *v /= s);
    }
    z
}

/// Picks a maximal set of linearly independent rows (greedy Gaussian elimination).
fn independent_rows(h: &[Vec<f64>], tol: f64) -> Vec<usize> {
    let d = h.first().map_or(0, |r| r.len());
    let mut reduced: Vec<(Vec<f64>, usize)> = Vec::new();
    let mut chosen = Vec::new();
    for (i, row) in h.iter().enumerate() {
        let mut r = row.clone();
        for (basis, col) in &reduced {
            let factor = r[*col] / basis[*col];
            if factor != 0.0 {
                for (v, b) in r.iter_mut().zip(basis) {
                    *v -= factor * b;
                }
            }
        }
        let (col, mag) = r
            .iter()
            .enumerate()
            .map(|(k, v)| (k, v.abs()))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if mag > tol {
            reduced.push((r, col));
            chosen.push(i);
            if chosen.len() == d {
                break;
            }
        }
    }
    chosen
}

/// Inverse of a square matrix by Gauss-Jordan elimination with partial pivoting.
fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut aug: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..n {
        let best = (col..n).max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))?;
        if aug[best][col].abs() < 1e-14 {
            return None;
        }
        aug.swap(col, best);
        let p = aug[col][col];
        aug[col].iter_mut().for_each(|v| *v /= p);
        let pivot_row = aug[col].clone();
        for (i, row) in aug.iter_mut().enumerate() {
            if i != col {
                let factor = row[col];
                if factor != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= factor * pv;
                    }
                }
            }
        }
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Above this many rays the adjacency test switches from the combinatorial
/// check (scan all rays) to the algebraic one (rank of the common zero set).
const COMBINATORIAL_LIMIT: usize = 512;
const ADJACENCY_RANK_TOL: f64 = 1e-9;

/// True iff the rows of `h` indexed by `set` span at least `target` dimensions.
fn rank_at_least(h: &[Vec<f64>], set: &ZeroSet, target: usize, tol: f64) -> bool {
    let mut reduced: Vec<(Vec<f64>, usize)> = Vec::with_capacity(target);
    let mut left = set.iter().count();
    for i in set.iter() {
        if reduced.len() + left < target {
            return false;
        }
        left -= 1;
        let mut r = h[i].clone();
        for (basis, col) in &reduced {
            let factor = r[*col];
            if factor != 0.0 {
                for (v, b) in r.iter_mut().zip(basis) {
                    *v -= factor * b;
                }
            }
        }
        let (col, mag) = r
            .iter()
            .enumerate()
            .map(|(k, v)| (k, v.abs()))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if mag > tol {
            let p = r[col];
            r.iter_mut().for_each(|v| *v /= p);
            reduced.push((r, col));
            if reduced.len() >= target {
                return true;
            }
        }
    }
    reduced.len() >= target
}

/// Extreme rays of the pointed cone `{z : h_i . z >= 0}`.
fn extreme_rays(h: &[Vec<f64>], opts: &EnumerationOptions) -> Result<Vec<Vec<f64>>> {
    let tol = opts.feas_tol;
    let m = h.len();
    let d = h[0].len();
    let initial = independent_rows(h, 1e-10);
    if initial.len() < d {
        // the cone contains a line: the polytope has a nontrivial lineality space
        return Err(Error::UnboundedPolytope);
    }
    let basis: Vec<Vec<f64>> = initial.iter().map(|&i| h[i].clone()).collect();
    let inv = invert(&basis).ok_or(Error::UnboundedPolytope)?;
    let mut rays: Vec<Ray> = (0..d)
        .map(|i| {
            let z = normalise((0..d).map(|r| inv[r][i]).collect());
            let mut zero = ZeroSet::new(m);
            for (j, &row) in initial.iter().enumerate() {
                if j != i {
                    zero.insert(row);
                }
            }
            Ray { z, zero }
        })
        .collect();

    let mut remaining: Vec<usize> = (0..m).filter(|i| !initial.contains(i)).collect();
    while !remaining.is_empty() {
        let pick = match opts.order {
            InsertionOrder::Index => 0,
            InsertionOrder::MaxViolation | InsertionOrder::MinViolation => {
                let counts: Vec<usize> = remaining
                    .par_iter()
                    .map(|&ci| rays.iter().filter(|r| dot(&h[ci], &r.z) < -tol).count())
                    .collect();
                let candidates = counts.iter().enumerate().filter(|(_, &n)| n > 0);
                let best = if opts.order == InsertionOrder::MaxViolation {
                    candidates.max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(&x.0)))
                } else {
                    candidates.min_by(|x, y| x.1.cmp(y.1).then(x.0.cmp(&y.0)))
                };
                match best {
                    Some((k, _)) => k,
                    // every remaining constraint is satisfied by the current cone
                    None => break,
                }
            }
        };
        let ci = remaining.remove(pick);
        let row = &h[ci];
        let vals: Vec<f64> = rays.iter().map(|r| dot(row, &r.z)).collect();
        let pos: Vec<usize> = (0..rays.len()).filter(|&k| vals[k] > tol).collect();
        let neg: Vec<usize> = (0..rays.len()).filter(|&k| vals[k] < -tol).collect();
        if neg.is_empty() {
            for (r, &v) in rays.iter_mut().zip(&vals) {
                if v.abs() <= tol {
                    r.zero.insert(ci);
                }
            }
            continue;
        }
        let new_rays: Vec<Ray> = pos
            .par_iter()
            .flat_map_iter(|&p| {
                let rays = &rays;
                let vals = &vals;
                neg.iter().filter_map(move |&n| {
                    if rays[p].zero.intersection_count(&rays[n].zero) + 2 < d {
                        return None;
                    }
                    let common = rays[p].zero.intersect(&rays[n].zero);
                    let adjacent = if rays.len() <= COMBINATORIAL_LIMIT {
                        !rays
                            .iter()
                            .enumerate()
                            .any(|(k, r)| k != p && k != n && common.is_subset_of(&r.zero))
                    } else {
                        rank_at_least(h, &common, d - 2, ADJACENCY_RANK_TOL)
                    };
                    if !adjacent {
                        return None;
                    }
                    let (vp, vn) = (vals[p], vals[n]);
                    let z = normalise(
                        rays[n]
                            .z
                            .iter()
                            .zip(&rays[p].z)
                            .map(|(zn, zp)| vp * zn - vn * zp)
                            .collect(),
                    );
                    let mut zero = common;
                    zero.insert(ci);
                    Some(Ray { z, zero })
                })
            })
            .collect();
        let mut next: Vec<Ray> = Vec::with_capacity(rays.len() - neg.len() + new_rays.len());
        for (mut r, &v) in rays.into_iter().zip(&vals) {
            if v >= -tol {
                if v <= tol {
                    r.zero.insert(ci);
                }
                next.push(r);
            }
        }
        next.extend(new_rays);
        if next.len() > opts.max_vertices {
            return Err(Error::BudgetExceeded {
                limit: opts.max_vertices,
            });
        }
        rays = next;
    }
    Ok(rays.into_iter().map(|r| r.z).collect())
}

fn enumerate(p: &Polytope, opts: &EnumerationOptions) -> Result<VertexSet> {
    let hull = affine_hull(&p.e, &p.f, p.dim, 1e-12)?;
    let k = hull.basis.len();
    // homogenised constraints on (x0, t): x0 (b - A v0) - (A N) t >= 0
    let mut h: Vec<Vec<f64>> = Vec::with_capacity(p.a.len() + 1);
    for (row, &rhs) in p.a.iter().zip(&p.b) {
        let mut hr = Vec::with_capacity(k + 1);
        hr.push(rhs - dot(row, &hull.origin));
        hr.extend(hull.basis.iter().map(|bk| -dot(row, bk)));
        let s = max_abs(&hr);
        if s == 0.0 {
            continue;
        }
        hr.iter_mut().for_each(|v| *v /= s);
        if hr[1..].iter().all(|v| v.abs() <= 1e-14) {
            // constant constraint after projection: either vacuous or infeasible
            if hr[0] < 0.0 {
                return Err(Error::EmptyPolytope);
            }
            continue;
        }
        h.push(hr);
    }
    let mut x0 = vec![0.0; k + 1];
    x0[0] = 1.0;
    h.push(x0);

    let rays = extreme_rays(&h, opts)?;
    let scale_tol = opts.feas_tol;
    let (bounded, recession): (Vec<_>, Vec<_>) = rays.into_iter().partition(|z| z[0] > scale_tol);
    if bounded.is_empty() {
        return Err(Error::EmptyPolytope);
    }
    if !recession.is_empty() {
        return Err(Error::UnboundedPolytope);
    }
    let mut vertices: Vec<Vec<f64>> = bounded
        .into_iter()
        .map(|z| {
            let t: Vec<f64> = z[1..].iter().map(|v| v / z[0]).collect();
            hull.lift(&t)
        })
        .filter(|v| v.iter().all(|x| x.is_finite()))
        .collect();
    let row_tol = |row: &[f64]| opts.feas_tol * max_abs(row).max(1.0);
    vertices.retain(|v| {
        p.a.iter().zip(&p.b).all(|(row, &rhs)| dot(row, v) <= rhs + row_tol(row))
            && p.e
                .iter()
                .zip(&p.f)
                .all(|(row, &rhs)| (dot(row, v) - rhs).abs() <= row_tol(row))
    });
    Ok(VertexSet {
        vertices: dedupe(vertices, opts.dedupe_tol),
        dedupe_tol: opts.dedupe_tol,
    })
}

/// Sorts lexicographically and removes points within `tol` (max norm) of a kept point.
fn dedupe(mut pts: Vec<Vec<f64>>, tol: f64) -> Vec<Vec<f64>> {
    // round-off around zero would otherwise scramble the lexicographic order
    for v in pts.iter_mut().flatten() {
        if v.abs() <= 1e-12 {
            *v = 0.0;
        }
    }
    pts.sort_by(|a, b| lex_cmp(a, b));
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(pts.len());
    for p in pts {
        let first = p.first().copied().unwrap_or(0.0);
        let dup = kept
            .iter()
            .rev()
            .take_while(|k| (first - k.first().copied().unwrap_or(0.0)).abs() <= tol)
            .any(|k| k.iter().zip(&p).all(|(x, y)| (x - y).abs() <= tol));
        if !dup {
            kept.push(p);
        }
    }
    kept
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplex(d: usize) -> Polytope {
        let mut p = Polytope::new(d);
        p.add_nonnegativity().add_eq(vec![1.0; d], 1.0);
        p
    }

    fn assert_same(got: &VertexSet, want: Vec<Vec<f64>>) {
        assert_eq!(got.len(), want.len(), "got {:?}", got.vertices);
        for w in &want {
            assert!(
                got.iter().any(|g| g.iter().zip(w).all(|(x, y)| (x - y).abs() < 1e-9)),
                "missing {w:?} in {:?}",
                got.vertices
            );
        }
    }

    #[test]
    fn simplex_vertices_are_basis_vectors() {
        let vs = simplex(3).enumerate_vertices().unwrap();
        assert_same(
            &vs,
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        );
    }

    #[test]
    fn unit_square_has_four_corners() {
        let mut p = Polytope::new(2);
        p.add_nonnegativity();
        p.add_le(vec![1.0, 0.0], 1.0).add_le(vec![0.0, 1.0], 1.0);
        assert_same(
            &p.enumerate_vertices().unwrap(),
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
        );
    }

    #[test]
    fn clipped_segment() {
        let mut p = simplex(2);
        p.add_ge(vec![1.0, 0.0], 0.4).add_le(vec![1.0, 0.0], 0.6);
        assert_same(
            &p.enumerate_vertices().unwrap(),
            vec![vec![0.4, 0.6], vec![0.6, 0.4]],
        );
    }

    #[test]
    fn single_point_polytope() {
        let mut p = simplex(2);
        p.add_ge(vec![1.0, 0.0], 0.5).add_le(vec![1.0, 0.0], 0.5);
        assert_same(&p.enumerate_vertices().unwrap(), vec![vec![0.5, 0.5]]);
    }

    #[test]
    fn octahedron_is_degenerate_but_complete() {
        // |x| + |y| + |z| <= 1: every vertex lies on four facets
        let mut p = Polytope::new(3);
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    p.add_le(vec![sx, sy, sz], 1.0);
                }
            }
        }
        let mut want = Vec::new();
        for i in 0..3 {
            for s in [-1.0, 1.0] {
                let mut v = vec![0.0; 3];
                v[i] = s;
                want.push(v);
            }
        }
        assert_same(&p.enumerate_vertices().unwrap(), want);
    }

    #[test]
    fn empty_and_unbounded_are_reported() {
        let mut empty = simplex(2);
        empty.add_ge(vec![1.0, 0.0], 2.0);
        assert!(matches!(empty.enumerate_vertices(), Err(Error::EmptyPolytope)));

        let mut inconsistent = simplex(2);
        inconsistent.add_eq(vec![1.0, 1.0], 2.0);
        assert!(matches!(inconsistent.enumerate_vertices(), Err(Error::EmptyPolytope)));

        let mut ray = Polytope::new(2);
        ray.add_nonnegativity();
        assert!(matches!(ray.enumerate_vertices(), Err(Error::UnboundedPolytope)));

        let mut slab = Polytope::new(2);
        slab.add_le(vec![1.0, 0.0], 1.0).add_ge(vec![1.0, 0.0], 0.0);
        assert!(matches!(slab.enumerate_vertices(), Err(Error::UnboundedPolytope)));
    }

    #[test]
    fn budget_is_enforced() {
        let mut cube = Polytope::new(4);
        cube.add_nonnegativity();
        for i in 0..4 {
            let mut row = vec![0.0; 4];
            row[i] = 1.0;
            cube.add_le(row, 1.0);
        }
        let opts = EnumerationOptions {
            max_vertices: 8,
            ..Default::default()
        };
        assert!(matches!(
            cube.enumerate_vertices_with(&opts),
            Err(Error::BudgetExceeded { limit: 8 })
        ));
        assert_eq!(cube.enumerate_vertices().unwrap().len(), 16);
    }

    #[test]
    fn insertion_orders_agree() {
        let mut p = simplex(4);
        p.add_le(vec![1.0, 1.0, 0.0, 0.0], 0.7)
            .add_ge(vec![0.0, 1.0, 0.0, 1.0], 0.2)
            .add_le(vec![0.3, 0.0, 1.0, 0.0], 0.5);
        let base = p.enumerate_vertices().unwrap();
        for order in [InsertionOrder::MinViolation, InsertionOrder::Index] {
            let opts = EnumerationOptions {
                order,
                ..Default::default()
            };
            assert_same(&p.enumerate_vertices_with(&opts).unwrap(), base.vertices.clone());
        }
    }

    #[test]
    fn contains_respects_tolerance() {
        let s = simplex(3);
        assert!(s.contains(&[1.0, 0.0, 0.0], 1e-9));
        assert!(!s.contains(&[1.1, -0.1, 0.0], 1e-9));
        assert!(!s.contains(&[1.0, 0.0], 1e-9));
    }
}
