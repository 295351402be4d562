//! Double description output against brute-force vertex enumeration.

use funnel_core::polytope::{EnumerationOptions, InsertionOrder, DEDUPE_TOL};
use funnel_core::{Error, Polytope};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

#[derive(Clone, Debug)]
struct Instance {
    d: usize,
    le: Vec<(Vec<f64>, f64)>,
    eq: Vec<(Vec<f64>, f64)>,
}

impl Instance {
    fn polytope(&self) -> Polytope {
        let mut p = Polytope::new(self.d);
        for (r, b) in &self.le {
            p.add_le(r.clone(), *b);
        }
        for (r, b) in &self.eq {
            p.add_eq(r.clone(), *b);
        }
        p
    }
}

/// Points where a full-rank set of `d` active constraints (all equalities
/// plus some inequalities) meets, filtered for feasibility and deduplicated.
fn brute_force(inst: &Instance) -> Vec<Vec<f64>> {
    let d = inst.d;
    let k = d.saturating_sub(inst.eq.len());
    let n = inst.le.len();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for mask in 0u32..1 << n {
        if mask.count_ones() as usize != k {
            continue;
        }
        let rows: Vec<&(Vec<f64>, f64)> =
            inst.eq.iter().chain((0..n).filter(|i| mask >> i & 1 == 1).map(|i| &inst.le[i])).collect();
        if rows.len() != d {
            continue;
        }
        let m = DMatrix::from_fn(d, d, |i, j| rows[i].0[j]);
        if m.clone().svd(false, false).rank(1e-9) < d {
            continue;
        }
        let Some(x) = m.lu().solve(&DVector::from_fn(d, |i, _| rows[i].1)) else { continue };
        let x: Vec<f64> = x.iter().copied().collect();
        let dot = |r: &[f64]| r.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        let feasible = inst.le.iter().all(|(r, b)| dot(r) <= b + 1e-9)
            && inst.eq.iter().all(|(r, b)| (dot(r) - b).abs() <= 1e-9);
        if feasible && !out.iter().any(|v| close(v, &x)) {
            out.push(x);
        }
    }
    out
}

fn close(u: &[f64], v: &[f64]) -> bool {
    u.iter().zip(v).all(|(a, b)| (a - b).abs() <= DEDUPE_TOL)
}

fn same_set(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    a.len() == b.len() && a.iter().all(|u| b.iter().any(|v| close(u, v))) && b.iter().all(|u| a.iter().any(|v| close(u, v)))
}

/// Box `[-1, 1]^d` plus random cuts, optionally one equality through the
/// origin. Integer data makes degenerate vertices common.
fn instance() -> impl Strategy<Value = Instance> {
    (1usize..=4, any::<bool>(), any::<bool>()).prop_flat_map(|(d, integer, with_eq)| {
        let max_cuts = 12 - 2 * d;
        let coef = if integer {
            (-2i32..=2).prop_map(f64::from).boxed()
        } else {
            (-1.0f64..1.0).boxed()
        };
        let rhs = if integer {
            (0i32..=2).prop_map(f64::from).boxed()
        } else {
            (0.05f64..1.0).boxed()
        };
        (
            prop::collection::vec((prop::collection::vec(coef.clone(), d), rhs), 0..=max_cuts),
            prop::collection::vec(coef, d),
        )
            .prop_map(move |(cuts, eq_row)| {
                let mut le = Vec::new();
                for i in 0..d {
                    let mut e = vec![0.0; d];
                    e[i] = 1.0;
                    le.push((e.clone(), 1.0));
                    e[i] = -1.0;
                    le.push((e, 1.0));
                }
                le.extend(cuts);
                let eq = if with_eq && d > 1 && eq_row.iter().any(|v| *v != 0.0) {
                    vec![(eq_row, 0.0)]
                } else {
                    vec![]
                };
                Instance { d, le, eq }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_brute_force(inst in instance()) {
        let got = inst.polytope().enumerate_vertices().unwrap();
        let want = brute_force(&inst);
        prop_assert!(same_set(&got.vertices, &want), "got {:?}\nwant {:?}", got.vertices, want);
    }

    #[test]
    fn insertion_order_does_not_matter(inst in instance()) {
        let p = inst.polytope();
        let base = p.enumerate_vertices().unwrap().vertices;
        for order in [InsertionOrder::MinViolation, InsertionOrder::Index] {
            let opts = EnumerationOptions { order, ..EnumerationOptions::default() };
            prop_assert!(same_set(&p.enumerate_vertices_with(&opts).unwrap().vertices, &base));
        }
    }

    #[test]
    fn vertices_are_feasible_and_rescaling_rows_changes_nothing(inst in instance(), k in 0.1f64..10.0) {
        let p = inst.polytope();
        let base = p.enumerate_vertices().unwrap().vertices;
        prop_assert!(base.iter().all(|v| p.contains(v, 1e-9)));
        let scaled = Instance {
            d: inst.d,
            le: inst.le.iter().map(|(r, b)| (r.iter().map(|v| v * k).collect(), b * k)).collect(),
            eq: inst.eq.clone(),
        };
        prop_assert!(same_set(&scaled.polytope().enumerate_vertices().unwrap().vertices, &base));
    }
}

#[test]
fn empty_and_unbounded() {
    let mut p = Polytope::new(2);
    p.add_nonnegativity().add_le(vec![1.0, 1.0], -1.0);
    assert!(matches!(p.enumerate_vertices(), Err(Error::EmptyPolytope)));
    let mut q = Polytope::new(2);
    q.add_nonnegativity();
    assert!(matches!(q.enumerate_vertices(), Err(Error::UnboundedPolytope)));
}

#[test]
fn vertex_budget_is_enforced() {
    // the 4-cube has 16 vertices
    let mut p = Polytope::new(4);
    p.add_nonnegativity();
    for i in 0..4 {
        let mut e = vec![0.0; 4];
        e[i] = 1.0;
        p.add_le(e, 1.0);
    }
    assert_eq!(p.enumerate_vertices().unwrap().len(), 16);
    let opts = EnumerationOptions { max_vertices: 10, ..EnumerationOptions::default() };
    assert!(matches!(p.enumerate_vertices_with(&opts), Err(Error::BudgetExceeded { .. })));
}
