#![allow(dead_code)]

//! Brute-force references kept apart from the solver code paths.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use robust_peakload::geometry::Polytope;
use robust_peakload::numsolve::{LpSpec, QpSpec, RowKind, Sense};

/// Dense `a x (kind) b` constraint.
#[derive(Clone)]
struct Constraint {
    a: Vec<f64>,
    b: f64,
    eq: bool,
}

/// All constraints of `spec` as `a x <= b` or `a x = b`, including bounds.
fn constraints(spec: &LpSpec) -> Vec<Constraint> {
    let n = spec.num_vars();
    let mut out = Vec::new();
    for ((row, b), kind) in spec.matrix.iter().zip(&spec.rhs).zip(&spec.kinds) {
        match kind {
            RowKind::Le => out.push(Constraint { a: row.clone(), b: *b, eq: false }),
            RowKind::Ge => out.push(Constraint {
                a: row.iter().map(|v| -v).collect(),
                b: -b,
                eq: false,
            }),
            RowKind::Eq => out.push(Constraint { a: row.clone(), b: *b, eq: true }),
        }
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        if spec.lower[j].is_finite() {
            e[j] = -1.0;
            out.push(Constraint {
                a: e.clone(),
                b: -spec.lower[j],
                eq: false,
            });
        }
        if spec.upper[j].is_finite() {
            e[j] = 1.0;
            out.push(Constraint {
                a: e,
                b: spec.upper[j],
                eq: false,
            });
        }
    }
    out
}

fn feasible(cons: &[Constraint], x: &[f64], tol: f64) -> bool {
    cons.iter().all(|c| {
        let ax: f64 = c.a.iter().zip(x).map(|(a, x)| a * x).sum();
        if c.eq {
            (ax - c.b).abs() <= tol
        } else {
            ax <= c.b + tol
        }
    })
}

/// Best objective over all basic feasible points of a bounded LP; `None`
/// when no basic point is feasible.
pub fn lp_brute_force(spec: &LpSpec) -> Option<f64> {
    let n = spec.num_vars();
    let cons = constraints(spec);
    let mut best: Option<f64> = None;
    for subset in (0..cons.len()).combinations(n) {
        // Equality rows outside the subset are enforced by `feasible`.
        let a = DMatrix::from_fn(n, n, |i, j| cons[subset[i]].a[j]);
        let b = DVector::from_iterator(n, subset.iter().map(|&k| cons[k].b));
        let Some(x) = a.clone().lu().solve(&b) else { continue };
        if (&a * &x - &b).amax() > 1e-9 || x.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let x: Vec<f64> = x.iter().cloned().collect();
        if !feasible(&cons, &x, 1e-9) {
            continue;
        }
        let obj: f64 = spec.cost.iter().zip(&x).map(|(c, x)| c * x).sum();
        best = Some(match (best, spec.sense) {
            (None, _) => obj,
            (Some(b), Sense::Min) => b.min(obj),
            (Some(b), Sense::Max) => b.max(obj),
        });
    }
    best
}

/// Minimum of a strictly convex QP in minimisation form by enumerating
/// active sets and solving each equality-constrained KKT system.
pub fn qp_brute_force(spec: &QpSpec) -> Option<f64> {
    assert_eq!(spec.lp.sense, Sense::Min);
    let n = spec.lp.num_vars();
    let cons = constraints(&spec.lp);
    let eqs: Vec<usize> = (0..cons.len()).filter(|&k| cons[k].eq).collect();
    let ineqs: Vec<usize> = (0..cons.len()).filter(|&k| !cons[k].eq).collect();
    let q = DMatrix::from_fn(n, n, |i, j| spec.quadratic[i][j]);
    let mut best: Option<f64> = None;
    for size in 0..=ineqs.len().min(n) {
        for active in ineqs.iter().cloned().combinations(size) {
            let rows: Vec<usize> = eqs.iter().cloned().chain(active).collect();
            let m = rows.len();
            let mut kkt = DMatrix::zeros(n + m, n + m);
            let mut rhs = DVector::zeros(n + m);
            kkt.view_mut((0, 0), (n, n)).copy_from(&q);
            for j in 0..n {
                rhs[j] = -spec.lp.cost[j];
            }
            for (r, &k) in rows.iter().enumerate() {
                for j in 0..n {
                    kkt[(n + r, j)] = cons[k].a[j];
                    kkt[(j, n + r)] = cons[k].a[j];
                }
                rhs[n + r] = cons[k].b;
            }
            let Some(sol) = kkt.clone().lu().solve(&rhs) else { continue };
            if (&kkt * &sol - &rhs).amax() > 1e-8 {
                continue;
            }
            let x: Vec<f64> = sol.iter().take(n).cloned().collect();
            if !feasible(&cons, &x, 1e-9) {
                continue;
            }
            let obj = objective(spec, &x);
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
    }
    best
}

pub fn objective(spec: &QpSpec, x: &[f64]) -> f64 {
    let n = x.len();
    let mut v: f64 = spec.lp.cost.iter().zip(x).map(|(c, x)| c * x).sum();
    for i in 0..n {
        for j in 0..n {
            v += 0.5 * x[i] * spec.quadratic[i][j] * x[j];
        }
    }
    v
}

/// Bounded LP with up to five variables and rows of mixed kind.
pub fn random_lp<R: Rng>(rng: &mut R) -> LpSpec {
    let n = rng.gen_range(1..=5);
    let m = rng.gen_range(1..=5);
    let sense = if rng.gen_bool(0.5) { Sense::Min } else { Sense::Max };
    let mut lp = LpSpec::new(sense, (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect());
    for j in 0..n {
        lp.upper[j] = rng.gen_range(1.0..=3.0);
    }
    for _ in 0..m {
        let kind = match rng.gen_range(0..6) {
            0 => RowKind::Eq,
            1 | 2 => RowKind::Ge,
            _ => RowKind::Le,
        };
        let row = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        lp.add_row(row, kind, rng.gen_range(-1.0..=2.0));
    }
    lp
}

/// Strictly convex QP with up to four variables and three rows.
pub fn random_qp<R: Rng>(rng: &mut R) -> QpSpec {
    let n = rng.gen_range(1..=4);
    let m = rng.gen_range(0..=3);
    let mut lp = LpSpec::new(Sense::Min, (0..n).map(|_| rng.gen_range(-2.0..=2.0)).collect());
    for j in 0..n {
        if rng.gen_bool(0.3) {
            lp.upper[j] = rng.gen_range(0.5..=2.0);
        }
    }
    for _ in 0..m {
        let kind = if rng.gen_bool(0.2) { RowKind::Eq } else { RowKind::Le };
        let row = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        lp.add_row(row, kind, rng.gen_range(0.0..=2.0));
    }
    let l: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect();
    let quadratic = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| l[k][i] * l[k][j]).sum::<f64>() + if i == j { 0.1 } else { 0.0 })
                .collect()
        })
        .collect();
    QpSpec { lp, quadratic }
}

/// `max_u min_i u_i` over a two-dimensional set on a square grid.
pub fn grid_maximin_2d(set: &Polytope, step: f64) -> f64 {
    let k = (1.0 / step).round() as usize;
    let mut best: f64 = 0.0;
    for a in 0..=k {
        for b in 0..=k {
            let u = [a as f64 * step, b as f64 * step];
            if set.contains(&u, 1e-12) {
                best = best.max(u[0].min(u[1]));
            }
        }
    }
    best
}

/// Vertices of the subsidy example's uncertainty set.
pub fn kite_points() -> Vec<Vec<f64>> {
    vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.75, 0.75]]
}

pub fn same_points(a: &[Vec<f64>], b: &[Vec<f64>], tol: f64) -> bool {
    let close = |p: &Vec<f64>, q: &Vec<f64>| p.iter().zip(q).all(|(x, y)| (x - y).abs() <= tol);
    a.len() == b.len() && a.iter().all(|p| b.iter().any(|q| close(p, q))) && b.iter().all(|q| a.iter().any(|p| close(p, q)))
}

/// Vertices of the planar hull of `pts` by the monotone chain.
pub fn hull_2d(pts: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut p: Vec<(f64, f64)> = pts.iter().map(|v| (v[0], v[1])).collect();
    p.sort_by(|a, b| a.partial_cmp(b).unwrap());
    p.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    if p.len() < 3 {
        return p.into_iter().map(|(x, y)| vec![x, y]).collect();
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> =
            if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 1e-12 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull.into_iter().map(|(x, y)| vec![x, y]).collect()
}
