//! Convex QP via Lemke's complementary pivoting.
//!
//! `min c^T x + 1/2 x^T Q x` s.t. `G x >= h`, `x >= 0` has KKT conditions
//!
//! ```text
//! w = q + M z,  w, z >= 0,  w^T z = 0
//! M = [ Q  -G^T ]   q = [  c ]   z = [ x      ]
//!     [ G    0  ]       [ -h ]       [ lambda ]
//! ```
//!
//! `M` is copositive-plus whenever `Q` is PSD, so Lemke's method either finds
//! a complementary solution or ends on a secondary ray.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use super::standard::StdForm;
use super::{RowKind, SolveError, Tolerances};

pub(crate) enum QpResult {
    Optimal { x: Vec<f64>, y: Vec<f64> },
    Ray,
}

/// How a standard-form row is represented among the `>=` rows.
enum RowMap {
    Single { k: usize, sign: f64 },
    Pair { plus: usize, minus: usize },
}

pub(crate) fn solve(std: &StdForm, tol: &Tolerances) -> Result<QpResult, SolveError> {
    let n = std.num_cols();
    let mut g: Vec<Vec<f64>> = Vec::new();
    let mut h: Vec<f64> = Vec::new();
    let mut maps = Vec::with_capacity(std.b.len());
    for (i, row) in std.a.iter().enumerate() {
        match std.kinds[i] {
            RowKind::Ge => {
                maps.push(RowMap::Single { k: g.len(), sign: 1.0 });
                g.push(row.clone());
                h.push(std.b[i]);
            }
            RowKind::Le => {
                maps.push(RowMap::Single { k: g.len(), sign: -1.0 });
                g.push(row.iter().map(|v| -v).collect());
                h.push(-std.b[i]);
            }
            RowKind::Eq => {
                let plus = g.len();
                g.push(row.clone());
                h.push(std.b[i]);
                g.push(row.iter().map(|v| -v).collect());
                h.push(-std.b[i]);
                maps.push(RowMap::Pair { plus, minus: plus + 1 });
            }
        }
    }
    let mg = g.len();
    let size = n + mg;
    let zero_q = vec![vec![0.0; n]; n];
    let q = std.q.as_ref().unwrap_or(&zero_q);

    let mut mmat = vec![vec![0.0; size]; size];
    for i in 0..n {
        mmat[i][..n].copy_from_slice(&q[i]);
        for k in 0..mg {
            mmat[i][n + k] = -g[k][i];
        }
    }
    for k in 0..mg {
        mmat[n + k][..n].copy_from_slice(&g[k]);
    }
    let mut qv: Vec<f64> = std.c.clone();
    qv.extend(h.iter().map(|v| -v));

    let z = match lemke(&mmat, &qv, tol)? {
        Some(z) => z,
        None => return Ok(QpResult::Ray),
    };
    let x: Vec<f64> = z[..n].to_vec();
    let lam = &z[n..];
    let y = maps
        .iter()
        .map(|m| match *m {
            RowMap::Single { k, sign } => sign * lam[k],
            RowMap::Pair { plus, minus } => lam[plus] - lam[minus],
        })
        .collect();
    Ok(QpResult::Optimal { x, y })
}

/// Returns `z` solving the LCP, or `None` on ray termination.
fn lemke(m: &[Vec<f64>], q: &[f64], tol: &Tolerances) -> Result<Option<Vec<f64>>, SolveError> {
    let size = q.len();
    if q.iter().all(|v| *v >= 0.0) {
        return Ok(Some(vec![0.0; size]));
    }
    // Columns: w_0..w_{n-1}, z_0..z_{n-1}, z0, rhs.
    let z0 = 2 * size;
    let rhs = 2 * size + 1;
    let width = rhs + 1;
    let mut t = vec![vec![0.0; width]; size];
    for i in 0..size {
        t[i][i] = 1.0;
        for j in 0..size {
            t[i][size + j] = -m[i][j];
        }
        t[i][z0] = -1.0;
        t[i][rhs] = q[i];
    }
    let mut basis: Vec<usize> = (0..size).collect();

    let mut r = 0;
    for i in 1..size {
        if q[i] < q[r] {
            r = i;
        }
    }
    pivot(&mut t, &mut basis, r, z0);
    let mut entering = size + r; // complement of w_r

    let max_iter = 1000 + 50 * size * size;
    for _ in 0..max_iter {
        let Some(row) = lex_ratio(&t, &basis, entering, size, z0, tol) else {
            return Ok(None);
        };
        let leaving = basis[row];
        pivot(&mut t, &mut basis, row, entering);
        if leaving == z0 {
            return Ok(Some(extract(&t, &basis, m, q, size)));
        }
        entering = if leaving < size { leaving + size } else { leaving - size };
    }
    Err(SolveError::NumericBreakdown(format!(
        "complementary pivoting did not terminate within {max_iter} pivots"
    )))
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, e: usize) {
    let piv = t[r][e];
    for v in t[r].iter_mut() {
        *v /= piv;
    }
    t[r][e] = 1.0;
    let prow = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i == r {
            continue;
        }
        let f = row[e];
        if f != 0.0 {
            for (v, p) in row.iter_mut().zip(&prow) {
                *v -= f * p;
            }
            row[e] = 0.0;
        }
    }
    basis[r] = e;
}

/// Lexicographic minimum ratio test on `(rhs, B^-1)` rows.
fn lex_ratio(t: &[Vec<f64>], basis: &[usize], e: usize, size: usize, z0: usize, tol: &Tolerances) -> Option<usize> {
    let rhs = 2 * size + 1;
    let candidates: Vec<usize> = (0..t.len()).filter(|&i| t[i][e] > tol.pivot_tol.max(1e-11)).collect();
    if candidates.is_empty() {
        return None;
    }
    let key = |i: usize, k: usize| -> f64 {
        let v = if k == 0 { t[i][rhs] } else { t[i][k - 1] };
        v / t[i][e]
    };
    let cmp = |a: usize, b: usize| -> Ordering {
        for k in 0..=size {
            let (ka, kb) = (key(a, k), key(b, k));
            let eps = 1e-11 * (1.0 + ka.abs().max(kb.abs()));
            if (ka - kb).abs() > eps {
                return ka.partial_cmp(&kb).unwrap_or(Ordering::Equal);
            }
            if k == 0 {
                // z0 leaves on a tie in the ratio itself.
                if basis[a] == z0 {
                    return Ordering::Less;
                }
                if basis[b] == z0 {
                    return Ordering::Greater;
                }
            }
        }
        basis[a].cmp(&basis[b])
    };
    candidates.into_iter().min_by(|&a, &b| cmp(a, b))
}

/// Reads the solution after refactoring the final complementary basis.
fn extract(t: &[Vec<f64>], basis: &[usize], m: &[Vec<f64>], q: &[f64], size: usize) -> Vec<f64> {
    let rhs = 2 * size + 1;
    let mut z_tab = vec![0.0; size];
    for (i, &b) in basis.iter().enumerate() {
        if (size..2 * size).contains(&b) {
            z_tab[b - size] = t[i][rhs].max(0.0);
        }
    }
    // Column of [I | -M] for each basic variable; solve B v = q.
    let bmat = DMatrix::from_fn(size, size, |i, k| {
        let var = basis[k];
        if var < size {
            if i == var {
                1.0
            } else {
                0.0
            }
        } else {
            -m[i][var - size]
        }
    });
    let Some(v) = bmat.lu().solve(&DVector::from_column_slice(q)) else {
        return z_tab;
    };
    if v.iter().any(|x| !x.is_finite() || *x < -1e-9) {
        return z_tab;
    }
    let mut z = vec![0.0; size];
    for (k, &var) in basis.iter().enumerate() {
        if var >= size {
            z[var - size] = v[k].max(0.0);
        }
    }
    z
}
