//! Polyhedral uncertainty sets `{u >= 0 : P u <= r}`.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numsolve::{self, LpSpec, RowKind, Sense, SolveError, SolveStatus};
use crate::par::{self, Parallelism};

/// Largest dimension accepted by [`Polytope::enumerate_vertices`].
pub const MAX_ENUMERATION_DIM: usize = 12;
/// Vertex deduplication tolerance (max-norm).
pub const VERTEX_TOL: f64 = 1e-9;
/// Tolerance on the unit axis projections.
pub const AXIS_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("the set is empty")]
    EmptySet,
    #[error("the set is unbounded")]
    Unbounded,
    #[error("dimension {dim} exceeds the enumeration limit {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },
    #[error("malformed polytope: {0}")]
    Shape(String),
    #[error("vertex {0} has a negative coordinate")]
    NegativeVertex(usize),
    #[error(transparent)]
    Solver(#[from] SolveError),
}

/// `{u in R^n : u >= 0, P u <= r}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    pub dim: usize,
    pub p: Vec<Vec<f64>>,
    pub r: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauResult {
    pub tau: f64,
    pub witness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub contains_zero: bool,
    pub inside_unit_box: bool,
    /// `None` for an unbounded coordinate (or an empty set).
    pub axis_projections: Vec<Option<f64>>,
    pub is_valid_uncertainty_set: bool,
}

impl Polytope {
    pub fn new(dim: usize, p: Vec<Vec<f64>>, r: Vec<f64>) -> Result<Self, GeometryError> {
        if p.len() != r.len() {
            return Err(GeometryError::Shape(format!("{} rows in P but {} entries in r", p.len(), r.len())));
        }
        if let Some(i) = p.iter().position(|row| row.len() != dim) {
            return Err(GeometryError::Shape(format!("row {i} of P does not have {dim} columns")));
        }
        if p.iter().flatten().chain(&r).any(|v| !v.is_finite()) {
            return Err(GeometryError::Shape("non-finite entry".into()));
        }
        Ok(Polytope { dim, p, r })
    }

    /// `[0, 1]^n`.
    pub fn unit_box(n: usize) -> Self {
        let p = (0..n).map(|i| unit(n, i, 1.0)).collect();
        Polytope { dim: n, p, r: vec![1.0; n] }
    }

    /// `{u >= 0 : sum u <= 1}`.
    pub fn simplex(n: usize) -> Self {
        Polytope {
            dim: n,
            p: vec![vec![1.0; n]],
            r: vec![1.0],
        }
    }

    /// Inequality description of `conv(points)` by exhaustive facet search.
    /// Accepted when `dim <= 3` or at most 12 distinct points are given.
    pub fn from_vertices(points: &[Vec<f64>]) -> Result<Self, GeometryError> {
        hull::inequalities(points)
    }

    pub fn num_rows(&self) -> usize {
        self.r.len()
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        u.len() == self.dim
            && u.iter().all(|v| *v >= -tol)
            && self.p.iter().zip(&self.r).all(|(row, r)| dot(row, u) <= r + tol)
    }

    /// `max w^T u` over the set, with a maximiser.
    pub fn maximize(&self, w: &[f64]) -> Result<(f64, Vec<f64>), GeometryError> {
        let mut lp = LpSpec::new(Sense::Max, w.to_vec());
        for (row, r) in self.p.iter().zip(&self.r) {
            lp.add_row(row.clone(), RowKind::Le, *r);
        }
        let out = numsolve::solve_lp(&lp)?;
        match out.status {
            SolveStatus::Optimal => Ok((out.objective, out.primal)),
            SolveStatus::Infeasible => Err(GeometryError::EmptySet),
            SolveStatus::Unbounded => Err(GeometryError::Unbounded),
        }
    }

    /// The largest `tau` with some `u` in the set and `u_i >= tau` for all `i`.
    pub fn tau(&self) -> Result<TauResult, GeometryError> {
        let n = self.dim;
        let mut cost = vec![0.0; n + 1];
        cost[n] = 1.0;
        let mut lp = LpSpec::new(Sense::Max, cost);
        for i in 0..n {
            let mut row = vec![0.0; n + 1];
            row[i] = -1.0;
            row[n] = 1.0;
            lp.add_row(row, RowKind::Le, 0.0);
        }
        for (row, r) in self.p.iter().zip(&self.r) {
            let mut ext = row.clone();
            ext.push(0.0);
            lp.add_row(ext, RowKind::Le, *r);
        }
        let out = numsolve::solve_lp(&lp)?;
        match out.status {
            SolveStatus::Optimal => Ok(TauResult {
                tau: out.objective,
                witness: out.primal[..n].to_vec(),
            }),
            SolveStatus::Infeasible => Err(GeometryError::EmptySet),
            SolveStatus::Unbounded => Err(GeometryError::Unbounded),
        }
    }

    /// Per-coordinate maxima; `None` marks an unbounded direction.
    pub fn axis_maxima(&self) -> Result<Vec<Option<f64>>, GeometryError> {
        let results = par::map_range(Parallelism::default(), self.dim, |i| self.maximize(&unit(self.dim, i, 1.0)));
        results
            .into_iter()
            .map(|r| match r {
                Ok((v, _)) => Ok(Some(v)),
                Err(GeometryError::Unbounded) => Ok(None),
                Err(e) => Err(e),
            })
            .collect()
    }

    /// Checks the standing assumptions on an uncertainty set. Never fails:
    /// an empty set reports no projections and is invalid.
    pub fn validate(&self) -> ValidationReport {
        let contains_zero = self.r.iter().all(|r| *r >= -1e-12);
        let axis_projections = self.axis_maxima().unwrap_or_else(|_| vec![None; self.dim]);
        let inside_unit_box = axis_projections.iter().all(|m| m.is_some_and(|m| m <= 1.0 + AXIS_TOL));
        let unit_axes = axis_projections.iter().all(|m| m.is_some_and(|m| (m - 1.0).abs() <= AXIS_TOL));
        ValidationReport {
            contains_zero,
            inside_unit_box,
            axis_projections,
            is_valid_uncertainty_set: contains_zero && inside_unit_box && unit_axes,
        }
    }

    /// All vertices, deduplicated and sorted lexicographically.
    pub fn enumerate_vertices(&self) -> Result<Vec<Vec<f64>>, GeometryError> {
        let n = self.dim;
        if n > MAX_ENUMERATION_DIM {
            return Err(GeometryError::DimensionTooLarge {
                dim: n,
                limit: MAX_ENUMERATION_DIM,
            });
        }
        if n == 0 {
            return Ok(if self.r.iter().all(|r| *r >= -VERTEX_TOL) { vec![Vec::new()] } else { Vec::new() });
        }
        // Rows of P followed by -u_i <= 0.
        let mut rows: Vec<(Vec<f64>, f64)> = self.p.iter().cloned().zip(self.r.iter().cloned()).collect();
        rows.extend((0..n).map(|i| (unit(n, i, -1.0), 0.0)));
        let subsets: Vec<Vec<usize>> = (0..rows.len()).combinations(n).collect();
        let candidates = par::map(Parallelism::default(), &subsets, |subset| {
            let a = DMatrix::from_fn(n, n, |i, j| rows[subset[i]].0[j]);
            let scale: f64 = subset.iter().map(|&k| norm(&rows[k].0).max(1e-300)).product();
            let lu = a.lu();
            if lu.determinant().abs() <= 1e-12 * scale {
                return None;
            }
            let b = DVector::from_iterator(n, subset.iter().map(|&k| rows[k].1));
            let v = lu.solve(&b)?;
            let v: Vec<f64> = v.iter().map(|x| if x.abs() < 1e-12 { 0.0 } else { *x }).collect();
            self.contains(&v, VERTEX_TOL).then(|| v.into_iter().map(|x| x.max(0.0)).collect::<Vec<_>>())
        });
        let mut vertices: Vec<Vec<f64>> = Vec::new();
        for v in candidates.into_iter().flatten() {
            if !vertices.iter().any(|w| max_dist(w, &v) <= VERTEX_TOL) {
                vertices.push(v);
            }
        }
        vertices.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        Ok(vertices)
    }

    /// Cartesian product of `periods` copies, coordinate `(i, t)` at `t * dim + i`.
    pub fn lift_product(&self, periods: usize) -> Polytope {
        let n = self.dim;
        let mut p = Vec::with_capacity(self.num_rows() * periods);
        let mut r = Vec::with_capacity(p.capacity());
        for t in 0..periods {
            for (row, rv) in self.p.iter().zip(&self.r) {
                let mut lifted = vec![0.0; n * periods];
                lifted[t * n..(t + 1) * n].copy_from_slice(row);
                p.push(lifted);
                r.push(*rv);
            }
        }
        Polytope { dim: n * periods, p, r }
    }

    /// `diag(1/s) U`, i.e. coordinate `i` divided by `s[i] > 0`.
    pub fn rescale(&self, s: &[f64]) -> Polytope {
        let p = self
            .p
            .iter()
            .map(|row| row.iter().zip(s).map(|(a, s)| a * s).collect())
            .collect();
        Polytope {
            dim: self.dim,
            p,
            r: self.r.clone(),
        }
    }

    /// `self x other` over concatenated coordinates.
    pub fn product(&self, other: &Polytope) -> Polytope {
        let n = self.dim + other.dim;
        let mut p = Vec::with_capacity(self.num_rows() + other.num_rows());
        for row in &self.p {
            let mut ext = row.clone();
            ext.resize(n, 0.0);
            p.push(ext);
        }
        for row in &other.p {
            let mut ext = vec![0.0; self.dim];
            ext.extend_from_slice(row);
            p.push(ext);
        }
        let mut r = self.r.clone();
        r.extend_from_slice(&other.r);
        Polytope { dim: n, p, r }
    }
}

/// Cartesian power of a vertex list, coordinate `(i, t)` at `t * n + i`.
/// These are exactly the vertices of [`Polytope::lift_product`].
pub fn product_vertices(vertices: &[Vec<f64>], periods: usize) -> Vec<Vec<f64>> {
    (0..periods)
        .map(|_| vertices.iter())
        .multi_cartesian_product()
        .map(|combo| combo.into_iter().flatten().cloned().collect())
        .collect()
}

fn unit(n: usize, i: usize, v: f64) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = v;
    e
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn max_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
}

mod hull {
    use super::*;

    const RANK_TOL: f64 = 1e-9;
    const SIDE_TOL: f64 = 1e-9;

    pub(super) fn inequalities(points: &[Vec<f64>]) -> Result<Polytope, GeometryError> {
        let Some(first) = points.first() else {
            return Err(GeometryError::EmptySet);
        };
        let n = first.len();
        if points.iter().any(|p| p.len() != n) {
            return Err(GeometryError::Shape("points of mixed dimension".into()));
        }
        if let Some(k) = points.iter().position(|p| p.iter().any(|v| *v < -1e-12)) {
            return Err(GeometryError::NegativeVertex(k));
        }
        let mut pts: Vec<Vec<f64>> = Vec::new();
        for p in points {
            if !pts.iter().any(|q| max_dist(p, q) <= VERTEX_TOL) {
                pts.push(p.iter().map(|v| v.max(0.0)).collect());
            }
        }
        if n > 3 && pts.len() > 12 {
            return Err(GeometryError::DimensionTooLarge { dim: n, limit: 3 });
        }

        let v0 = pts[0].clone();
        let diffs: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().zip(&v0).map(|(a, b)| a - b).collect()).collect();
        // Affine directions from the eigenvectors of D^T D.
        let gram = DMatrix::from_fn(n, n, |i, j| diffs.iter().map(|d| d[i] * d[j]).sum::<f64>());
        let scale = 1.0 + gram.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let eig = SymmetricEigen::new(gram);
        let mut span: Vec<Vec<f64>> = Vec::new();
        let mut normal: Vec<Vec<f64>> = Vec::new();
        for (k, lam) in eig.eigenvalues.iter().enumerate() {
            let v: Vec<f64> = eig.eigenvectors.column(k).iter().cloned().collect();
            if *lam > RANK_TOL * scale {
                span.push(v);
            } else {
                normal.push(v);
            }
        }

        let mut p_rows: Vec<Vec<f64>> = Vec::new();
        let mut r: Vec<f64> = Vec::new();
        for c in &normal {
            let c = clean(c);
            let h = dot(&c, &v0);
            p_rows.push(c.clone());
            r.push(h);
            p_rows.push(c.iter().map(|v| -v).collect());
            r.push(-h);
        }

        let k = span.len();
        if k > 0 {
            let xi: Vec<Vec<f64>> = diffs.iter().map(|d| span.iter().map(|b| dot(b, d)).collect()).collect();
            let mut facets: Vec<(Vec<f64>, f64)> = Vec::new();
            for subset in (0..xi.len()).combinations(k) {
                let Some(g) = hyperplane_normal(&subset.iter().map(|&s| xi[s].clone()).collect::<Vec<_>>()) else {
                    continue;
                };
                let h = dot(&g, &xi[subset[0]]);
                let vals: Vec<f64> = xi.iter().map(|x| dot(&g, x)).collect();
                let (g, h) = if vals.iter().all(|v| *v <= h + SIDE_TOL) {
                    (g, h)
                } else if vals.iter().all(|v| *v >= h - SIDE_TOL) {
                    (g.iter().map(|v| -v).collect(), -h)
                } else {
                    continue;
                };
                if !facets.iter().any(|(f, fh)| max_dist(f, &g) <= 1e-9 && (fh - h).abs() <= 1e-9) {
                    facets.push((g, h));
                }
            }
            for (g, h) in facets {
                let row: Vec<f64> = (0..n).map(|j| span.iter().zip(&g).map(|(b, gk)| b[j] * gk).sum()).collect();
                let row = clean(&row);
                let rhs = h + dot(&row, &v0);
                p_rows.push(row);
                r.push(if rhs.abs() < 1e-12 { 0.0 } else { rhs });
            }
        }
        Polytope::new(n, p_rows, r)
    }

    /// Unit normal of the hyperplane through `k` points in `R^k`.
    fn hyperplane_normal(points: &[Vec<f64>]) -> Option<Vec<f64>> {
        let k = points.len();
        if k == 1 {
            return Some(vec![1.0]);
        }
        let rows: Vec<Vec<f64>> = points[1..]
            .iter()
            .map(|p| p.iter().zip(&points[0]).map(|(a, b)| a - b).collect())
            .collect();
        let gram = DMatrix::from_fn(k, k, |i, j| rows.iter().map(|r| r[i] * r[j]).sum::<f64>());
        let scale = 1.0 + gram.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        // the differences must span a (k-1)-dimensional space
        if eig.eigenvalues[order[1]] <= RANK_TOL * scale {
            return None;
        }
        let g: Vec<f64> = eig.eigenvectors.column(order[0]).iter().cloned().collect();
        let nrm = norm(&g);
        Some(g.iter().map(|v| v / nrm).collect())
    }

    fn clean(v: &[f64]) -> Vec<f64> {
        v.iter().map(|x| if x.abs() < 1e-13 { 0.0 } else { *x }).collect()
    }
}
