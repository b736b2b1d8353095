//! Two-phase dense tableau simplex.

use nalgebra::{DMatrix, DVector};

use super::standard::StdForm;
use super::{RowKind, SolveError, Tolerances};

pub(crate) enum LpResult {
    Optimal { x: Vec<f64>, y: Vec<f64> },
    Infeasible,
    Unbounded,
}

/// Switch from Dantzig to Bland pricing after this many degenerate pivots in a row.
const STALL_LIMIT: usize = 30;

struct Tableau {
    /// m rows of (columns..., rhs)
    t: Vec<Vec<f64>>,
    /// reduced costs, last entry is minus the objective
    d: Vec<f64>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, e: usize) {
        let w = self.ncols + 1;
        let piv = self.t[r][e];
        for v in self.t[r].iter_mut() {
            *v /= piv;
        }
        self.t[r][e] = 1.0;
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[e];
            if f != 0.0 {
                for k in 0..w {
                    row[k] -= f * prow[k];
                }
                row[e] = 0.0;
            }
        }
        let f = self.d[e];
        if f != 0.0 {
            for k in 0..w {
                self.d[k] -= f * prow[k];
            }
            self.d[e] = 0.0;
        }
        self.basis[r] = e;
    }

    fn set_costs(&mut self, cost: &[f64]) {
        let w = self.ncols + 1;
        let mut d = vec![0.0; w];
        d[..self.ncols].copy_from_slice(cost);
        for (i, &bj) in self.basis.iter().enumerate() {
            let cb = cost[bj];
            if cb != 0.0 {
                for k in 0..w {
                    d[k] -= cb * self.t[i][k];
                }
            }
        }
        self.d = d;
    }

    /// Runs pivots until optimal. Returns false on unboundedness.
    fn optimize(&mut self, allowed: &[bool], tol: &Tolerances, max_iter: usize) -> Result<bool, SolveError> {
        let m = self.t.len();
        let rhs = self.ncols;
        let dscale = 1.0 + self.d[..self.ncols].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let opt_tol = 1e-11 * dscale;
        let mut stall = 0usize;
        for _ in 0..max_iter {
            let bland = stall >= STALL_LIMIT;
            let mut enter = None;
            let mut best = -opt_tol;
            for j in 0..self.ncols {
                if !allowed[j] || self.d[j] >= -opt_tol {
                    continue;
                }
                if bland {
                    enter = Some(j);
                    break;
                }
                if self.d[j] < best {
                    best = self.d[j];
                    enter = Some(j);
                }
            }
            let Some(e) = enter else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.t[i][e];
                if a <= tol.pivot_tol {
                    continue;
                }
                let ratio = self.t[i][rhs].max(0.0) / a;
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        let tie = (ratio - lr).abs() <= 1e-12 * (1.0 + lr.abs());
                        if ratio < lr && !tie || tie && self.basis[i] < self.basis[li] {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Ok(false);
            };
            if ratio <= 1e-14 {
                stall += 1;
            } else {
                stall = 0;
            }
            self.pivot(r, e);
        }
        Err(SolveError::NumericBreakdown(format!(
            "simplex did not converge within {max_iter} pivots"
        )))
    }
}

pub(crate) fn solve(std: &StdForm, tol: &Tolerances) -> Result<LpResult, SolveError> {
    let m = std.b.len();
    let n = std.num_cols();

    // Normalise to b >= 0, then add slack/surplus/artificial columns.
    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut kinds = Vec::with_capacity(m);
    let mut row_sign = Vec::with_capacity(m);
    for i in 0..m {
        let s = if std.b[i] < 0.0 { -1.0 } else { 1.0 };
        rows.push(std.a[i].iter().map(|v| s * v).collect::<Vec<_>>());
        rhs.push(s * std.b[i]);
        kinds.push(if s < 0.0 { std.kinds[i].flipped() } else { std.kinds[i] });
        row_sign.push(s);
    }
    let n_slack = kinds.iter().filter(|k| **k != RowKind::Eq).count();
    let n_art = kinds.iter().filter(|k| **k != RowKind::Le).count();
    let ncols = n + n_slack + n_art;
    let mut full = vec![vec![0.0; ncols]; m];
    let mut basis = vec![0usize; m];
    let mut is_art = vec![false; ncols];
    let mut next_slack = n;
    let mut next_art = n + n_slack;
    for i in 0..m {
        full[i][..n].copy_from_slice(&rows[i]);
        match kinds[i] {
            RowKind::Le => {
                full[i][next_slack] = 1.0;
                basis[i] = next_slack;
                next_slack += 1;
            }
            RowKind::Ge => {
                full[i][next_slack] = -1.0;
                next_slack += 1;
                full[i][next_art] = 1.0;
                is_art[next_art] = true;
                basis[i] = next_art;
                next_art += 1;
            }
            RowKind::Eq => {
                full[i][next_art] = 1.0;
                is_art[next_art] = true;
                basis[i] = next_art;
                next_art += 1;
            }
        }
    }
    let initial_basis = basis.clone();
    let mut tab = Tableau {
        t: full
            .iter()
            .zip(&rhs)
            .map(|(r, b)| {
                let mut v = r.clone();
                v.push(*b);
                v
            })
            .collect(),
        d: Vec::new(),
        basis,
        ncols,
    };
    let max_iter = 20_000 + 50 * (m + ncols);
    let bscale = 1.0 + rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    if n_art > 0 {
        let phase1: Vec<f64> = (0..ncols).map(|j| if is_art[j] { 1.0 } else { 0.0 }).collect();
        tab.set_costs(&phase1);
        let allowed = vec![true; ncols];
        tab.optimize(&allowed, tol, max_iter)?;
        let infeas: f64 = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &j)| is_art[j])
            .map(|(i, _)| tab.t[i][ncols].max(0.0))
            .sum();
        if infeas > 1e-9 * bscale {
            return Ok(LpResult::Infeasible);
        }
        // Drive zero-level artificials out of the basis where possible.
        for i in 0..m {
            if !is_art[tab.basis[i]] {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..ncols {
                if is_art[j] {
                    continue;
                }
                let a = tab.t[i][j].abs();
                if a > 1e-9 && best.is_none_or(|(_, b)| a > b) {
                    best = Some((j, a));
                }
            }
            if let Some((j, _)) = best {
                tab.pivot(i, j);
            }
        }
    }

    let mut cost = vec![0.0; ncols];
    cost[..n].copy_from_slice(&std.c);
    tab.set_costs(&cost);
    let allowed: Vec<bool> = (0..ncols).map(|j| !is_art[j]).collect();
    if !tab.optimize(&allowed, tol, max_iter)? {
        return Ok(LpResult::Unbounded);
    }

    // Tableau values as a fallback.
    let mut x_tab = vec![0.0; ncols];
    for (i, &bj) in tab.basis.iter().enumerate() {
        x_tab[bj] = tab.t[i][ncols];
    }
    let y_tab: Vec<f64> = initial_basis.iter().map(|&j| cost[j] - tab.d[j]).collect();

    let (x_all, y_norm) = refactor(&full, &rhs, &cost, &tab.basis).unwrap_or((x_tab, y_tab));
    let x: Vec<f64> = x_all[..n].iter().map(|v| if v.abs() < 1e-15 { 0.0 } else { *v }).collect();
    let y: Vec<f64> = y_norm.iter().zip(&row_sign).map(|(y, s)| y * s).collect();
    Ok(LpResult::Optimal { x, y })
}

/// Re-solves `B x_B = b` and `B^T y = c_B` for the final basis.
fn refactor(full: &[Vec<f64>], rhs: &[f64], cost: &[f64], basis: &[usize]) -> Option<(Vec<f64>, Vec<f64>)> {
    let m = basis.len();
    if m == 0 {
        return Some((vec![0.0; cost.len()], Vec::new()));
    }
    let bmat = DMatrix::from_fn(m, m, |i, k| full[i][basis[k]]);
    let lu = bmat.clone().lu();
    let xb = lu.solve(&DVector::from_column_slice(rhs))?;
    let cb = DVector::from_iterator(m, basis.iter().map(|&j| cost[j]));
    let y = bmat.transpose().lu().solve(&cb)?;
    if xb.iter().any(|v| !v.is_finite() || *v < -1e-9) || y.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut x = vec![0.0; cost.len()];
    for (k, &j) in basis.iter().enumerate() {
        x[j] = xb[k].max(0.0);
    }
    Some((x, y.iter().cloned().collect()))
}
