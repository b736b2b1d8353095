//! Dense LP and convex QP solving with dual multipliers.
//!
//! Linear programs go through a two-phase tableau simplex (Dantzig pricing,
//! Bland's rule once pivots stall); convex quadratic programs are turned into
//! a linear complementarity problem and solved with Lemke's method under a
//! lexicographic ratio test. Both paths finish by refactoring the final basis,
//! so primal values and multipliers come from a fresh linear solve rather than
//! from the accumulated tableau.
//!
//! Multiplier convention: `duals[i]` is the sensitivity of the optimal
//! objective to the right-hand side of row `i`, in the problem's own sense.
//! For a minimisation a binding `>=` row has a nonnegative dual and a binding
//! `<=` row a nonpositive one; a maximisation flips both. `reduced_costs` is
//! `grad f(x) - A^T duals`, i.e. the multipliers of the variable bounds.

mod certificate;
mod lemke;
mod simplex;
mod standard;

pub use certificate::Certificate;

use std::sync::RwLock;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Objective orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

/// Row relation `a_i x (<=|>=|=) b_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

impl RowKind {
    fn flipped(self) -> Self {
        match self {
            RowKind::Le => RowKind::Ge,
            RowKind::Ge => RowKind::Le,
            RowKind::Eq => RowKind::Eq,
        }
    }
}

/// Global numerical tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Primal/dual feasibility and complementarity.
    pub feas_tol: f64,
    /// Relative strong-duality gap.
    pub cert_tol: f64,
    /// Smallest pivot magnitude accepted.
    pub pivot_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feas_tol: 1e-9,
            cert_tol: 1e-7,
            pivot_tol: 1e-12,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("invalid problem: {0}")]
    InvalidSpec(String),
    #[error("numerical breakdown: {0}")]
    NumericBreakdown(String),
    #[error("quadratic term is not convex (smallest eigenvalue {min_eigenvalue:e})")]
    NotConvex { min_eigenvalue: f64 },
}

/// A dense linear program.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSpec {
    pub sense: Sense,
    pub cost: Vec<f64>,
    /// Row-major, one `Vec` per constraint.
    pub matrix: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub kinds: Vec<RowKind>,
    /// `f64::NEG_INFINITY` marks a free-below variable.
    pub lower: Vec<f64>,
    /// `f64::INFINITY` marks no upper bound.
    pub upper: Vec<f64>,
}

impl LpSpec {
    /// Empty problem over `n` nonnegative variables.
    pub fn new(sense: Sense, cost: Vec<f64>) -> Self {
        let n = cost.len();
        LpSpec {
            sense,
            cost,
            matrix: Vec::new(),
            rhs: Vec::new(),
            kinds: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    /// Appends a row and returns its index.
    pub fn add_row(&mut self, coeffs: Vec<f64>, kind: RowKind, rhs: f64) -> usize {
        debug_assert_eq!(coeffs.len(), self.cost.len());
        self.matrix.push(coeffs);
        self.kinds.push(kind);
        self.rhs.push(rhs);
        self.rhs.len() - 1
    }

    /// Appends a row given as sparse `(column, coefficient)` pairs.
    pub fn add_sparse_row(&mut self, entries: &[(usize, f64)], kind: RowKind, rhs: f64) -> usize {
        let mut row = vec![0.0; self.cost.len()];
        for &(j, v) in entries {
            row[j] += v;
        }
        self.add_row(row, kind, rhs)
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let n = self.cost.len();
        if self.matrix.len() != self.rhs.len() || self.kinds.len() != self.rhs.len() {
            return Err(SolveError::InvalidSpec(format!(
                "{} matrix rows, {} rhs entries, {} row kinds",
                self.matrix.len(),
                self.rhs.len(),
                self.kinds.len()
            )));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(SolveError::InvalidSpec("bound vectors do not match cost length".into()));
        }
        for (i, row) in self.matrix.iter().enumerate() {
            if row.len() != n {
                return Err(SolveError::InvalidSpec(format!(
                    "row {i} has {} columns, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(SolveError::InvalidSpec(format!("row {i} has a non-finite entry")));
            }
        }
        if self.cost.iter().chain(&self.rhs).any(|v| !v.is_finite()) {
            return Err(SolveError::InvalidSpec("non-finite cost or rhs".into()));
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY || l > u {
                return Err(SolveError::InvalidSpec(format!("bad bounds [{l}, {u}] on variable {j}")));
            }
        }
        Ok(())
    }
}

/// A dense convex QP: objective `c^T x + 1/2 x^T Q x` in the stated sense.
/// For `Sense::Max` the quadratic must be negative semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSpec {
    pub lp: LpSpec,
    pub quadratic: Vec<Vec<f64>>,
}

impl QpSpec {
    pub fn new(lp: LpSpec) -> Self {
        let n = lp.num_vars();
        QpSpec {
            lp,
            quadratic: vec![vec![0.0; n]; n],
        }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        self.lp.validate()?;
        let n = self.lp.num_vars();
        if self.quadratic.len() != n || self.quadratic.iter().any(|r| r.len() != n) {
            return Err(SolveError::InvalidSpec("quadratic matrix has wrong shape".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (self.quadratic[i][j], self.quadratic[j][i]);
                if !a.is_finite() {
                    return Err(SolveError::InvalidSpec("non-finite quadratic entry".into()));
                }
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(SolveError::InvalidSpec(format!(
                        "quadratic matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Smallest eigenvalue of the quadratic in minimisation orientation.
    pub fn min_convexity_eigenvalue(&self) -> f64 {
        let n = self.lp.num_vars();
        if n == 0 {
            return 0.0;
        }
        let sign = match self.lp.sense {
            Sense::Min => 1.0,
            Sense::Max => -1.0,
        };
        let m = DMatrix::from_fn(n, n, |i, j| sign * 0.5 * (self.quadratic[i][j] + self.quadratic[j][i]));
        SymmetricEigen::new(m).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub primal: Vec<f64>,
    /// NaN unless optimal.
    pub objective: f64,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub active_set: Vec<usize>,
    pub certificate: Option<Certificate>,
}

impl SolveOutcome {
    fn not_optimal(status: SolveStatus) -> Self {
        SolveOutcome {
            status,
            primal: Vec::new(),
            objective: f64::NAN,
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            active_set: Vec::new(),
            certificate: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

static ACTIVE_TOLERANCES: RwLock<Option<Tolerances>> = RwLock::new(None);

/// Replaces the tolerances used by [`solve_lp`] and [`solve_qp`] for the
/// rest of the process; `None` restores the defaults.
pub fn set_active_tolerances(tol: Option<Tolerances>) {
    *ACTIVE_TOLERANCES.write().unwrap_or_else(|e| e.into_inner()) = tol;
}

pub fn active_tolerances() -> Tolerances {
    ACTIVE_TOLERANCES
        .read()
        .unwrap_or_else(|e| e.into_inner())
        .unwrap_or_default()
}

/// Solves an LP with the active tolerances.
pub fn solve_lp(spec: &LpSpec) -> Result<SolveOutcome, SolveError> {
    solve_lp_with(spec, &active_tolerances())
}

pub fn solve_lp_with(spec: &LpSpec, tol: &Tolerances) -> Result<SolveOutcome, SolveError> {
    spec.validate()?;
    let std = standard::StdForm::from_spec(spec, None);
    match simplex::solve(&std, tol)? {
        simplex::LpResult::Infeasible => Ok(SolveOutcome::not_optimal(SolveStatus::Infeasible)),
        simplex::LpResult::Unbounded => Ok(SolveOutcome::not_optimal(SolveStatus::Unbounded)),
        simplex::LpResult::Optimal { x, y } => Ok(finish(spec, None, &std, &x, &y, tol)),
    }
}

/// Solves a convex QP with the active tolerances.
pub fn solve_qp(spec: &QpSpec) -> Result<SolveOutcome, SolveError> {
    solve_qp_with(spec, &active_tolerances())
}

pub fn solve_qp_with(spec: &QpSpec, tol: &Tolerances) -> Result<SolveOutcome, SolveError> {
    spec.validate()?;
    let min_eig = spec.min_convexity_eigenvalue();
    if min_eig < -1e-9 {
        return Err(SolveError::NotConvex { min_eigenvalue: min_eig });
    }
    let std = standard::StdForm::from_spec(&spec.lp, Some(&spec.quadratic));
    match lemke::solve(&std, tol)? {
        lemke::QpResult::Optimal { x, y } => Ok(finish(&spec.lp, Some(&spec.quadratic), &std, &x, &y, tol)),
        lemke::QpResult::Ray => {
            // Ray termination on a convex QP: either no feasible point or an
            // unbounded direction. A phase-one LP tells them apart.
            let mut feas = spec.lp.clone();
            feas.cost = vec![0.0; feas.num_vars()];
            let std = standard::StdForm::from_spec(&feas, None);
            match simplex::solve(&std, tol)? {
                simplex::LpResult::Infeasible => Ok(SolveOutcome::not_optimal(SolveStatus::Infeasible)),
                _ => Ok(SolveOutcome::not_optimal(SolveStatus::Unbounded)),
            }
        }
    }
}

/// Objective value `c^T x + 1/2 x^T Q x` (no sense flip).
pub fn evaluate_objective(cost: &[f64], quadratic: Option<&[Vec<f64>]>, x: &[f64]) -> f64 {
    let mut v: f64 = cost.iter().zip(x).map(|(c, x)| c * x).sum();
    if let Some(q) = quadratic {
        for (i, row) in q.iter().enumerate() {
            for (j, qij) in row.iter().enumerate() {
                v += 0.5 * x[i] * qij * x[j];
            }
        }
    }
    v
}

fn finish(
    spec: &LpSpec,
    quadratic: Option<&Vec<Vec<f64>>>,
    std: &standard::StdForm,
    x_std: &[f64],
    y_std: &[f64],
    tol: &Tolerances,
) -> SolveOutcome {
    let primal = std.recover_primal(x_std);
    let flip = match spec.sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let duals: Vec<f64> = y_std[..spec.num_rows()].iter().map(|y| flip * y).collect();
    let q_rows = quadratic.map(|q| q.as_slice());
    let objective = evaluate_objective(&spec.cost, q_rows, &primal);
    let n = spec.num_vars();
    let mut reduced_costs = spec.cost.clone();
    if let Some(q) = quadratic {
        for (i, rc) in reduced_costs.iter_mut().enumerate() {
            *rc += (0..n).map(|j| q[i][j] * primal[j]).sum::<f64>();
        }
    }
    for (row, &y) in spec.matrix.iter().zip(&duals) {
        for (rc, a) in reduced_costs.iter_mut().zip(row) {
            *rc -= a * y;
        }
    }
    let active_set = spec
        .matrix
        .iter()
        .enumerate()
        .filter(|(i, row)| {
            let ax: f64 = row.iter().zip(&primal).map(|(a, x)| a * x).sum();
            (ax - spec.rhs[*i]).abs() <= tol.feas_tol.max(1e-9 * spec.rhs[*i].abs()) * 10.0
        })
        .map(|(i, _)| i)
        .collect();
    let certificate = certificate::Certificate::compute(spec, q_rows, &primal, &duals, &reduced_costs, objective);
    SolveOutcome {
        status: SolveStatus::Optimal,
        primal,
        objective,
        duals,
        reduced_costs,
        active_set,
        certificate: Some(certificate),
    }
}
