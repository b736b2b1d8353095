use serde::{Deserialize, Serialize};

use super::{LpSpec, RowKind, Sense, Tolerances};

/// Optimality residuals of a primal/dual pair, all measured in minimisation
/// orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub complementarity_residual: f64,
    pub stationarity_residual: f64,
    /// Absolute primal/dual objective gap.
    pub duality_gap: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

impl Certificate {
    pub fn passes(&self, tol: &Tolerances) -> bool {
        self.primal_residual <= tol.feas_tol
            && self.dual_residual <= tol.feas_tol
            && self.complementarity_residual <= tol.feas_tol
            && self.stationarity_residual <= tol.cert_tol
            && self.duality_gap <= tol.cert_tol * (1.0 + self.primal_objective.abs())
    }

    /// Largest of the four KKT residuals.
    pub fn max_kkt_residual(&self) -> f64 {
        self.primal_residual
            .max(self.dual_residual)
            .max(self.complementarity_residual)
            .max(self.stationarity_residual)
    }

    pub(crate) fn compute(
        spec: &LpSpec,
        quadratic: Option<&[Vec<f64>]>,
        x: &[f64],
        duals: &[f64],
        reduced_costs: &[f64],
        objective: f64,
    ) -> Self {
        let s = match spec.sense {
            Sense::Min => 1.0,
            Sense::Max => -1.0,
        };
        let mut primal_residual: f64 = 0.0;
        let mut dual_residual: f64 = 0.0;
        let mut compl: f64 = 0.0;
        let mut stat: f64 = 0.0;
        let mut dual_obj = 0.0;

        for (i, row) in spec.matrix.iter().enumerate() {
            let ax: f64 = row.iter().zip(x).map(|(a, x)| a * x).sum();
            let slack = ax - spec.rhs[i];
            let y = s * duals[i];
            dual_obj += spec.rhs[i] * y;
            let scale = 1.0 + spec.rhs[i].abs();
            match spec.kinds[i] {
                RowKind::Le => {
                    primal_residual = primal_residual.max(slack / scale);
                    dual_residual = dual_residual.max(y);
                }
                RowKind::Ge => {
                    primal_residual = primal_residual.max(-slack / scale);
                    dual_residual = dual_residual.max(-y);
                }
                RowKind::Eq => primal_residual = primal_residual.max(slack.abs() / scale),
            }
            if spec.kinds[i] != RowKind::Eq {
                compl = compl.max((y * slack).abs());
            }
        }

        for j in 0..x.len() {
            let r = s * reduced_costs[j];
            let (l, u) = (spec.lower[j], spec.upper[j]);
            if l.is_finite() {
                primal_residual = primal_residual.max((l - x[j]) / (1.0 + l.abs()));
            }
            if u.is_finite() {
                primal_residual = primal_residual.max((x[j] - u) / (1.0 + u.abs()));
            }
            let at_lower = l.is_finite() && (x[j] - l).abs() <= 1e-9 * (1.0 + l.abs());
            let at_upper = u.is_finite() && (u - x[j]).abs() <= 1e-9 * (1.0 + u.abs());
            match (at_lower, at_upper) {
                (false, false) => stat = stat.max(r.abs()),
                (true, false) => dual_residual = dual_residual.max(-r),
                (false, true) => dual_residual = dual_residual.max(r),
                (true, true) => {}
            }
            if r > 0.0 {
                if l.is_finite() {
                    compl = compl.max(r * (x[j] - l).abs());
                    dual_obj += r * l;
                }
            } else if r < 0.0 && u.is_finite() {
                compl = compl.max(-r * (u - x[j]).abs());
                dual_obj += r * u;
            }
        }

        let primal_obj = s * objective;
        if let Some(q) = quadratic {
            let xqx: f64 = (0..x.len())
                .map(|i| (0..x.len()).map(|j| x[i] * q[i][j] * x[j]).sum::<f64>())
                .sum();
            dual_obj -= 0.5 * s * xqx;
        }
        Certificate {
            primal_residual: primal_residual.max(0.0),
            dual_residual: dual_residual.max(0.0),
            complementarity_residual: compl,
            stationarity_residual: stat,
            duality_gap: (primal_obj - dual_obj).abs(),
            primal_objective: primal_obj,
            dual_objective: dual_obj,
        }
    }
}
