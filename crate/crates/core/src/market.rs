//! Peak-load market instances and their nominal solves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Polytope, ValidationReport};
use crate::numsolve::{self, Certificate, LpSpec, QpSpec, RowKind, Sense, SolveOutcome, SolveStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Producer {
    pub c_inv: f64,
    pub c_var: f64,
    /// Scaling of the cost uncertainty.
    pub a: f64,
    /// Optional per-period override of `a`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_periods: Option<Vec<f64>>,
}

impl Producer {
    pub fn new(c_inv: f64, c_var: f64, a: f64) -> Self {
        Producer {
            c_inv,
            c_var,
            a,
            a_periods: None,
        }
    }

    pub fn a_at(&self, t: usize) -> f64 {
        self.a_periods.as_ref().map_or(self.a, |v| v[t])
    }
}

/// Fixed demand `d_t` or inverse demand `p_t(s) = alpha_t - beta_t s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DemandSide {
    Fixed { d: Vec<f64> },
    AffineElastic { alpha: Vec<f64>, beta: Vec<f64> },
}

impl DemandSide {
    pub fn is_fixed(&self) -> bool {
        matches!(self, DemandSide::Fixed { .. })
    }

    pub fn periods(&self) -> usize {
        match self {
            DemandSide::Fixed { d } => d.len(),
            DemandSide::AffineElastic { alpha, .. } => alpha.len(),
        }
    }

    /// Inverse demand in period `t`; `None` for fixed demand.
    pub fn price(&self, t: usize, s: f64) -> Option<f64> {
        match self {
            DemandSide::Fixed { .. } => None,
            DemandSide::AffineElastic { alpha, beta } => Some(alpha[t] - beta[t] * s),
        }
    }

    /// Gross consumer value of `s` units in period `t`.
    pub fn surplus(&self, t: usize, s: f64) -> f64 {
        match self {
            DemandSide::Fixed { .. } => 0.0,
            DemandSide::AffineElastic { alpha, beta } => alpha[t] * s - 0.5 * beta[t] * s * s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketInstance {
    pub producers: Vec<Producer>,
    pub demand: DemandSide,
    pub periods: usize,
    /// Per-period uncertainty set over the producers.
    pub uncertainty: Polytope,
    pub validation: ValidationReport,
}

impl MarketInstance {
    /// Checks shapes and signs. An uncertainty set that violates the
    /// standing assumptions is accepted with a warning; the flags are kept
    /// in `validation`.
    pub fn new(producers: Vec<Producer>, demand: DemandSide, uncertainty: Polytope) -> Result<Self> {
        let n = producers.len();
        let periods = demand.periods();
        if n == 0 {
            return Err(Error::InvalidInstance("at least one producer is required".into()));
        }
        if periods == 0 {
            return Err(Error::InvalidInstance("at least one period is required".into()));
        }
        for (i, p) in producers.iter().enumerate() {
            let mut vals = vec![p.c_inv, p.c_var, p.a];
            if let Some(ap) = &p.a_periods {
                if ap.len() != periods {
                    return Err(Error::InvalidInstance(format!(
                        "producer {i}: a_periods has {} entries, expected {periods}",
                        ap.len()
                    )));
                }
                vals.extend(ap);
            }
            if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidInstance(format!(
                    "producer {i}: costs must be finite and nonnegative"
                )));
            }
        }
        match &demand {
            DemandSide::Fixed { d } => {
                if d.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::InvalidInstance("fixed demand must be finite and nonnegative".into()));
                }
            }
            DemandSide::AffineElastic { alpha, beta } => {
                if beta.len() != alpha.len() {
                    return Err(Error::InvalidInstance("alpha and beta differ in length".into()));
                }
                if alpha.iter().any(|v| !v.is_finite()) || beta.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                    return Err(Error::InvalidInstance("demand slopes must be positive".into()));
                }
            }
        }
        if uncertainty.dim != n {
            return Err(Error::InvalidInstance(format!(
                "uncertainty set has dimension {}, expected {n}",
                uncertainty.dim
            )));
        }
        let validation = uncertainty.validate();
        if !validation.is_valid_uncertainty_set {
            log::warn!("uncertainty set violates the standing assumptions: {validation:?}");
        }
        if validation.axis_projections.iter().any(|m| m.is_none()) {
            return Err(Error::InvalidInstance("uncertainty set is empty or unbounded".into()));
        }
        Ok(MarketInstance {
            producers,
            demand,
            periods,
            uncertainty,
            validation,
        })
    }

    pub fn num_producers(&self) -> usize {
        self.producers.len()
    }

    /// Per-coordinate maximum of the per-period set.
    pub fn axis_max(&self) -> Vec<f64> {
        self.validation.axis_projections.iter().map(|m| m.unwrap_or(0.0)).collect()
    }

    /// `c_var_i + a_{i,t} u_{i,t}` indexed `[i][t]`.
    pub fn scenario_costs(&self, u: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.producers
            .iter()
            .enumerate()
            .map(|(i, p)| (0..self.periods).map(|t| p.c_var + p.a_at(t) * u[i][t]).collect())
            .collect()
    }

    /// Costs perceived by strictly robust producers: each coordinate at its
    /// largest value in the set.
    pub fn worst_case_costs(&self) -> Vec<Vec<f64>> {
        let m = self.axis_max();
        let u: Vec<Vec<f64>> = m.iter().map(|mi| vec![*mi; self.periods]).collect();
        self.scenario_costs(&u)
    }

    pub fn nominal_costs(&self) -> Vec<Vec<f64>> {
        self.scenario_costs(&zero_scenario(self.num_producers(), self.periods))
    }

    /// Total cost for fixed demand, welfare for elastic demand, of `(y, x)`
    /// in scenario `u`.
    pub fn objective_at(&self, y: &[f64], x: &[Vec<f64>], u: &[Vec<f64>]) -> f64 {
        let costs = self.scenario_costs(u);
        let mut production_cost = 0.0;
        for (i, p) in self.producers.iter().enumerate() {
            production_cost += p.c_inv * y[i];
            for t in 0..self.periods {
                production_cost += costs[i][t] * x[i][t];
            }
        }
        if self.demand.is_fixed() {
            production_cost
        } else {
            let surplus: f64 = (0..self.periods)
                .map(|t| self.demand.surplus(t, x.iter().map(|xi| xi[t]).sum()))
                .sum();
            surplus - production_cost
        }
    }

    pub(crate) fn require_fixed(&self) -> Result<()> {
        if self.demand.is_fixed() {
            Ok(())
        } else {
            Err(Error::DemandMode { expected: "fixed" })
        }
    }

    pub(crate) fn require_elastic(&self) -> Result<()> {
        if self.demand.is_fixed() {
            Err(Error::DemandMode { expected: "elastic" })
        } else {
            Ok(())
        }
    }
}

pub fn zero_scenario(n: usize, periods: usize) -> Vec<Vec<f64>> {
    vec![vec![0.0; periods]; n]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    /// One price per period.
    pub prices: Vec<f64>,
    pub capacities: Vec<f64>,
    /// Indexed `[i][t]`.
    pub production: Vec<Vec<f64>>,
    /// Total cost (fixed demand) or welfare (elastic demand).
    pub objective: f64,
    #[serde(skip)]
    pub certificate: Option<Certificate>,
}

impl EquilibriumSolution {
    pub fn total_production(&self, t: usize) -> f64 {
        self.production.iter().map(|x| x[t]).sum()
    }
}

/// Column layout of the market programs: `y`, then `x_{i,t}` period-major,
/// then (elastic only) total sales `s_t`, then caller-owned extras.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    pub n: usize,
    pub periods: usize,
    pub elastic: bool,
}

impl Layout {
    pub fn of(inst: &MarketInstance) -> Self {
        Layout {
            n: inst.num_producers(),
            periods: inst.periods,
            elastic: !inst.demand.is_fixed(),
        }
    }

    pub fn y(&self, i: usize) -> usize {
        i
    }

    pub fn x(&self, i: usize, t: usize) -> usize {
        self.n + t * self.n + i
    }

    pub fn s(&self, t: usize) -> usize {
        debug_assert!(self.elastic);
        self.n + self.n * self.periods + t
    }

    /// First column available for extra variables.
    pub fn base_len(&self) -> usize {
        self.n + self.n * self.periods + if self.elastic { self.periods } else { 0 }
    }

    pub fn read(&self, primal: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let y = (0..self.n).map(|i| primal[self.y(i)]).collect();
        let x = (0..self.n)
            .map(|i| (0..self.periods).map(|t| primal[self.x(i, t)]).collect())
            .collect();
        (y, x)
    }
}

/// The planner program with per-unit costs `costs[i][t]` and `extra` further
/// columns (zero cost, unconstrained unless the caller adds rows). Fixed
/// demand gives a minimisation, elastic demand a maximisation. Rows are the
/// `T` clearing rows followed by the `N*T` capacity rows.
pub(crate) struct MarketProgram {
    pub lp: LpSpec,
    pub quadratic: Option<Vec<Vec<f64>>>,
    pub layout: Layout,
}

impl MarketProgram {
    pub fn build(inst: &MarketInstance, costs: &[Vec<f64>], extra: usize) -> Self {
        let layout = Layout::of(inst);
        let width = layout.base_len() + extra;
        let (sense, sign) = if layout.elastic { (Sense::Max, -1.0) } else { (Sense::Min, 1.0) };
        let mut cost = vec![0.0; width];
        for (i, p) in inst.producers.iter().enumerate() {
            cost[layout.y(i)] = sign * p.c_inv;
            for t in 0..layout.periods {
                cost[layout.x(i, t)] = sign * costs[i][t];
            }
        }
        let mut quadratic = None;
        if let DemandSide::AffineElastic { alpha, beta } = &inst.demand {
            let mut q = vec![vec![0.0; width]; width];
            for t in 0..layout.periods {
                cost[layout.s(t)] = alpha[t];
                q[layout.s(t)][layout.s(t)] = -beta[t];
            }
            quadratic = Some(q);
        }
        let mut lp = LpSpec::new(sense, cost);
        for t in 0..layout.periods {
            let mut row: Vec<(usize, f64)> = (0..layout.n).map(|i| (layout.x(i, t), 1.0)).collect();
            match &inst.demand {
                DemandSide::Fixed { d } => {
                    lp.add_sparse_row(&row, RowKind::Eq, d[t]);
                }
                DemandSide::AffineElastic { .. } => {
                    row.push((layout.s(t), -1.0));
                    lp.add_sparse_row(&row, RowKind::Eq, 0.0);
                }
            }
        }
        for t in 0..layout.periods {
            for i in 0..layout.n {
                lp.add_sparse_row(&[(layout.x(i, t), 1.0), (layout.y(i), -1.0)], RowKind::Le, 0.0);
            }
        }
        MarketProgram { lp, quadratic, layout }
    }

    pub fn capacity_row(&self, i: usize, t: usize) -> usize {
        self.layout.periods + t * self.layout.n + i
    }

    pub fn solve(&self) -> Result<SolveOutcome> {
        let out = match &self.quadratic {
            Some(q) => numsolve::solve_qp(&QpSpec {
                lp: self.lp.clone(),
                quadratic: q.clone(),
            })?,
            None => numsolve::solve_lp(&self.lp)?,
        };
        match out.status {
            SolveStatus::Optimal => Ok(out),
            SolveStatus::Infeasible => Err(Error::Infeasible("market program")),
            SolveStatus::Unbounded => Err(Error::Unbounded("market program")),
        }
    }

    /// Reads prices from clearing duals (fixed) or the demand curve (elastic).
    pub fn solution(&self, inst: &MarketInstance, out: &SolveOutcome) -> EquilibriumSolution {
        let (capacities, production) = self.layout.read(&out.primal);
        let prices = (0..self.layout.periods)
            .map(|t| match &inst.demand {
                DemandSide::Fixed { .. } => out.duals[t],
                DemandSide::AffineElastic { alpha, beta } => alpha[t] - beta[t] * out.primal[self.layout.s(t)],
            })
            .collect();
        EquilibriumSolution {
            prices,
            capacities,
            production,
            objective: out.objective,
            certificate: out.certificate,
        }
    }
}

/// Planner optimum under the given per-unit costs `[i][t]`.
pub fn solve_with_costs(inst: &MarketInstance, costs: &[Vec<f64>]) -> Result<EquilibriumSolution> {
    let prog = MarketProgram::build(inst, costs, 0);
    let out = prog.solve()?;
    Ok(prog.solution(inst, &out))
}

/// Nominal planner under fixed demand; prices are the clearing duals.
pub fn solve_nominal_fixed(inst: &MarketInstance) -> Result<EquilibriumSolution> {
    inst.require_fixed()?;
    solve_with_costs(inst, &inst.nominal_costs())
}

/// Nominal welfare maximisation under elastic demand.
pub fn solve_nominal_elastic(inst: &MarketInstance) -> Result<EquilibriumSolution> {
    inst.require_elastic()?;
    solve_with_costs(inst, &inst.nominal_costs())
}

/// Nominal solve with costs at the mean scenario `mean_u[i][t]`.
pub fn solve_expected(inst: &MarketInstance, mean_u: &[Vec<f64>]) -> Result<EquilibriumSolution> {
    let n = inst.num_producers();
    if mean_u.len() != n || mean_u.iter().any(|r| r.len() != inst.periods) {
        return Err(Error::InvalidInstance(format!("mean scenario must be {n} x {}", inst.periods)));
    }
    for (i, row) in mean_u.iter().enumerate() {
        for (t, v) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(v) {
                return Err(Error::BadMean {
                    producer: i,
                    period: t,
                    value: *v,
                });
            }
        }
    }
    solve_with_costs(inst, &inst.scenario_costs(mean_u))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed(producers: Vec<Producer>, d: Vec<f64>) -> MarketInstance {
        let n = producers.len();
        MarketInstance::new(producers, DemandSide::Fixed { d }, Polytope::simplex(n)).unwrap()
    }

    fn elastic(producers: Vec<Producer>, alpha: f64) -> MarketInstance {
        let n = producers.len();
        let demand = DemandSide::AffineElastic {
            alpha: vec![alpha],
            beta: vec![1.0],
        };
        MarketInstance::new(producers, demand, Polytope::simplex(n)).unwrap()
    }

    #[test]
    fn single_producer_fixed() {
        let sol = solve_nominal_fixed(&fixed(vec![Producer::new(1.0, 1.0, 0.0)], vec![1.0])).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-12);
        assert!((sol.prices[0] - 2.0).abs() < 1e-12);
        assert!((sol.capacities[0] - 1.0).abs() < 1e-12);
        assert!((sol.production[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_period_peak_pricing() {
        let p = Producer::new(1.0, 1.0, 0.0);
        let sol = solve_nominal_fixed(&fixed(vec![p.clone(), p], vec![1.0, 2.0])).unwrap();
        assert!((sol.objective - 5.0).abs() < 1e-12);
        assert!((sol.prices[0] - 1.0).abs() < 1e-9);
        assert!((sol.prices[1] - 2.0).abs() < 1e-9);
        assert!((sol.total_production(0) - 1.0).abs() < 1e-9);
        assert!((sol.total_production(1) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn zero_demand() {
        let sol = solve_nominal_fixed(&fixed(vec![Producer::new(1.0, 1.0, 0.0)], vec![0.0, 0.0])).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert!(sol.capacities.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn elastic_single_producer() {
        let sol = solve_nominal_elastic(&elastic(vec![Producer::new(0.2, 0.0, 0.0)], 5.0)).unwrap();
        assert!((sol.total_production(0) - 4.8).abs() < 1e-9);
        assert!((sol.prices[0] - 0.2).abs() < 1e-9);
        assert!((sol.objective - 11.52).abs() < 1e-9);
    }

    #[test]
    fn elastic_without_profitable_entry() {
        let sol = solve_nominal_elastic(&elastic(vec![Producer::new(1.0, 1.0, 0.0)], 2.0)).unwrap();
        assert!(sol.total_production(0).abs() < 1e-12);
        assert!(sol.objective.abs() < 1e-12);
    }

    #[test]
    fn elastic_symmetric_producers_share_total() {
        let p = Producer::new(0.2, 0.0, 0.0);
        let sol = solve_nominal_elastic(&elastic(vec![p.clone(), p], 5.0)).unwrap();
        assert!((sol.total_production(0) - 4.8).abs() < 1e-9);
    }

    #[test]
    fn expected_value_solve() {
        let inst = fixed(vec![Producer::new(1.0, 1.0, 1.0)], vec![1.0]);
        let sol = solve_expected(&inst, &[vec![0.5]]).unwrap();
        assert!((sol.objective - 2.5).abs() < 1e-12);
        let zero = solve_expected(&inst, &[vec![0.0]]).unwrap();
        assert_eq!(zero, solve_nominal_fixed(&inst).unwrap());
        assert!(matches!(solve_expected(&inst, &[vec![1.5]]), Err(Error::BadMean { .. })));
    }

    #[test]
    fn demand_mode_is_checked() {
        let inst = fixed(vec![Producer::new(1.0, 1.0, 0.0)], vec![1.0]);
        assert_eq!(solve_nominal_elastic(&inst), Err(Error::DemandMode { expected: "elastic" }));
    }

    #[test]
    fn invalid_instances_are_rejected() {
        let bad = MarketInstance::new(
            vec![Producer::new(-1.0, 0.0, 0.0)],
            DemandSide::Fixed { d: vec![1.0] },
            Polytope::simplex(1),
        );
        assert!(matches!(bad, Err(Error::InvalidInstance(_))));
        let flat = MarketInstance::new(
            vec![Producer::new(1.0, 0.0, 0.0)],
            DemandSide::AffineElastic {
                alpha: vec![1.0],
                beta: vec![0.0],
            },
            Polytope::simplex(1),
        );
        assert!(matches!(flat, Err(Error::InvalidInstance(_))));
    }
}
