//! Robust LPs with objective uncertainty, and the robust market and
//! central-planner solves built on them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Polytope};
use crate::market::{self, EquilibriumSolution, Layout, MarketInstance, MarketProgram};
use crate::numsolve::{self, LpSpec, RowKind, Sense, SolveStatus};
use crate::par::{self, Parallelism};

/// Tolerance for a recovered scenario to count as a member of the set.
const MEMBERSHIP_TOL: f64 = 1e-7;
/// Tolerance of the saddle checks.
pub const SADDLE_TOL: f64 = 1e-6;
/// Default number of random scenarios in the adjustable certificate.
pub const DEFAULT_SAMPLES: usize = 64;
/// Upper limit on the number of vertices of a lifted set.
pub const MAX_LIFTED_VERTICES: usize = 20_000;

/// `min c^T x + d^T y + max_{u in U} (diag(lambda) u)^T x` over
/// `{x, y >= 0 : A x + B y >= b}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustLp {
    pub a: Vec<Vec<f64>>,
    pub b_mat: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub lambda: Vec<f64>,
    pub u: Polytope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustReport {
    pub val_r: f64,
    pub val_btilde: f64,
    pub val_b: f64,
    pub worst_u: Vec<f64>,
    pub tau: f64,
    /// `val_B <= val_R / tau`.
    pub bound_ok: bool,
    /// `val_R <= val_B <= val_Btilde`.
    pub chain_ok: bool,
    pub robust_x: Vec<f64>,
    pub robust_y: Vec<f64>,
    pub box_x: Vec<f64>,
    pub box_y: Vec<f64>,
}

impl RobustLp {
    fn check(&self) -> Result<()> {
        let n = self.c.len();
        let k = self.d.len();
        let m = self.b.len();
        let bad = self.a.len() != m
            || self.b_mat.len() != m
            || self.a.iter().any(|r| r.len() != n)
            || self.b_mat.iter().any(|r| r.len() != k)
            || self.lambda.len() != n
            || self.u.dim != n;
        if bad {
            return Err(Error::InvalidInstance("robust LP has inconsistent dimensions".into()));
        }
        if self.c.iter().chain(&self.d).chain(&self.lambda).any(|v| *v < 0.0) {
            return Err(Error::InvalidInstance("c, d and lambda must be nonnegative".into()));
        }
        Ok(())
    }

    /// LP over `(x, y)` plus `extra` zero-cost columns, with the rows of `X`.
    fn base_lp(&self, cost_x: &[f64], extra: usize) -> LpSpec {
        let (n, k) = (self.c.len(), self.d.len());
        let mut cost = cost_x.to_vec();
        cost.extend_from_slice(&self.d);
        cost.resize(n + k + extra, 0.0);
        let mut lp = LpSpec::new(Sense::Min, cost);
        for ((ar, br), bv) in self.a.iter().zip(&self.b_mat).zip(&self.b) {
            let mut row = ar.clone();
            row.extend_from_slice(br);
            row.resize(n + k + extra, 0.0);
            lp.add_row(row, RowKind::Ge, *bv);
        }
        lp
    }

    /// Worst-case value of a fixed `(x, y)` and the maximising scenario.
    pub fn worst_case(&self, x: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>)> {
        let w: Vec<f64> = self.lambda.iter().zip(x).map(|(l, x)| l * x).collect();
        let (adv, u) = self.u.maximize(&w)?;
        Ok((geometry::dot(&self.c, x) + geometry::dot(&self.d, y) + adv, u))
    }
}

fn optimal(out: numsolve::SolveOutcome, what: &'static str) -> Result<numsolve::SolveOutcome> {
    match out.status {
        SolveStatus::Optimal => Ok(out),
        SolveStatus::Infeasible => Err(Error::Infeasible(what)),
        SolveStatus::Unbounded => Err(Error::Unbounded(what)),
    }
}

/// Robust value through the dualised inner maximisation, the box
/// approximation and its worst-case value, and the `1/tau` certificate.
pub fn solve_robust_lp(p: &RobustLp) -> Result<RobustReport> {
    p.check()?;
    let (n, k) = (p.c.len(), p.d.len());
    let mp = p.u.num_rows();

    // val_R: variables (x, y, z), rows A x + B y >= b and P^T z - diag(lambda) x >= 0.
    let mut lp = p.base_lp(&p.c, mp);
    for (j, rj) in p.u.r.iter().enumerate() {
        lp.cost[n + k + j] = *rj;
    }
    let first_adv = lp.num_rows();
    for i in 0..n {
        let mut row: Vec<(usize, f64)> = (0..mp).map(|j| (n + k + j, p.u.p[j][i])).collect();
        row.push((i, -p.lambda[i]));
        lp.add_sparse_row(&row, RowKind::Ge, 0.0);
    }
    let out = optimal(numsolve::solve_lp(&lp)?, "robust LP")?;
    let robust_x = out.primal[..n].to_vec();
    let robust_y = out.primal[n..n + k].to_vec();
    let mut worst_u: Vec<f64> = out.duals[first_adv..].to_vec();
    let w: Vec<f64> = p.lambda.iter().zip(&robust_x).map(|(l, x)| l * x).collect();
    let (wc_value, wc_u) = p.worst_case(&robust_x, &robust_y)?;
    let nominal = geometry::dot(&p.c, &robust_x) + geometry::dot(&p.d, &robust_y);
    let attained = p.u.contains(&worst_u, MEMBERSHIP_TOL)
        && (nominal + geometry::dot(&w, &worst_u) - wc_value).abs() <= SADDLE_TOL * (1.0 + wc_value.abs());
    if !attained {
        worst_u = wc_u;
    }

    // Box approximation with costs c + lambda.
    let c_box: Vec<f64> = p.c.iter().zip(&p.lambda).map(|(c, l)| c + l).collect();
    let box_out = optimal(numsolve::solve_lp(&p.base_lp(&c_box, 0))?, "box LP")?;
    let box_x = box_out.primal[..n].to_vec();
    let box_y = box_out.primal[n..n + k].to_vec();
    let (val_b, _) = p.worst_case(&box_x, &box_y)?;

    let tau = p.u.tau()?.tau;
    let val_r = out.objective;
    let val_btilde = box_out.objective;
    let slack = 1e-7 * (1.0 + val_btilde.abs());
    Ok(RobustReport {
        val_r,
        val_btilde,
        val_b,
        worst_u,
        tau,
        bound_ok: val_b <= val_r / tau + 1e-7,
        chain_ok: val_r <= val_b + slack && val_b <= val_btilde + slack,
        robust_x,
        robust_y,
        box_x,
        box_y,
    })
}

/// Robust market and robust planner side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketRobustReport {
    pub market_solution: EquilibriumSolution,
    /// Worst-case cost (fixed) or welfare (elastic) of the market solution.
    pub e: f64,
    /// Robust planner optimum.
    pub c: f64,
    pub cp_solution: EquilibriumSolution,
    pub worst_u_market: Vec<Vec<f64>>,
    pub worst_u_cp: Vec<Vec<f64>>,
    /// `E/C` for fixed demand, `C/E` for elastic demand; `None` when the
    /// denominator vanishes.
    pub poa: Option<f64>,
    pub fixed_demand: bool,
}

/// Worst-case objective of `(y, x)`: the largest cost for fixed demand,
/// the smallest welfare for elastic demand. Also returns the scenario `[i][t]`.
pub fn worst_case_objective(inst: &MarketInstance, y: &[f64], x: &[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)> {
    let n = inst.num_producers();
    let mut u = market::zero_scenario(n, inst.periods);
    let mut adversary = 0.0;
    for t in 0..inst.periods {
        let w: Vec<f64> = (0..n).map(|i| inst.producers[i].a_at(t) * x[i][t]).collect();
        let (v, ut) = inst.uncertainty.maximize(&w)?;
        adversary += v;
        for i in 0..n {
            u[i][t] = ut[i];
        }
    }
    let base = inst.objective_at(y, x, &market::zero_scenario(n, inst.periods));
    let value = if inst.demand.is_fixed() { base + adversary } else { base - adversary };
    Ok((value, u))
}

/// Strictly robust market: every producer prices its cost at the largest
/// value its coordinate attains. Returns the solution and `E_R`.
pub fn solve_robust_market_fixed(inst: &MarketInstance) -> Result<(EquilibriumSolution, f64, Vec<Vec<f64>>)> {
    inst.require_fixed()?;
    robust_market(inst)
}

/// Elastic counterpart; returns the solution and `E'_R`.
pub fn solve_robust_market_elastic(inst: &MarketInstance) -> Result<(EquilibriumSolution, f64, Vec<Vec<f64>>)> {
    inst.require_elastic()?;
    robust_market(inst)
}

fn robust_market(inst: &MarketInstance) -> Result<(EquilibriumSolution, f64, Vec<Vec<f64>>)> {
    let sol = market::solve_with_costs(inst, &inst.worst_case_costs())?;
    let (e, u) = worst_case_objective(inst, &sol.capacities, &sol.production)?;
    Ok((sol, e, u))
}

/// Robust planner with fixed demand; returns the solution, `C_R` and the
/// worst-case scenario.
pub fn solve_robust_cp_fixed(inst: &MarketInstance) -> Result<(EquilibriumSolution, f64, Vec<Vec<f64>>)> {
    inst.require_fixed()?;
    robust_cp(inst)
}

/// Robust planner with elastic demand as a single concave QP.
pub fn solve_robust_cp_elastic(inst: &MarketInstance) -> Result<(EquilibriumSolution, f64, Vec<Vec<f64>>)> {
    inst.require_elastic()?;
    robust_cp(inst)
}

fn robust_cp(inst: &MarketInstance) -> Result<(EquilibriumSolution, f64, Vec<Vec<f64>>)> {
    let n = inst.num_producers();
    let periods = inst.periods;
    let set = &inst.uncertainty;
    let mp = set.num_rows();
    let mut prog = MarketProgram::build(inst, &inst.nominal_costs(), periods * mp);
    let layout = prog.layout;
    let z = |t: usize, j: usize| layout.base_len() + t * mp + j;
    // The adversary's dual cost enters with the sign of a cost.
    let sign = if layout.elastic { -1.0 } else { 1.0 };
    for t in 0..periods {
        for (j, rj) in set.r.iter().enumerate() {
            prog.lp.cost[z(t, j)] = sign * rj;
        }
    }
    let first_adv = prog.lp.num_rows();
    for t in 0..periods {
        for i in 0..n {
            let mut row: Vec<(usize, f64)> = (0..mp).map(|j| (z(t, j), set.p[j][i])).collect();
            row.push((layout.x(i, t), -inst.producers[i].a_at(t)));
            prog.lp.add_sparse_row(&row, RowKind::Ge, 0.0);
        }
    }
    let out = prog.solve()?;
    let c = out.objective;
    let mut sol = prog.solution(inst, &out);
    match min_norm_optimum(&prog, &out.primal) {
        Some(v) => {
            let (y, x) = layout.read(&v);
            sol.capacities = y;
            sol.production = x;
        }
        None => log::debug!("minimum-norm selection failed, keeping the first optimum"),
    }

    let mut u = market::zero_scenario(n, periods);
    for t in 0..periods {
        for i in 0..n {
            u[i][t] = (sign * out.duals[first_adv + t * n + i]).max(0.0);
        }
    }
    let member = (0..periods).all(|t| {
        let ut: Vec<f64> = (0..n).map(|i| u[i][t]).collect();
        set.contains(&ut, MEMBERSHIP_TOL)
    });
    let reproduces = (inst.objective_at(&sol.capacities, &sol.production, &u) - c).abs() <= SADDLE_TOL * (1.0 + c.abs());
    if !(member && reproduces) {
        log::debug!("scenario from multipliers rejected, solving the inner problem");
        u = worst_case_objective(inst, &sol.capacities, &sol.production)?.1;
    }
    Ok((sol, c, u))
}

/// Among the optima of `prog`, the one with the smallest `|y|^2 + |x|^2`.
/// The optimal face is cut out by pinning total sales (unique under
/// elastic demand) and bounding the linear part of the objective.
fn min_norm_optimum(prog: &MarketProgram, optimum: &[f64]) -> Option<Vec<f64>> {
    let layout = prog.layout;
    let width = prog.lp.num_vars();
    let mut lp = prog.lp.clone();
    let mut linear = prog.lp.cost.clone();
    if layout.elastic {
        for t in 0..layout.periods {
            linear[layout.s(t)] = 0.0;
            lp.add_sparse_row(&[(layout.s(t), 1.0)], RowKind::Eq, optimum[layout.s(t)]);
        }
    }
    let level = geometry::dot(&linear, optimum);
    let slack = 1e-9 * (1.0 + level.abs());
    match prog.lp.sense {
        Sense::Min => lp.add_row(linear, RowKind::Le, level + slack),
        Sense::Max => lp.add_row(linear, RowKind::Ge, level - slack),
    };
    lp.sense = Sense::Min;
    lp.cost = vec![0.0; width];
    let mut quadratic = vec![vec![0.0; width]; width];
    for (j, row) in quadratic.iter_mut().enumerate().take(layout.n * (1 + layout.periods)) {
        row[j] = 1.0;
    }
    let out = numsolve::solve_qp(&numsolve::QpSpec { lp, quadratic }).ok()?;
    out.is_optimal().then_some(out.primal)
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den.abs() > 1e-12).then(|| num / den)
}

/// Robust market and robust planner for either demand mode.
pub fn robust_report(inst: &MarketInstance) -> Result<MarketRobustReport> {
    let (market_solution, e, worst_u_market) = robust_market(inst)?;
    let (cp_solution, c, worst_u_cp) = robust_cp(inst)?;
    let fixed = inst.demand.is_fixed();
    Ok(MarketRobustReport {
        market_solution,
        e,
        c,
        cp_solution,
        worst_u_market,
        worst_u_cp,
        poa: if fixed { ratio(e, c) } else { ratio(c, e) },
        fixed_demand: fixed,
    })
}

/// Best response of the second stage: optimal production for capacities
/// `y` in scenario `u`, with its objective (capacity cost included).
pub fn inner_value(inst: &MarketInstance, y: &[f64], u: &[Vec<f64>]) -> Result<(f64, EquilibriumSolution)> {
    let prog = pinned_program(inst, y, u);
    let out = prog.solve()?;
    Ok((out.objective, prog.solution(inst, &out)))
}

pub(crate) fn pinned_program(inst: &MarketInstance, y: &[f64], u: &[Vec<f64>]) -> MarketProgram {
    let mut prog = MarketProgram::build(inst, &inst.scenario_costs(u), 0);
    for (i, yi) in y.iter().enumerate() {
        let col = prog.layout.y(i);
        prog.lp.lower[col] = *yi;
        prog.lp.upper[col] = *yi;
    }
    prog
}

/// Vertices of the lifted set, each as a `[i][t]` matrix.
pub fn lifted_vertices(inst: &MarketInstance) -> Result<Vec<Vec<Vec<f64>>>> {
    let verts = inst.uncertainty.enumerate_vertices()?;
    let count = (verts.len() as f64).powi(inst.periods as i32);
    if count > MAX_LIFTED_VERTICES as f64 {
        return Err(Error::InvalidInstance(format!(
            "lifted uncertainty set has {count} vertices, limit {MAX_LIFTED_VERTICES}"
        )));
    }
    Ok(geometry::product_vertices(&verts, inst.periods)
        .into_iter()
        .map(|flat| to_matrix(&flat, inst.num_producers(), inst.periods))
        .collect())
}

/// Flat period-major `(i, t) -> t * n + i` to `[i][t]`.
pub fn to_matrix(flat: &[f64], n: usize, periods: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..periods).map(|t| flat[t * n + i]).collect()).collect()
}

/// Random points of the lifted set: per period a convex combination of the
/// vertices with exponential weights.
pub fn sample_scenarios(inst: &MarketInstance, samples: usize, seed: u64) -> Result<Vec<Vec<Vec<f64>>>> {
    let verts = inst.uncertainty.enumerate_vertices()?;
    let n = inst.num_producers();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..samples)
        .map(|_| {
            let mut u = market::zero_scenario(n, inst.periods);
            for t in 0..inst.periods {
                let w: Vec<f64> = verts.iter().map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                let total: f64 = w.iter().sum();
                for (v, wk) in verts.iter().zip(&w) {
                    for i in 0..n {
                        u[i][t] += wk / total * v[i];
                    }
                }
            }
            u
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioOrigin {
    Vertex,
    Sample,
    WorstCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioValue {
    pub index: usize,
    pub origin: ScenarioOrigin,
    pub u: Vec<Vec<f64>>,
    pub value: f64,
}

/// Numerical saddle certificate for adjustable versus strict robustness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustableCertificate {
    pub y_star: Vec<f64>,
    pub c: f64,
    pub worst_u: Vec<Vec<f64>>,
    pub seed: u64,
    pub scenarios: Vec<ScenarioValue>,
    /// Largest amount by which a scenario beats `C` in the adversary's favour.
    pub max_violation: f64,
    pub worst_u_value: f64,
    pub worst_u_gap: f64,
    pub passed: bool,
}

/// Builds the certificate without judging it.
pub fn adjustable_certificate(
    inst: &MarketInstance,
    samples: usize,
    seed: u64,
    mode: Parallelism,
) -> Result<AdjustableCertificate> {
    let (sol, c, worst_u) = robust_cp(inst)?;
    let y = sol.capacities;
    let mut scenarios: Vec<(ScenarioOrigin, Vec<Vec<f64>>)> = lifted_vertices(inst)?
        .into_iter()
        .map(|u| (ScenarioOrigin::Vertex, u))
        .collect();
    scenarios.extend(
        sample_scenarios(inst, samples, seed)?
            .into_iter()
            .map(|u| (ScenarioOrigin::Sample, u)),
    );
    scenarios.push((ScenarioOrigin::WorstCase, worst_u.clone()));
    let values = par::map(mode, &scenarios, |(_, u)| inner_value(inst, &y, u).map(|(v, _)| v));
    let fixed = inst.demand.is_fixed();
    let mut max_violation: f64 = 0.0;
    let mut out = Vec::with_capacity(scenarios.len());
    for (index, ((origin, u), value)) in scenarios.into_iter().zip(values).enumerate() {
        let value = value?;
        let excess = if fixed { value - c } else { c - value };
        max_violation = max_violation.max(excess);
        out.push(ScenarioValue { index, origin, u, value });
    }
    let worst_u_value = out.last().map(|s| s.value).unwrap_or(f64::NAN);
    let worst_u_gap = (worst_u_value - c).abs();
    let tol = SADDLE_TOL * (1.0 + c.abs());
    Ok(AdjustableCertificate {
        y_star: y,
        c,
        worst_u,
        seed,
        scenarios: out,
        max_violation,
        worst_u_value,
        worst_u_gap,
        passed: max_violation <= tol && worst_u_gap <= tol,
    })
}

/// Certificate that the adjustable and strict robust planners agree;
/// `SaddleViolated` if any check fails.
pub fn verify_adjustable_equivalence(inst: &MarketInstance, samples: usize, seed: u64) -> Result<AdjustableCertificate> {
    let cert = adjustable_certificate(inst, samples, seed, Parallelism::default())?;
    if cert.passed {
        Ok(cert)
    } else {
        Err(Error::SaddleViolated(format!(
            "max violation {:.3e}, worst-case gap {:.3e}",
            cert.max_violation, cert.worst_u_gap
        )))
    }
}

/// Adjustable robust planner with fixed demand written over the vertices of
/// the lifted set: one production plan per vertex, a shared capacity, and an
/// epigraph variable bounding every vertex cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReformulation {
    pub value: f64,
    pub capacities: Vec<f64>,
    pub vertices: Vec<Vec<Vec<f64>>>,
    /// Clearing duals `[vertex][t]`.
    pub clearing_duals: Vec<Vec<f64>>,
    pub production: Vec<Vec<Vec<f64>>>,
}

pub fn scenario_reformulation_fixed(inst: &MarketInstance) -> Result<ScenarioReformulation> {
    inst.require_fixed()?;
    let market::DemandSide::Fixed { d } = &inst.demand else {
        unreachable!()
    };
    let vertices = lifted_vertices(inst)?;
    let n = inst.num_producers();
    let periods = inst.periods;
    let nv = vertices.len();
    let layout = Layout::of(inst);
    let block = n * periods;
    let x = |j: usize, i: usize, t: usize| n + j * block + t * n + i;
    let theta = n + nv * block;
    let mut cost = vec![0.0; theta + 1];
    for (i, p) in inst.producers.iter().enumerate() {
        cost[layout.y(i)] = p.c_inv;
    }
    cost[theta] = 1.0;
    let mut lp = LpSpec::new(Sense::Min, cost);
    for (j, u) in vertices.iter().enumerate() {
        let costs = inst.scenario_costs(u);
        let mut row = vec![(theta, 1.0)];
        for i in 0..n {
            for t in 0..periods {
                row.push((x(j, i, t), -costs[i][t]));
            }
        }
        lp.add_sparse_row(&row, RowKind::Ge, 0.0);
    }
    for j in 0..nv {
        for t in 0..periods {
            for i in 0..n {
                lp.add_sparse_row(&[(x(j, i, t), 1.0), (layout.y(i), -1.0)], RowKind::Le, 0.0);
            }
        }
    }
    let first_clearing = lp.num_rows();
    for j in 0..nv {
        for t in 0..periods {
            let row: Vec<(usize, f64)> = (0..n).map(|i| (x(j, i, t), 1.0)).collect();
            lp.add_sparse_row(&row, RowKind::Eq, d[t]);
        }
    }
    let out = optimal(numsolve::solve_lp(&lp)?, "scenario reformulation")?;
    let clearing_duals = (0..nv)
        .map(|j| (0..periods).map(|t| out.duals[first_clearing + j * periods + t]).collect())
        .collect();
    let production = (0..nv)
        .map(|j| (0..n).map(|i| (0..periods).map(|t| out.primal[x(j, i, t)]).collect()).collect())
        .collect();
    Ok(ScenarioReformulation {
        value: out.objective,
        capacities: out.primal[..n].to_vec(),
        vertices,
        clearing_duals,
        production,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{DemandSide, Producer};

    fn prices_reform() -> MarketInstance {
        let p = Producer::new(1.0, 1.0, 1.0);
        MarketInstance::new(vec![p.clone(), p], DemandSide::Fixed { d: vec![1.0, 2.0] }, Polytope::simplex(2)).unwrap()
    }

    fn prices_rob_arob() -> MarketInstance {
        let p = Producer::new(1.0, 0.0, 1.0);
        MarketInstance::new(vec![p.clone(), p], DemandSide::Fixed { d: vec![2.0] }, Polytope::simplex(2)).unwrap()
    }

    #[test]
    fn robust_market_prices() {
        let (sol, _, _) = solve_robust_market_fixed(&prices_reform()).unwrap();
        assert!((sol.prices[0] - 2.0).abs() < 1e-7);
        assert!((sol.prices[1] - 3.0).abs() < 1e-7);
    }

    #[test]
    fn robust_planner_example() {
        let inst = prices_rob_arob();
        let (sol, c, u) = solve_robust_cp_fixed(&inst).unwrap();
        assert!((c - 3.0).abs() < 1e-7);
        assert!((sol.prices[0] - 1.5).abs() < 1e-7);
        assert!((inst.objective_at(&sol.capacities, &sol.production, &u) - 3.0).abs() < 1e-7);
        let (v, _) = inner_value(&inst, &sol.capacities, &u).unwrap();
        assert!((v - 3.0).abs() < 1e-7);
    }

    #[test]
    fn no_uncertainty_collapses_to_nominal() {
        let p = Producer::new(1.0, 1.0, 0.0);
        let inst =
            MarketInstance::new(vec![p.clone(), p], DemandSide::Fixed { d: vec![1.0, 2.0] }, Polytope::simplex(2)).unwrap();
        let nominal = market::solve_nominal_fixed(&inst).unwrap().objective;
        let rep = robust_report(&inst).unwrap();
        assert!((rep.e - nominal).abs() < 1e-9);
        assert!((rep.c - nominal).abs() < 1e-9);
        let cert = verify_adjustable_equivalence(&inst, 8, 1).unwrap();
        assert!(cert.scenarios.iter().all(|s| (s.value - nominal).abs() < 1e-9));
    }

    #[test]
    fn box_set_makes_market_and_planner_agree() {
        let producers = vec![Producer::new(1.0, 0.5, 1.0), Producer::new(0.5, 1.0, 2.0)];
        let inst = MarketInstance::new(producers, DemandSide::Fixed { d: vec![1.0, 3.0] }, Polytope::unit_box(2)).unwrap();
        let rep = robust_report(&inst).unwrap();
        assert!((rep.e - rep.c).abs() < 1e-7);
    }

    #[test]
    fn robust_lp_without_uncertainty() {
        let p = RobustLp {
            a: vec![vec![1.0, 1.0]],
            b_mat: vec![vec![1.0]],
            b: vec![2.0],
            c: vec![1.0, 2.0],
            d: vec![3.0],
            lambda: vec![0.0, 0.0],
            u: Polytope::simplex(2),
        };
        let rep = solve_robust_lp(&p).unwrap();
        assert!((rep.val_r - 2.0).abs() < 1e-9);
        assert!((rep.val_b - 2.0).abs() < 1e-9);
        assert!((rep.val_btilde - 2.0).abs() < 1e-9);
        assert!(rep.bound_ok && rep.chain_ok);
    }

    #[test]
    fn robust_lp_tight_instance() {
        let delta = 0.01;
        let p = RobustLp {
            a: vec![vec![1.0, 1.0]],
            b_mat: vec![vec![]],
            b: vec![1.0],
            c: vec![0.0, 0.0],
            d: vec![],
            lambda: vec![1.0 - delta, 1.0],
            u: Polytope::simplex(2),
        };
        let rep = solve_robust_lp(&p).unwrap();
        assert!((rep.val_btilde - 0.99).abs() < 1e-9);
        assert!((rep.val_r - 0.99 / 1.99).abs() < 1e-9);
        assert!((rep.tau - 0.5).abs() < 1e-12);
        assert!(rep.bound_ok && rep.chain_ok);
        assert!(Polytope::simplex(2).contains(&rep.worst_u, 1e-9));
    }

    #[test]
    fn scenario_reformulation_value() {
        let rep = scenario_reformulation_fixed(&prices_rob_arob()).unwrap();
        assert!((rep.value - 3.0).abs() < 1e-7);
        assert_eq!(rep.vertices.len(), 3);
    }

    #[test]
    fn subsidy_example_planner() {
        let u = Polytope::from_vertices(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.75, 0.75]]).unwrap();
        let p = Producer::new(0.2, 0.0, 4.0);
        let demand = DemandSide::AffineElastic {
            alpha: vec![5.0],
            beta: vec![1.0],
        };
        let inst = MarketInstance::new(vec![p.clone(), p], demand, u).unwrap();
        let (sol, c, _) = solve_robust_cp_elastic(&inst).unwrap();
        assert!((c - 1.62).abs() < 1e-7);
        assert!((sol.capacities[0] - 0.9).abs() < 1e-7);
        assert!((sol.capacities[1] - 0.9).abs() < 1e-7);
        let cert = verify_adjustable_equivalence(&inst, 16, 3).unwrap();
        let mut vertex_values: Vec<f64> = cert
            .scenarios
            .iter()
            .filter(|s| s.origin == ScenarioOrigin::Vertex)
            .map(|s| s.value)
            .collect();
        vertex_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in vertex_values.iter().zip([1.62, 3.74, 3.74, 7.02]) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }
}
