//! Capacity subsidies that turn the robust planner's capacities into an
//! equilibrium of the market with adjustable robust producers (elastic
//! demand).
//!
//! For each vertex `u` of the lifted uncertainty set the welfare program is
//! re-solved with capacities pinned at the planner's `y*`. Prices follow the
//! demand curve at the resulting sales, and the subsidy of producer `i` is
//!
//! ```text
//! eta_i = c_inv_i + max_u sum_{t : x_it(u) > 0} (c_var_it(u) - p_t(u))
//! ```
//!
//! which leaves every investing producer with zero worst-case profit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{self, MarketInstance};
use crate::par::{self, Parallelism};
use crate::robustcore;

/// Production above this counts as active in a period.
pub const ACTIVE_TOL: f64 = 1e-9;
/// Tolerance on profits and deviation gains.
pub const PROFIT_TOL: f64 = 1e-6;
pub const DEFAULT_AUDIT_SAMPLES: usize = 256;
pub const DEFAULT_GRID: usize = 101;

/// Residuals of the optimality system of the pinned-capacity program, one
/// entry per condition.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    pub stationarity_production: f64,
    pub stationarity_capacity: f64,
    pub capacity_feasibility: f64,
    pub pinned_capacity: f64,
    pub capacity_complementarity: f64,
    pub production_complementarity: f64,
    pub investment_complementarity: f64,
    pub nonnegativity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        [
            self.stationarity_production,
            self.stationarity_capacity,
            self.capacity_feasibility,
            self.pinned_capacity,
            self.capacity_complementarity,
            self.production_complementarity,
            self.investment_complementarity,
            self.nonnegativity,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedCapacityWelfareResult {
    /// Scenario `[i][t]`.
    pub u: Vec<Vec<f64>>,
    pub capacities: Vec<f64>,
    pub production: Vec<Vec<f64>>,
    pub prices: Vec<f64>,
    pub objective: f64,
    /// Capacity multipliers `[i][t]`.
    pub mu: Vec<Vec<f64>>,
    /// Multipliers of `x >= 0`, `[i][t]`.
    pub phi: Vec<Vec<f64>>,
    /// Multipliers of `y >= 0`.
    pub chi: Vec<f64>,
    /// Subsidy implied by the capacity stationarity condition in this scenario.
    pub eta: Vec<f64>,
    pub kkt: KktResiduals,
}

/// Welfare-maximising production with capacities pinned at `y_star`.
pub fn solve_fixed_capacity_welfare(
    inst: &MarketInstance,
    y_star: &[f64],
    u: &[Vec<f64>],
) -> Result<FixedCapacityWelfareResult> {
    inst.require_elastic()?;
    let n = inst.num_producers();
    if y_star.len() != n || y_star.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidInstance("capacities must be nonnegative, one per producer".into()));
    }
    let prog = robustcore::pinned_program(inst, y_star, u);
    let out = prog.solve()?;
    let sol = prog.solution(inst, &out);
    let costs = inst.scenario_costs(u);
    let periods = inst.periods;
    let layout = prog.layout;

    let mut mu = market::zero_scenario(n, periods);
    let mut phi = market::zero_scenario(n, periods);
    let mut k = KktResiduals::default();
    for i in 0..n {
        for t in 0..periods {
            mu[i][t] = out.duals[prog.capacity_row(i, t)];
            phi[i][t] = -out.reduced_costs[layout.x(i, t)];
            let x = sol.production[i][t];
            let y = sol.capacities[i];
            let stat = sol.prices[t] - costs[i][t] - mu[i][t] + phi[i][t];
            k.stationarity_production = k.stationarity_production.max(stat.abs());
            k.capacity_feasibility = k.capacity_feasibility.max(x - y);
            k.capacity_complementarity = k.capacity_complementarity.max((mu[i][t] * (x - y)).abs());
            k.production_complementarity = k.production_complementarity.max((phi[i][t] * x).abs());
            k.nonnegativity = k.nonnegativity.max(-x).max(-mu[i][t]).max(-phi[i][t]);
        }
    }
    // The capacity column is fixed, so its stationarity condition defines
    // the scenario subsidy with a zero multiplier on y >= 0.
    let chi = vec![0.0; n];
    let eta: Vec<f64> = (0..n)
        .map(|i| inst.producers[i].c_inv - mu[i].iter().sum::<f64>() - chi[i])
        .collect();
    for i in 0..n {
        let y = sol.capacities[i];
        let stat = -inst.producers[i].c_inv + mu[i].iter().sum::<f64>() + chi[i] + eta[i];
        k.stationarity_capacity = k.stationarity_capacity.max(stat.abs());
        k.pinned_capacity = k.pinned_capacity.max((y - y_star[i]).abs());
        k.investment_complementarity = k.investment_complementarity.max((chi[i] * y).abs());
        k.nonnegativity = k.nonnegativity.max(-y).max(-chi[i]);
    }
    Ok(FixedCapacityWelfareResult {
        u: u.to_vec(),
        capacities: sol.capacities,
        production: sol.production,
        prices: sol.prices,
        objective: out.objective,
        mu,
        phi,
        chi,
        eta,
        kkt: k,
    })
}

/// `sum_{t : x_it > 0} (c_var_it(u) - p_t(u))` per producer.
pub fn unit_shortfall(inst: &MarketInstance, res: &FixedCapacityWelfareResult) -> Vec<f64> {
    let costs = inst.scenario_costs(&res.u);
    (0..inst.num_producers())
        .map(|i| {
            (0..inst.periods)
                .filter(|&t| res.production[i][t] > ACTIVE_TOL)
                .map(|t| costs[i][t] - res.prices[t])
                .sum()
        })
        .collect()
}

/// Random interior scenarios whose subsidy expression beats the vertex maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingAudit {
    pub samples: usize,
    pub seed: u64,
    pub flagged: usize,
    /// Largest excess over the vertex maximum across producers and samples.
    pub max_excess: f64,
}

/// First failed condition: the capacity that beats the prescribed one (or
/// the production level off its threshold) and by how much.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub producer: usize,
    pub scenario: usize,
    pub deviation: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub worst_case_profits: Vec<f64>,
    pub max_deviation_gain: Vec<f64>,
    /// Largest violation of the threshold structure of best responses.
    pub best_response_residual: f64,
    /// Smallest welfare over the enumerated scenarios.
    pub worst_case_welfare: f64,
    pub is_equilibrium: bool,
    pub violation: Option<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsidyBundle {
    pub eta: Vec<f64>,
    /// Same subsidy through the capacity multipliers.
    pub eta_kkt: Vec<f64>,
    pub y_star: Vec<f64>,
    pub planner_welfare: f64,
    /// One per vertex of the lifted set, in enumeration order.
    pub scenario_results: Vec<FixedCapacityWelfareResult>,
    /// `[vertex][producer]`.
    pub unit_shortfall: Vec<Vec<f64>>,
    pub audit: SamplingAudit,
    /// Total transfer `eta . y*`, not netted into welfare.
    pub total_transfer: f64,
    pub no_capacity: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubsidyOptions {
    pub audit_samples: usize,
    pub seed: u64,
    pub parallelism: Parallelism,
}

impl Default for SubsidyOptions {
    fn default() -> Self {
        SubsidyOptions {
            audit_samples: DEFAULT_AUDIT_SAMPLES,
            seed: 0,
            parallelism: Parallelism::default(),
        }
    }
}

pub fn compute_subsidies(inst: &MarketInstance, opts: &SubsidyOptions) -> Result<SubsidyBundle> {
    inst.require_elastic()?;
    let (sol, planner_welfare, _) = robustcore::solve_robust_cp_elastic(inst)?;
    let y_star: Vec<f64> = sol.capacities.iter().map(|v| if *v < ACTIVE_TOL { 0.0 } else { *v }).collect();
    subsidies_for(inst, &y_star, planner_welfare, opts)
}

/// Subsidies for given capacities.
pub fn subsidies_for(
    inst: &MarketInstance,
    y_star: &[f64],
    planner_welfare: f64,
    opts: &SubsidyOptions,
) -> Result<SubsidyBundle> {
    let n = inst.num_producers();
    let vertices = robustcore::lifted_vertices(inst)?;
    let results: Vec<FixedCapacityWelfareResult> = par::map(opts.parallelism, &vertices, |u| {
        solve_fixed_capacity_welfare(inst, y_star, u)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let shortfall: Vec<Vec<f64>> = results.iter().map(|r| unit_shortfall(inst, r)).collect();
    let no_capacity = y_star.iter().all(|v| *v == 0.0);
    if no_capacity {
        log::warn!("the robust planner builds no capacity; all subsidies are zero");
    }

    let invests = |i: usize| y_star[i] > 0.0;
    let vertex_max: Vec<f64> = (0..n)
        .map(|i| shortfall.iter().map(|l| l[i]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let eta: Vec<f64> = (0..n)
        .map(|i| if invests(i) { inst.producers[i].c_inv + vertex_max[i] } else { 0.0 })
        .collect();
    let eta_kkt: Vec<f64> = (0..n)
        .map(|i| {
            if invests(i) {
                results.iter().map(|r| r.eta[i]).fold(f64::NEG_INFINITY, f64::max)
            } else {
                0.0
            }
        })
        .collect();

    let samples = robustcore::sample_scenarios(inst, opts.audit_samples, opts.seed)?;
    let sampled: Vec<Vec<f64>> = par::map(opts.parallelism, &samples, |u| {
        solve_fixed_capacity_welfare(inst, y_star, u).map(|r| unit_shortfall(inst, &r))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut audit = SamplingAudit {
        samples: opts.audit_samples,
        seed: opts.seed,
        flagged: 0,
        max_excess: 0.0,
    };
    for values in &sampled {
        let excess = (0..n)
            .filter(|&i| invests(i))
            .map(|i| values[i] - vertex_max[i])
            .fold(f64::NEG_INFINITY, f64::max);
        if excess > PROFIT_TOL {
            audit.flagged += 1;
        }
        audit.max_excess = audit.max_excess.max(excess);
    }
    if audit.flagged > 0 {
        log::warn!(
            "{} sampled scenarios exceed the vertex subsidy by up to {:.3e}",
            audit.flagged,
            audit.max_excess
        );
    }

    Ok(SubsidyBundle {
        total_transfer: eta.iter().zip(y_star).map(|(e, y)| e * y).sum(),
        eta,
        eta_kkt,
        y_star: y_star.to_vec(),
        planner_welfare,
        scenario_results: results,
        unit_shortfall: shortfall,
        audit,
        no_capacity,
    })
}

/// Worst-case profit of producer `i` with capacity `y`, subsidy `eta`, when
/// production best-responds to the scenario prices.
fn deviation_profit(inst: &MarketInstance, bundle: &SubsidyBundle, eta: &[f64], i: usize, y: f64) -> (f64, usize) {
    let p = &inst.producers[i];
    let mut worst = (f64::INFINITY, 0);
    for (k, res) in bundle.scenario_results.iter().enumerate() {
        let costs = inst.scenario_costs(&res.u);
        let margin: f64 = (0..inst.periods).map(|t| (res.prices[t] - costs[i][t]).max(0.0)).sum();
        let profit = y * (margin - p.c_inv + eta[i]);
        if profit < worst.0 {
            worst = (profit, k);
        }
    }
    worst
}

/// Checks the three equilibrium conditions for the bundle's subsidies, or
/// for `eta_override` when given.
pub fn equilibrium_record(
    inst: &MarketInstance,
    bundle: &SubsidyBundle,
    grid: usize,
    eta_override: Option<&[f64]>,
) -> Result<VerificationRecord> {
    let n = inst.num_producers();
    let eta = eta_override.unwrap_or(&bundle.eta);
    if eta.len() != n {
        return Err(Error::InvalidInstance(format!("expected {n} subsidies, got {}", eta.len())));
    }
    let y = &bundle.y_star;
    let mut violation: Option<Violation> = None;
    let mut note = |v: Violation| {
        if violation.is_none() {
            violation = Some(v);
        }
    };

    // Threshold structure of production.
    let mut best_response_residual: f64 = 0.0;
    for (k, res) in bundle.scenario_results.iter().enumerate() {
        let costs = inst.scenario_costs(&res.u);
        for i in 0..n {
            for t in 0..inst.periods {
                let margin = res.prices[t] - costs[i][t];
                let x = res.production[i][t];
                let r = if margin > PROFIT_TOL {
                    (y[i] - x).abs()
                } else if margin < -PROFIT_TOL {
                    x.abs()
                } else {
                    0.0
                };
                if r > PROFIT_TOL {
                    note(Violation {
                        producer: i,
                        scenario: k,
                        deviation: x,
                        gain: r * margin.abs(),
                    });
                }
                best_response_residual = best_response_residual.max(r);
            }
        }
    }

    // Realised worst-case profits.
    let mut worst_case_profits = vec![0.0; n];
    for i in 0..n {
        let p = &inst.producers[i];
        let mut worst = (f64::INFINITY, 0);
        for (k, res) in bundle.scenario_results.iter().enumerate() {
            let costs = inst.scenario_costs(&res.u);
            let revenue: f64 = (0..inst.periods)
                .map(|t| (res.prices[t] - costs[i][t]) * res.production[i][t])
                .sum();
            let profit = revenue - (p.c_inv - eta[i]) * y[i];
            if profit < worst.0 {
                worst = (profit, k);
            }
        }
        if bundle.scenario_results.is_empty() {
            worst = (0.0, 0);
        }
        worst_case_profits[i] = worst.0;
        if y[i] > 0.0 && worst.0.abs() > PROFIT_TOL {
            // A loss is avoided by not investing; a surplus breaks zero profit at y*.
            note(Violation {
                producer: i,
                scenario: worst.1,
                deviation: if worst.0 < 0.0 { 0.0 } else { y[i] },
                gain: worst.0.abs(),
            });
        }
    }

    // Capacity deviations on a grid.
    let top = 2.0 * y.iter().cloned().fold(0.0, f64::max);
    let mut max_deviation_gain = vec![f64::NEG_INFINITY; n];
    for i in 0..n {
        let mut points: Vec<f64> = (0..grid)
            .map(|g| if grid > 1 { top * g as f64 / (grid - 1) as f64 } else { 0.0 })
            .collect();
        points.push(0.0);
        points.push(y[i]);
        for yd in points {
            let (profit, k) = deviation_profit(inst, bundle, eta, i, yd);
            if profit > max_deviation_gain[i] {
                max_deviation_gain[i] = profit;
            }
            if profit > PROFIT_TOL {
                note(Violation {
                    producer: i,
                    scenario: k,
                    deviation: yd,
                    gain: profit,
                });
            }
        }
    }

    let worst_case_welfare = bundle
        .scenario_results
        .iter()
        .map(|r| r.objective)
        .fold(f64::INFINITY, f64::min);
    Ok(VerificationRecord {
        worst_case_profits,
        max_deviation_gain,
        best_response_residual,
        worst_case_welfare,
        is_equilibrium: violation.is_none(),
        violation,
    })
}

/// As [`equilibrium_record`], failing with `NotEquilibrium` on the first
/// violated condition.
pub fn verify_subsidized_equilibrium(inst: &MarketInstance, bundle: &SubsidyBundle, grid: usize) -> Result<VerificationRecord> {
    let rec = equilibrium_record(inst, bundle, grid, None)?;
    match &rec.violation {
        None => Ok(rec),
        Some(v) => Err(Error::NotEquilibrium {
            producer: v.producer,
            scenario: v.scenario,
            deviation: v.deviation,
            gain: v.gain,
        }),
    }
}

/// Scenario prices at the enumerated vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceTable {
    pub y_star: Vec<f64>,
    pub entries: Vec<PriceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceEntry {
    pub u: Vec<Vec<f64>>,
    pub prices: Vec<f64>,
}

pub fn build_price_functions(bundle: &SubsidyBundle) -> PriceTable {
    PriceTable {
        y_star: bundle.y_star.clone(),
        entries: bundle
            .scenario_results
            .iter()
            .map(|r| PriceEntry {
                u: r.u.clone(),
                prices: r.prices.clone(),
            })
            .collect(),
    }
}

impl PriceTable {
    /// Prices at `u`: a table lookup at vertices, a fresh solve elsewhere.
    pub fn evaluate(&self, inst: &MarketInstance, u: &[Vec<f64>]) -> Result<Vec<f64>> {
        let hit = self.entries.iter().find(|e| {
            e.u.iter()
                .flatten()
                .zip(u.iter().flatten())
                .all(|(a, b)| (a - b).abs() <= 1e-12)
        });
        match hit {
            Some(e) => Ok(e.prices.clone()),
            None => Ok(solve_fixed_capacity_welfare(inst, &self.y_star, u)?.prices),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polytope;
    use crate::market::{DemandSide, Producer};

    fn example() -> MarketInstance {
        let u = Polytope::from_vertices(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.75, 0.75]]).unwrap();
        let p = Producer::new(0.2, 0.0, 4.0);
        let demand = DemandSide::AffineElastic {
            alpha: vec![5.0],
            beta: vec![1.0],
        };
        MarketInstance::new(vec![p.clone(), p], demand, u).unwrap()
    }

    #[test]
    fn pinned_welfare_per_vertex() {
        let inst = example();
        let y = [0.9, 0.9];
        let r = solve_fixed_capacity_welfare(&inst, &y, &[vec![0.75], vec![0.75]]).unwrap();
        assert!((r.objective - 1.62).abs() < 1e-9);
        assert!((r.prices[0] - 3.2).abs() < 1e-9);
        assert!(r.kkt.max() < 1e-7);
        let r = solve_fixed_capacity_welfare(&inst, &y, &[vec![0.0], vec![0.0]]).unwrap();
        assert!((r.objective - 7.02).abs() < 1e-9);
        let r = solve_fixed_capacity_welfare(&inst, &y, &[vec![1.0], vec![0.0]]).unwrap();
        assert!((r.objective - 3.74).abs() < 1e-9);
        assert!((r.production[0][0] - 0.1).abs() < 1e-9);
        assert!((r.production[1][0] - 0.9).abs() < 1e-9);
        assert!(r.kkt.max() < 1e-7);
    }

    #[test]
    fn example_subsidies() {
        let inst = example();
        let bundle = compute_subsidies(&inst, &SubsidyOptions::default()).unwrap();
        for i in 0..2 {
            assert!((bundle.eta[i] - 0.2).abs() < 1e-7);
            assert!((bundle.eta_kkt[i] - 0.2).abs() < 1e-7);
        }
        assert_eq!(bundle.audit.flagged, 0);
        let rec = verify_subsidized_equilibrium(&inst, &bundle, DEFAULT_GRID).unwrap();
        assert!(rec.worst_case_profits.iter().all(|p| p.abs() < 1e-6));
        assert!((rec.worst_case_welfare - 1.62).abs() < 1e-6);
    }

    #[test]
    fn zero_subsidy_is_not_an_equilibrium() {
        let inst = example();
        let bundle = compute_subsidies(&inst, &SubsidyOptions::default()).unwrap();
        let rec = equilibrium_record(&inst, &bundle, DEFAULT_GRID, Some(&[0.0, 0.0])).unwrap();
        assert!(!rec.is_equilibrium);
        assert!((rec.worst_case_profits[0] + 0.18).abs() < 1e-7);
        let v = rec.violation.unwrap();
        assert_eq!(v.deviation, 0.0);
        assert!((v.gain - 0.18).abs() < 1e-7);
    }

    #[test]
    fn price_table_lookup_and_resolve() {
        let inst = example();
        let bundle = compute_subsidies(&inst, &SubsidyOptions::default()).unwrap();
        let table = build_price_functions(&bundle);
        assert_eq!(table.entries.len(), 4);
        let p = table.evaluate(&inst, &[vec![0.75], vec![0.75]]).unwrap();
        assert!((p[0] - 3.2).abs() < 1e-9);
        let p = table.evaluate(&inst, &[vec![0.0], vec![0.0]]).unwrap();
        assert!((p[0] - 3.2).abs() < 1e-9);
        let p = table.evaluate(&inst, &[vec![0.5], vec![0.0]]).unwrap();
        assert!((p[0] - 3.2).abs() < 1e-9);
    }

    #[test]
    fn no_capacity_gives_trivial_bundle() {
        let p = Producer::new(2.0, 1.0, 1.0);
        let demand = DemandSide::AffineElastic {
            alpha: vec![2.0],
            beta: vec![1.0],
        };
        let inst = MarketInstance::new(vec![p.clone(), p], demand, Polytope::simplex(2)).unwrap();
        let bundle = compute_subsidies(&inst, &SubsidyOptions::default()).unwrap();
        assert!(bundle.no_capacity);
        assert_eq!(bundle.eta, vec![0.0, 0.0]);
        assert!(verify_subsidized_equilibrium(&inst, &bundle, 11).is_ok());
    }
}
