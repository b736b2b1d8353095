//! Price-of-anarchy reports and the extremal instance families.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Polytope;
use crate::market::{DemandSide, MarketInstance, Producer};
use crate::robustcore;

/// Slack on the bound comparison.
pub const BOUND_TOL: f64 = 1e-7;
/// Default cost offset in the elastic family.
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandMode {
    Fixed,
    Elastic,
}

/// Ratio `E/C` (fixed demand) or `C/E` (elastic demand) with its bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoAReport {
    pub e: f64,
    pub c: f64,
    /// `None` when the denominator is zero.
    pub ratio: Option<f64>,
    pub tau: f64,
    /// `1/tau`, or the restricted bound when `rho` is set. Elastic demand has none.
    pub bound: Option<f64>,
    pub rho: Option<f64>,
    pub within_bound: Option<bool>,
    pub demand_mode: DemandMode,
    /// The planner optimum vanished, so the fixed-demand ratio is undefined.
    pub zero_cost: bool,
}

/// `(1 + rho) / (1 + rho tau)`.
pub fn restricted_bound(rho: f64, tau: f64) -> f64 {
    (1.0 + rho) / (1.0 + rho * tau)
}

/// Smallest `rho` with `a_i <= rho c_var_i` for all producers, if any.
pub fn detect_rho(inst: &MarketInstance) -> Option<f64> {
    let mut rho: f64 = 0.0;
    for p in &inst.producers {
        let a_max = (0..inst.periods).map(|t| p.a_at(t)).fold(0.0f64, f64::max);
        if a_max == 0.0 {
            continue;
        }
        if p.c_var <= 0.0 {
            return None;
        }
        rho = rho.max(a_max / p.c_var);
    }
    Some(rho)
}

pub fn poa_fixed(inst: &MarketInstance) -> Result<PoAReport> {
    inst.require_fixed()?;
    let (_, e, _) = robustcore::solve_robust_market_fixed(inst)?;
    let (_, c, _) = robustcore::solve_robust_cp_fixed(inst)?;
    let tau = inst.uncertainty.tau()?.tau;
    let rho = detect_rho(inst);
    let bound = match rho {
        Some(r) => restricted_bound(r, tau),
        None => 1.0 / tau,
    };
    let zero_cost = c.abs() <= 1e-12;
    let ratio = (!zero_cost).then(|| e / c);
    if zero_cost {
        log::warn!("robust planner cost is zero; ratio undefined (E = {e})");
    }
    Ok(PoAReport {
        e,
        c,
        ratio,
        tau,
        bound: Some(bound),
        rho,
        within_bound: ratio.map(|r| r <= bound + BOUND_TOL),
        demand_mode: DemandMode::Fixed,
        zero_cost,
    })
}

/// Elastic demand: `C'/E'`, unbounded in general, so no bound is attached.
pub fn poa_elastic(inst: &MarketInstance) -> Result<PoAReport> {
    inst.require_elastic()?;
    let (_, e, _) = robustcore::solve_robust_market_elastic(inst)?;
    let (_, c, _) = robustcore::solve_robust_cp_elastic(inst)?;
    let tau = inst.uncertainty.tau()?.tau;
    let ratio = (e.abs() > 1e-12).then(|| c / e);
    Ok(PoAReport {
        e,
        c,
        ratio,
        tau,
        bound: None,
        rho: None,
        within_bound: None,
        demand_mode: DemandMode::Elastic,
        zero_cost: false,
    })
}

pub fn poa(inst: &MarketInstance) -> Result<PoAReport> {
    if inst.demand.is_fixed() {
        poa_fixed(inst)
    } else {
        poa_elastic(inst)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::BadDelta(delta))
    }
}

/// One period, unit demand, free capacity; producer 0 has cost
/// `(1 - delta) u_0`, every other producer `u_i`.
pub fn gen_tight_instance_fixed(u: Polytope, delta: f64) -> Result<MarketInstance> {
    check_delta(delta)?;
    let producers = (0..u.dim)
        .map(|i| Producer::new(0.0, 0.0, if i == 0 { 1.0 - delta } else { 1.0 }))
        .collect();
    MarketInstance::new(producers, DemandSide::Fixed { d: vec![1.0] }, u)
}

/// Restricted variant: unit nominal costs with `a_0 = rho (1 - delta)` and
/// `a_i = rho` otherwise.
pub fn gen_tight_instance_restricted(u: Polytope, rho: f64, delta: f64) -> Result<MarketInstance> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::BadParams(format!("rho must be positive, got {rho}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::BadParams(format!("delta must lie in (0, 1), got {delta}")));
    }
    let producers = (0..u.dim)
        .map(|i| Producer::new(0.0, 1.0, if i == 0 { rho * (1.0 - delta) } else { rho }))
        .collect();
    MarketInstance::new(producers, DemandSide::Fixed { d: vec![1.0] }, u)
}

/// Two producers with costs `u_0` and `u_1 + epsilon` over the 2-simplex,
/// inverse demand `alpha - s`.
pub fn gen_elastic_family(alpha: f64, epsilon: f64) -> Result<MarketInstance> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::BadAlpha(alpha));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::BadParams(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let producers = vec![Producer::new(0.0, 0.0, 1.0), Producer::new(0.0, epsilon, 1.0)];
    let demand = DemandSide::AffineElastic {
        alpha: vec![alpha],
        beta: vec![1.0],
    };
    MarketInstance::new(producers, demand, Polytope::simplex(2))
}

/// Market and planner welfare of the elastic family for `epsilon -> 0`.
pub fn elastic_family_closed_form(alpha: f64) -> (f64, f64) {
    let e = if alpha > 1.0 { 0.5 * (alpha - 1.0).powi(2) } else { 0.0 };
    let c = if alpha > 0.5 { 0.5 * (alpha - 0.5).powi(2) } else { 0.0 };
    (e, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tight_fixed_half() {
        let inst = gen_tight_instance_fixed(Polytope::simplex(2), 0.5).unwrap();
        let rep = poa_fixed(&inst).unwrap();
        assert!((rep.e - 0.5).abs() < 1e-9);
        assert!(rep.c <= 0.5 + 1e-9);
        assert_eq!(rep.within_bound, Some(true));
    }

    #[test]
    fn tight_fixed_three_producers() {
        let inst = gen_tight_instance_fixed(Polytope::simplex(3), 0.1).unwrap();
        let rep = poa_fixed(&inst).unwrap();
        assert!((rep.tau - 1.0 / 3.0).abs() < 1e-12);
        assert!(rep.ratio.unwrap() >= 2.7 - 1e-9);
        assert!(rep.ratio.unwrap() <= 3.0 + 1e-7);
    }

    #[test]
    fn restricted_ratio_bounds() {
        let inst = gen_tight_instance_restricted(Polytope::simplex(2), 2.0, 0.1).unwrap();
        let rep = poa_fixed(&inst).unwrap();
        assert!(rep.ratio.unwrap() >= 1.4 - 1e-9);
        assert!((rep.rho.unwrap() - 2.0).abs() < 1e-12);
        assert!((rep.bound.unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(rep.within_bound, Some(true));

        let tiny = gen_tight_instance_restricted(Polytope::simplex(2), 1e-6, 0.5).unwrap();
        assert!((poa_fixed(&tiny).unwrap().ratio.unwrap() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn box_ratio_is_one() {
        let inst = gen_tight_instance_fixed(Polytope::unit_box(2), 0.3).unwrap();
        let rep = poa_fixed(&inst).unwrap();
        assert!((rep.ratio.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_cost_is_flagged() {
        let inst = MarketInstance::new(
            vec![Producer::new(1.0, 0.0, 1.0)],
            DemandSide::Fixed { d: vec![0.0] },
            Polytope::unit_box(1),
        )
        .unwrap();
        let rep = poa_fixed(&inst).unwrap();
        assert!(rep.zero_cost);
        assert_eq!(rep.ratio, None);
    }

    #[test]
    fn generator_parameters_are_checked() {
        assert_eq!(gen_tight_instance_fixed(Polytope::simplex(2), 0.0).unwrap_err(), Error::BadDelta(0.0));
        assert!(matches!(
            gen_tight_instance_restricted(Polytope::simplex(2), -1.0, 0.5),
            Err(Error::BadParams(_))
        ));
        assert_eq!(gen_elastic_family(-1.0, 1e-6).unwrap_err(), Error::BadAlpha(-1.0));
    }

    #[test]
    fn elastic_family_values() {
        for alpha in [0.25, 0.75, 2.0] {
            let rep = poa_elastic(&gen_elastic_family(alpha, DEFAULT_EPSILON).unwrap()).unwrap();
            let (e, c) = elastic_family_closed_form(alpha);
            assert!((rep.e - e).abs() < 1e-5, "alpha {alpha}: {} vs {e}", rep.e);
            assert!((rep.c - c).abs() < 1e-5, "alpha {alpha}: {} vs {c}", rep.c);
        }
    }
}
