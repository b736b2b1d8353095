//! Uncertainty sets sized by risk measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Polytope, ValidationReport};
use crate::market::MarketInstance;
use crate::poa::{self, PoAReport};

/// Marginal value-at-risk levels, one per producer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarSpec {
    pub alpha: f64,
    pub marginal_var: Vec<f64>,
}

/// Past cost realisations (the first one zero) and a family of
/// distributions over them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherentSpec {
    pub scenarios: Vec<Vec<f64>>,
    /// Over `K` coordinates; intersected with the probability simplex.
    pub distributions: Polytope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RiskSpec {
    Var(VarSpec),
    Coherent(CoherentSpec),
}

/// A rescaled set with its per-coordinate scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskSet {
    pub set: Polytope,
    pub scale: Vec<f64>,
    /// Coordinates that carry no risk and enter as `[0, 1]` with zero scale.
    pub degenerate: Vec<usize>,
    pub validation: ValidationReport,
}

/// The unit box with scale equal to the VaR levels.
pub fn build_mvar_set(spec: &VarSpec) -> Result<RiskSet> {
    if !(spec.alpha > 0.0 && spec.alpha < 1.0) {
        return Err(Error::BadVar(format!("alpha = {}", spec.alpha)));
    }
    if spec.marginal_var.is_empty() {
        return Err(Error::BadVar("no producers".into()));
    }
    if let Some(i) = spec.marginal_var.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::BadVar(format!("entry {i} is {}", spec.marginal_var[i])));
    }
    let set = Polytope::unit_box(spec.marginal_var.len());
    let validation = set.validate();
    Ok(RiskSet {
        set,
        scale: spec.marginal_var.clone(),
        degenerate: Vec::new(),
        validation,
    })
}

/// `Q` intersected with the probability simplex.
fn distribution_family(spec: &CoherentSpec) -> Polytope {
    let k = spec.scenarios.len();
    let mut q = spec.distributions.clone();
    q.p.push(vec![1.0; k]);
    q.r.push(1.0);
    q.p.push(vec![-1.0; k]);
    q.r.push(-1.0);
    q
}

/// Largest expected cost of each coordinate over the family.
pub fn coherent_levels(spec: &CoherentSpec) -> Result<Vec<f64>> {
    let family = distribution_family(spec);
    let n = spec.scenarios.first().map_or(0, |s| s.len());
    (0..n)
        .map(|i| {
            let w: Vec<f64> = spec.scenarios.iter().map(|s| s[i]).collect();
            Ok(family.maximize(&w)?.0.max(0.0))
        })
        .collect()
}

/// Expected scenarios under the family's extreme distributions, scaled
/// so each coordinate peaks at 1, in inequality form.
pub fn build_coherent_set(spec: &CoherentSpec) -> Result<RiskSet> {
    let k = spec.scenarios.len();
    let Some(first) = spec.scenarios.first() else {
        return Err(Error::BadParams("no scenarios".into()));
    };
    let n = first.len();
    if spec.scenarios.iter().any(|s| s.len() != n) {
        return Err(Error::BadParams("scenarios differ in dimension".into()));
    }
    if spec.scenarios.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::BadParams("scenario entries must be nonnegative".into()));
    }
    if first.iter().any(|v| *v != 0.0) {
        return Err(Error::BadParams("the first scenario must be zero".into()));
    }
    if spec.distributions.dim != k {
        return Err(Error::BadParams(format!(
            "distribution family has dimension {}, expected {k}",
            spec.distributions.dim
        )));
    }

    let levels = coherent_levels(spec)?;
    let kept: Vec<usize> = (0..n).filter(|&i| levels[i] > 1e-12).collect();
    let degenerate: Vec<usize> = (0..n).filter(|&i| levels[i] <= 1e-12).collect();
    if !degenerate.is_empty() {
        log::warn!("coordinates {degenerate:?} carry no risk; they enter as [0, 1] with zero scale");
    }

    let weights = distribution_family(spec).enumerate_vertices()?;
    let points: Vec<Vec<f64>> = weights
        .iter()
        .map(|q| {
            kept.iter()
                .map(|&i| q.iter().zip(&spec.scenarios).map(|(qj, s)| qj * s[i]).sum::<f64>() / levels[i])
                .collect()
        })
        .collect();
    let reduced = if kept.is_empty() {
        Polytope::unit_box(0)
    } else {
        Polytope::from_vertices(&points)?
    };

    // Re-embed the kept coordinates among all n.
    let mut p = Vec::with_capacity(reduced.num_rows() + degenerate.len());
    for row in &reduced.p {
        let mut full = vec![0.0; n];
        for (col, &i) in kept.iter().enumerate() {
            full[i] = row[col];
        }
        p.push(full);
    }
    let mut r = reduced.r.clone();
    for &i in &degenerate {
        let mut row = vec![0.0; n];
        row[i] = 1.0;
        p.push(row);
        r.push(1.0);
    }
    let set = Polytope::new(n, p, r)?;
    let validation = set.validate();
    if !validation.is_valid_uncertainty_set {
        log::warn!("coherent set fails validation: {validation:?}");
    }
    Ok(RiskSet {
        set,
        scale: levels,
        degenerate,
        validation,
    })
}

pub fn build_risk_set(spec: &RiskSpec) -> Result<RiskSet> {
    match spec {
        RiskSpec::Var(v) => build_mvar_set(v),
        RiskSpec::Coherent(c) => build_coherent_set(c),
    }
}

/// Replaces the instance's uncertainty by the risk set and each `a_i` by
/// its scale.
pub fn install_risk_set(inst: &MarketInstance, risk: &RiskSet) -> Result<MarketInstance> {
    if risk.scale.len() != inst.num_producers() {
        return Err(Error::InvalidInstance(format!(
            "risk data covers {} producers, instance has {}",
            risk.scale.len(),
            inst.num_producers()
        )));
    }
    let mut producers = inst.producers.clone();
    for (p, s) in producers.iter_mut().zip(&risk.scale) {
        p.a = *s;
        p.a_periods = None;
    }
    MarketInstance::new(producers, inst.demand.clone(), risk.set.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskPoAReport {
    pub risk_set: RiskSet,
    pub report: PoAReport,
}

/// Price-of-anarchy report of a fixed-demand instance under a risk-sized set.
pub fn poa_with_risk_set(inst: &MarketInstance, spec: &RiskSpec) -> Result<RiskPoAReport> {
    inst.require_fixed()?;
    let risk_set = build_risk_set(spec)?;
    let sized = install_risk_set(inst, &risk_set)?;
    let report = poa::poa_fixed(&sized)?;
    Ok(RiskPoAReport { risk_set, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{DemandSide, Producer};

    fn full_simplex(scenarios: Vec<Vec<f64>>) -> CoherentSpec {
        let k = scenarios.len();
        CoherentSpec {
            scenarios,
            distributions: Polytope::new(k, Vec::new(), Vec::new()).unwrap(),
        }
    }

    #[test]
    fn var_box() {
        let rs = build_mvar_set(&VarSpec {
            alpha: 0.05,
            marginal_var: vec![2.0, 5.0],
        })
        .unwrap();
        assert_eq!(rs.set, Polytope::unit_box(2));
        assert_eq!(rs.scale, vec![2.0, 5.0]);
        assert!((rs.set.tau().unwrap().tau - 1.0).abs() < 1e-12);
        assert!(matches!(
            build_mvar_set(&VarSpec {
                alpha: 0.05,
                marginal_var: vec![0.0]
            }),
            Err(Error::BadVar(_))
        ));
        assert!(matches!(
            build_mvar_set(&VarSpec {
                alpha: 1.5,
                marginal_var: vec![1.0]
            }),
            Err(Error::BadVar(_))
        ));
    }

    #[test]
    fn segment_hull() {
        let rs = build_coherent_set(&full_simplex(vec![vec![0.0, 0.0], vec![1.0, 1.0]])).unwrap();
        assert_eq!(rs.scale, vec![1.0, 1.0]);
        assert!((rs.set.tau().unwrap().tau - 1.0).abs() < 1e-9);
        assert!(rs.validation.is_valid_uncertainty_set);
    }

    #[test]
    fn single_distribution() {
        let spec = CoherentSpec {
            scenarios: vec![vec![0.0, 0.0], vec![2.0, 4.0]],
            distributions: Polytope::new(2, vec![vec![-1.0, 0.0], vec![1.0, 0.0]], vec![-0.5, 0.5]).unwrap(),
        };
        let rs = build_coherent_set(&spec).unwrap();
        assert_eq!(rs.scale, vec![1.0, 2.0]);
        let v = rs.set.enumerate_vertices().unwrap();
        assert_eq!(v.len(), 1);
        assert!(v[0].iter().all(|x| (x - 1.0).abs() < 1e-9));
        assert!(!rs.validation.contains_zero);
    }

    #[test]
    fn riskless_coordinate_is_embedded() {
        let rs = build_coherent_set(&full_simplex(vec![vec![0.0, 0.0], vec![3.0, 0.0]])).unwrap();
        assert_eq!(rs.degenerate, vec![1]);
        assert_eq!(rs.scale, vec![3.0, 0.0]);
        assert!(rs.validation.is_valid_uncertainty_set);
    }

    #[test]
    fn first_scenario_must_vanish() {
        assert!(matches!(
            build_coherent_set(&full_simplex(vec![vec![1.0], vec![2.0]])),
            Err(Error::BadParams(_))
        ));
    }

    #[test]
    fn var_box_makes_ratio_one() {
        let producers = vec![Producer::new(1.0, 0.5, 0.0), Producer::new(0.5, 1.0, 0.0)];
        let inst =
            MarketInstance::new(producers, DemandSide::Fixed { d: vec![1.0, 2.0] }, Polytope::simplex(2)).unwrap();
        let spec = RiskSpec::Var(VarSpec {
            alpha: 0.1,
            marginal_var: vec![0.7, 1.3],
        });
        let rep = poa_with_risk_set(&inst, &spec).unwrap();
        assert!((rep.report.bound.unwrap() - 1.0).abs() < 1e-12);
        assert!((rep.report.e - rep.report.c).abs() < 1e-7);
    }

    #[test]
    fn zero_risk_gives_nominal() {
        let inst = MarketInstance::new(
            vec![Producer::new(1.0, 1.0, 0.0)],
            DemandSide::Fixed { d: vec![1.0] },
            Polytope::unit_box(1),
        )
        .unwrap();
        let spec = RiskSpec::Coherent(full_simplex(vec![vec![0.0], vec![0.0]]));
        let rep = poa_with_risk_set(&inst, &spec).unwrap();
        assert_eq!(rep.risk_set.degenerate, vec![0]);
        assert!((rep.report.c - 2.0).abs() < 1e-9);
        assert!((rep.report.e - 2.0).abs() < 1e-9);
    }
}
