//! Instance files: a strict TOML schema mapped onto the library types.

use std::path::Path;

use anyhow::{bail, Context};
use robust_peakload::geometry::{GeometryError, Polytope};
use robust_peakload::market::{DemandSide, MarketInstance, Producer};
use robust_peakload::numsolve::Tolerances;
use robust_peakload::risk::{CoherentSpec, RiskSpec, VarSpec};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<usize>,
    #[serde(default)]
    pub producers: Vec<ProducerEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<DemandEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<UncertaintyEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<RiskEntry>,
    #[serde(default, skip_serializing_if = "Options::is_empty")]
    pub options: Options,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProducerEntry {
    pub c_inv: f64,
    pub c_var: f64,
    pub a: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_periods: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum DemandEntry {
    Fixed { d: Vec<f64> },
    Elastic { alpha: Vec<f64>, beta: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum UncertaintyEntry {
    /// `{u >= 0 : P u <= r}`.
    Inequalities { p: Vec<Vec<f64>>, r: Vec<f64> },
    Vertices { points: Vec<Vec<f64>> },
    /// Dimension defaults to the number of producers.
    Box { dim: Option<usize> },
    Simplex { dim: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RiskEntry {
    Var { alpha: f64, marginal_var: Vec<f64> },
    /// `q` restricts the distributions; absent means all of them.
    Coherent { scenarios: Vec<Vec<f64>>, q: Option<Inequalities> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inequalities {
    pub p: Vec<Vec<f64>>,
    pub r: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Options {
    fn is_empty(&self) -> bool {
        *self == Options::default()
    }
}

/// File contents with the digest of the exact bytes read.
pub struct Loaded {
    pub file: InstanceFile,
    pub digest: String,
}

pub fn digest(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

pub fn load(path: &Path) -> anyhow::Result<Loaded> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let file = parse(&text).with_context(|| format!("in {}", path.display()))?;
    Ok(Loaded {
        file,
        digest: digest(text.as_bytes()),
    })
}

pub fn parse(text: &str) -> anyhow::Result<InstanceFile> {
    let file: InstanceFile = toml::from_str(text)?;
    if file.schema_version != SCHEMA_VERSION {
        bail!(
            "unsupported schema_version {:?}, expected {SCHEMA_VERSION:?}",
            file.schema_version
        );
    }
    Ok(file)
}

impl InstanceFile {
    pub fn uncertainty_set(&self) -> anyhow::Result<Polytope> {
        let Some(entry) = &self.uncertainty else {
            bail!("missing [uncertainty] section");
        };
        let dim = |given: Option<usize>| match given.unwrap_or(self.producers.len()) {
            0 => bail!("uncertainty: dim is required when there are no producers"),
            n => Ok(n),
        };
        let set = match entry {
            UncertaintyEntry::Inequalities { p, r } => {
                let n = p.first().map_or(self.producers.len(), |row| row.len());
                Polytope::new(n, p.clone(), r.clone()).context("uncertainty")?
            }
            UncertaintyEntry::Vertices { points } => Polytope::from_vertices(points).context("uncertainty.points")?,
            UncertaintyEntry::Box { dim: d } => Polytope::unit_box(dim(*d)?),
            UncertaintyEntry::Simplex { dim: d } => Polytope::simplex(dim(*d)?),
        };
        // Emptiness and unboundedness surface as geometry errors.
        set.maximize(&vec![0.0; set.dim])?;
        if set.axis_maxima()?.iter().any(Option::is_none) {
            return Err(GeometryError::Unbounded.into());
        }
        Ok(set)
    }

    pub fn market(&self) -> anyhow::Result<MarketInstance> {
        if self.producers.is_empty() {
            bail!("missing [[producers]] entries");
        }
        let Some(demand) = &self.demand else {
            bail!("missing [demand] section");
        };
        let demand = match demand {
            DemandEntry::Fixed { d } => DemandSide::Fixed { d: d.clone() },
            DemandEntry::Elastic { alpha, beta } => DemandSide::AffineElastic {
                alpha: alpha.clone(),
                beta: beta.clone(),
            },
        };
        if let Some(t) = self.periods {
            if t != demand.periods() {
                bail!("periods = {t} but the demand covers {} periods", demand.periods());
            }
        }
        let producers = self
            .producers
            .iter()
            .map(|p| Producer {
                a_periods: p.a_periods.clone(),
                ..Producer::new(p.c_inv, p.c_var, p.a)
            })
            .collect();
        Ok(MarketInstance::new(producers, demand, self.uncertainty_set()?)?)
    }

    pub fn risk_spec(&self) -> anyhow::Result<Option<RiskSpec>> {
        let Some(risk) = &self.risk else { return Ok(None) };
        Ok(Some(match risk {
            RiskEntry::Var { alpha, marginal_var } => RiskSpec::Var(VarSpec {
                alpha: *alpha,
                marginal_var: marginal_var.clone(),
            }),
            RiskEntry::Coherent { scenarios, q } => {
                let k = scenarios.len();
                let distributions = match q {
                    Some(q) => Polytope::new(k, q.p.clone(), q.r.clone()).context("risk.q")?,
                    None => Polytope::new(k, Vec::new(), Vec::new())?,
                };
                RiskSpec::Coherent(CoherentSpec {
                    scenarios: scenarios.clone(),
                    distributions,
                })
            }
        }))
    }

    /// A file describing `inst`, with the set in inequality form.
    pub fn from_market(inst: &MarketInstance) -> Self {
        let demand = match &inst.demand {
            DemandSide::Fixed { d } => DemandEntry::Fixed { d: d.clone() },
            DemandSide::AffineElastic { alpha, beta } => DemandEntry::Elastic {
                alpha: alpha.clone(),
                beta: beta.clone(),
            },
        };
        InstanceFile {
            schema_version: SCHEMA_VERSION.into(),
            periods: Some(inst.periods),
            producers: inst
                .producers
                .iter()
                .map(|p| ProducerEntry {
                    c_inv: p.c_inv,
                    c_var: p.c_var,
                    a: p.a,
                    a_periods: p.a_periods.clone(),
                })
                .collect(),
            demand: Some(demand),
            uncertainty: Some(UncertaintyEntry::Inequalities {
                p: inst.uncertainty.p.clone(),
                r: inst.uncertainty.r.clone(),
            }),
            risk: None,
            options: Options::default(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("instance files always serialize")
    }
}
