use std::path::PathBuf;

use anyhow::{bail, Context};
use robust_peakload::market::{self, EquilibriumSolution, MarketInstance};
use robust_peakload::numsolve::{self, Tolerances};
use robust_peakload::par::Parallelism;
use robust_peakload::poa;
use robust_peakload::robustcore::{self, DEFAULT_SAMPLES};
use robust_peakload::subsidy::{self, SubsidyOptions, DEFAULT_AUDIT_SAMPLES, DEFAULT_GRID};
use robust_peakload::{geometry::Polytope, risk};
use serde_json::{json, Value};

use crate::instance::{self, InstanceFile, Loaded};
use crate::report::Report;

/// Outcome of a command: a report plus a nonzero exit code when the
/// computation itself signals a negative answer.
pub struct Outcome {
    pub report: Report,
    pub exit: u8,
}

impl Outcome {
    fn ok(report: Report) -> Self {
        Outcome { report, exit: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMode {
    Nominal,
    Robust,
    RobustCp,
    Expected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    TightFixed,
    TightRestricted,
    ElasticFamily,
}

/// Settings shared by every command, already merged from flags, the
/// environment and the instance file.
pub struct Settings {
    pub seed: Option<u64>,
    pub tolerances: Option<Tolerances>,
}

impl Settings {
    fn seed(&self, file: &InstanceFile) -> u64 {
        self.seed.or(file.options.seed).unwrap_or(0)
    }

    /// Installs solver tolerances: flags first, then the file, then defaults.
    fn apply_tolerances(&self, file: Option<&InstanceFile>) {
        let tol = self.tolerances.or(file.and_then(|f| f.options.tolerances));
        numsolve::set_active_tolerances(tol);
    }
}

/// The instance with any risk section installed.
fn market_of(file: &InstanceFile) -> anyhow::Result<(MarketInstance, Option<risk::RiskSet>)> {
    let inst = file.market()?;
    match file.risk_spec()? {
        None => Ok((inst, None)),
        Some(spec) => {
            let set = risk::build_risk_set(&spec)?;
            let sized = risk::install_risk_set(&inst, &set)?;
            Ok((sized, Some(set)))
        }
    }
}

fn solution_json(sol: &EquilibriumSolution) -> Value {
    let mut v = serde_json::to_value(sol).expect("solutions serialize");
    if let Some(c) = &sol.certificate {
        v["certificate"] = json!({
            "max_kkt_residual": c.max_kkt_residual(),
            "duality_gap": c.duality_gap,
        });
    }
    v
}

/// `N` values broadcast over periods, or `N * T` values producer by producer.
fn mean_matrix(inst: &MarketInstance, mean: &[f64]) -> anyhow::Result<Vec<Vec<f64>>> {
    let (n, t) = (inst.num_producers(), inst.periods);
    if mean.len() == n {
        Ok(mean.iter().map(|m| vec![*m; t]).collect())
    } else if mean.len() == n * t {
        Ok(mean.chunks(t).map(|c| c.to_vec()).collect())
    } else {
        bail!("--mean needs {n} or {} values, got {}", n * t, mean.len())
    }
}

pub struct SolveArgs {
    pub instance: PathBuf,
    pub mode: SolveMode,
    pub mean: Option<Vec<f64>>,
    pub samples: Option<usize>,
}

pub fn solve(args: &SolveArgs, settings: &Settings) -> anyhow::Result<Outcome> {
    let Loaded { file, digest } = instance::load(&args.instance)?;
    settings.apply_tolerances(Some(&file));
    let (inst, risk_set) = market_of(&file)?;
    let fixed = inst.demand.is_fixed();
    let seed = settings.seed(&file);
    let samples = args.samples.or(file.options.sample_count).unwrap_or(DEFAULT_SAMPLES);

    let mut result = json!({
        "mode": args.mode,
        "demand_mode": if fixed { "fixed" } else { "elastic" },
    });
    match args.mode {
        SolveMode::Nominal => {
            let sol = if fixed {
                market::solve_nominal_fixed(&inst)?
            } else {
                market::solve_nominal_elastic(&inst)?
            };
            result["solution"] = solution_json(&sol);
        }
        SolveMode::Expected => {
            let Some(mean) = &args.mean else {
                bail!("--mode expected requires --mean");
            };
            let sol = market::solve_expected(&inst, &mean_matrix(&inst, mean)?)?;
            result["mean_u"] = json!(mean_matrix(&inst, mean)?);
            result["solution"] = solution_json(&sol);
        }
        SolveMode::Robust => {
            let (sol, e, u) = if fixed {
                robustcore::solve_robust_market_fixed(&inst)?
            } else {
                robustcore::solve_robust_market_elastic(&inst)?
            };
            result["solution"] = solution_json(&sol);
            result["worst_case_value"] = json!(e);
            result["worst_u"] = json!(u);
        }
        SolveMode::RobustCp => {
            let (sol, c, u) = if fixed {
                robustcore::solve_robust_cp_fixed(&inst)?
            } else {
                robustcore::solve_robust_cp_elastic(&inst)?
            };
            let cert = robustcore::adjustable_certificate(&inst, samples, seed, Parallelism::default())?;
            result["solution"] = solution_json(&sol);
            result["planner_value"] = json!(c);
            result["worst_u"] = json!(u);
            result["saddle"] = json!({
                "passed": cert.passed,
                "seed": cert.seed,
                "samples": samples,
                "scenarios": cert.scenarios.len(),
                "max_violation": cert.max_violation,
                "worst_u_value": cert.worst_u_value,
                "worst_u_gap": cert.worst_u_gap,
            });
        }
    }
    if let Some(rs) = risk_set {
        result["risk_set"] = serde_json::to_value(rs)?;
    }
    Ok(Outcome::ok(Report {
        command: json!({
            "name": "solve",
            "instance": args.instance,
            "mode": args.mode,
            "mean": args.mean,
            "samples": samples,
            "seed": seed,
        }),
        instance_digest: digest,
        result,
    }))
}

pub struct PoaArgs {
    pub instance: Option<PathBuf>,
    pub generate: Option<Generator>,
    pub delta: f64,
    pub rho: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub dim: usize,
    pub emit_instance: Option<PathBuf>,
}

pub fn poa(args: &PoaArgs, settings: &Settings) -> anyhow::Result<Outcome> {
    let (file, digest) = match (&args.instance, args.generate) {
        (Some(path), None) => {
            let loaded = instance::load(path)?;
            (loaded.file, loaded.digest)
        }
        (None, Some(generator)) => {
            let inst = match generator {
                Generator::TightFixed => poa::gen_tight_instance_fixed(Polytope::simplex(args.dim), args.delta)?,
                Generator::TightRestricted => {
                    poa::gen_tight_instance_restricted(Polytope::simplex(args.dim), args.rho, args.delta)?
                }
                Generator::ElasticFamily => poa::gen_elastic_family(args.alpha, args.epsilon)?,
            };
            let file = InstanceFile::from_market(&inst);
            let text = file.to_toml();
            if let Some(path) = &args.emit_instance {
                std::fs::write(path, &text).with_context(|| format!("cannot write {}", path.display()))?;
            }
            (file, instance::digest(text.as_bytes()))
        }
        _ => bail!("pass exactly one of --instance and --generate"),
    };
    settings.apply_tolerances(Some(&file));

    let inst = file.market()?;
    let mut result = match file.risk_spec()? {
        Some(spec) => serde_json::to_value(risk::poa_with_risk_set(&inst, &spec)?)?,
        None => json!({ "report": poa::poa(&inst)? }),
    };
    if args.generate == Some(Generator::ElasticFamily) {
        let (e, c) = poa::elastic_family_closed_form(args.alpha);
        result["closed_form"] = json!({ "e": e, "c": c });
    }
    let command = match args.generate {
        Some(g) => json!({
            "name": "poa",
            "generate": g,
            "delta": args.delta,
            "rho": args.rho,
            "alpha": args.alpha,
            "epsilon": args.epsilon,
            "dim": args.dim,
        }),
        None => json!({ "name": "poa", "instance": args.instance }),
    };
    Ok(Outcome::ok(Report {
        command,
        instance_digest: digest,
        result,
    }))
}

pub struct SubsidyArgs {
    pub instance: PathBuf,
    pub grid: Option<usize>,
    pub samples: Option<usize>,
    pub eta: Option<Vec<f64>>,
}

pub fn subsidy(args: &SubsidyArgs, settings: &Settings) -> anyhow::Result<Outcome> {
    let Loaded { file, digest } = instance::load(&args.instance)?;
    settings.apply_tolerances(Some(&file));
    let (inst, _) = market_of(&file)?;
    let seed = settings.seed(&file);
    let grid = args.grid.or(file.options.grid).unwrap_or(DEFAULT_GRID);
    let samples = args.samples.or(file.options.sample_count).unwrap_or(DEFAULT_AUDIT_SAMPLES);
    if grid < 2 {
        bail!("--grid must be at least 2");
    }
    if let Some(eta) = &args.eta {
        if eta.len() != inst.num_producers() {
            bail!("--eta needs {} values, got {}", inst.num_producers(), eta.len());
        }
    }

    let opts = SubsidyOptions {
        audit_samples: samples,
        seed,
        parallelism: Parallelism::default(),
    };
    let bundle = subsidy::compute_subsidies(&inst, &opts)?;
    let record = subsidy::equilibrium_record(&inst, &bundle, grid, args.eta.as_deref())?;
    let scenarios: Vec<Value> = bundle
        .scenario_results
        .iter()
        .map(|r| {
            json!({
                "u": r.u,
                "prices": r.prices,
                "production": r.production,
                "welfare": r.objective,
                "eta": r.eta,
                "max_kkt_residual": r.kkt.max(),
            })
        })
        .collect();
    let result = json!({
        "eta": args.eta.clone().unwrap_or_else(|| bundle.eta.clone()),
        "eta_computed": bundle.eta,
        "eta_kkt": bundle.eta_kkt,
        "eta_overridden": args.eta.is_some(),
        "y_star": bundle.y_star,
        "planner_welfare": bundle.planner_welfare,
        "total_transfer": bundle.total_transfer,
        "no_capacity": bundle.no_capacity,
        "scenarios": scenarios,
        "unit_shortfall": bundle.unit_shortfall,
        "audit": bundle.audit,
        "verification": record,
        "is_equilibrium": record.is_equilibrium,
    });
    let exit = if record.is_equilibrium { 0 } else { 3 };
    if let Some(v) = &record.violation {
        eprintln!(
            "not an equilibrium: producer {} gains {:.6e} by choosing capacity {} (scenario {})",
            v.producer, v.gain, v.deviation, v.scenario
        );
    }
    Ok(Outcome {
        report: Report {
            command: json!({
                "name": "subsidy",
                "instance": args.instance,
                "grid": grid,
                "samples": samples,
                "seed": seed,
                "eta": args.eta,
            }),
            instance_digest: digest,
            result,
        },
        exit,
    })
}

pub fn tau(name: &str, path: &PathBuf, settings: &Settings) -> anyhow::Result<Outcome> {
    let Loaded { file, digest } = instance::load(path)?;
    settings.apply_tolerances(Some(&file));
    let set = file.uncertainty_set()?;
    let tau = set.tau()?;
    let vertices = set.enumerate_vertices().ok();
    let result = json!({
        "dim": set.dim,
        "tau": tau.tau,
        "witness": tau.witness,
        "validation": set.validate(),
        "vertex_count": vertices.as_ref().map(|v| v.len()),
        "vertices": vertices,
    });
    Ok(Outcome::ok(Report {
        command: json!({ "name": name, "instance": path }),
        instance_digest: digest,
        result,
    }))
}
