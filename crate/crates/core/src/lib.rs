//! Robust peak-load pricing: market equilibria and central-planner optima
//! under polyhedral cost uncertainty, price-of-anarchy certificates,
//! capacity subsidies and risk-sized uncertainty sets.

pub mod error;
pub mod geometry;
pub mod market;
pub mod numsolve;
pub mod par;
pub mod poa;
pub mod random;
pub mod risk;
pub mod robustcore;
pub mod subsidy;

pub use error::{Error, Result};
