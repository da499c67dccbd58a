//! Simulation and numerical verification for the disordered lattice free field
//! pinning model in dimension `d ≥ 3`.

pub mod decomposition;
pub mod error;
pub mod experiments;
pub mod gaussian;
pub mod lattice;
pub mod mcmc;
pub mod rng;
pub mod scalar;
pub mod suites;

pub use error::{Error, Result};
pub use gaussian::{CovarianceSolver, Domain, FieldSample};
pub use lattice::{build_box, BoxRegion, Hierarchy, Site, SiteSet};
