//! The finite-range decomposition of the lattice free field and the
//! multiscale telescoping fields.

mod frd;
mod profile;
mod telescoping;

pub use frd::{CovarianceCheck, FiniteRangeDecomposition, FrdSample};
pub use profile::{phi0_sup_variance, Phi0Profile, SupVariance};
pub use telescoping::{
    build_telescoping, conditional_on_grid, conditioned_bi_gradient_variance,
    level_bi_gradient_variance, TelescopingFields,
};
