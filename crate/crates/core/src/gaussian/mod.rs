//! Exact linear-algebraic core of the lattice free field.

mod domain;
mod field;
mod green;
mod harmonic;
mod solver;

pub use domain::Domain;
pub(crate) use domain::NONE;
pub use field::{read_f64_le, write_f64_le, write_green_column, write_site_csv, FieldSample};
pub use green::{
    infinite_volume_green, killed_green_center, lattice_green, richardson, scaled_bessel_i, sigma2,
    GreenEstimate,
};
pub use harmonic::{
    bi_gradient, bi_gradient_stencil, bi_gradient_variance, conditional_variance, harmonic_average,
    harmonic_extend, hitting_weights, projection_variance, HarmonicExtender, HarmonicExtension,
};
pub use solver::{cg_solve, cg_solve_default, CovarianceSolver, DEFAULT_SITE_LIMIT, SOLVER_TOL};
