//! Closed-form and one-dimensional quantities of the pinning model.

mod binomial;
mod laws;
mod pinning;
mod tails;

pub use binomial::{binomial_bound, binomial_cdf, binomial_sf, BinomialSide, BoundCheck};
pub use laws::{truncate, DisorderLaw};
pub use pinning::{
    chi, chi_by_variance, disorder_cutoff, first_order_conditions, fractional_moment_value,
    lower_edge_mass, optimal_density, shift_height, shift_height_expansion,
    shift_height_for_target, xi, FractionalMoment, OptimalDensity, PinningParams,
};
pub use tails::{
    gaussian_tail, gaussian_tail_asymptotic, inverse_gaussian_tail, normal_cdf, normal_interval,
    std_normal_pdf, window_probability,
};
