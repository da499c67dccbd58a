use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::gaussian::sigma2;
use crate::lattice::Site;

/// Time quadrature for `∫_0^∞ f(t) dt` with `f` smooth and bounded near 0 and
/// exponentially decaying: Gauss–Legendre panels in `s = log t` plus the
/// first-order piece `t₀ f(0)` below `t₀`.
fn log_time_nodes(t_max: f64) -> Vec<(f64, f64)> {
    const T0: f64 = 1e-12;
    const PANEL: f64 = 0.25;
    let rule = GaussLegendre::new(NonZeroUsize::new(8).unwrap());
    let (a, b) = (T0.ln(), t_max.ln());
    let panels = ((b - a) / PANEL).ceil() as usize;
    let width = (b - a) / panels as f64;
    let mut out = vec![(0.0, T0)];
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * width;
        for (x, w) in rule.iter() {
            let s = mid + 0.5 * width * x;
            let t = s.exp();
            out.push((t, 0.5 * width * w * t));
        }
    }
    out
}

/// Variance of `φ₀` for the infinite-volume field, evaluated through the
/// heat kernel: with `K_t` the diagonal of the 1-D Dirichlet kernel on
/// `⟦1, M-1⟧`,
///
/// `Var φ₀(x) = σ_d² - (L+1)^{-d} ∫_0^∞ Π_i S_t(x_i) dt`,
/// `S_t(a) = Σ_{y=0}^{L} K_t((a - y) mod M)`.
///
/// `S_t` depends on `x_i mod M` only, so it is tabulated once per time node.
#[derive(Clone, Debug)]
pub struct Phi0Profile {
    dim: usize,
    overlap: i64,
    period: i64,
    sigma2: f64,
    nodes: Vec<Node>,
}

#[derive(Clone, Debug)]
struct Node {
    weight: f64,
    /// `K_t(a)` for `a ∈ ⟦0, M-1⟧`.
    kernel: Vec<f64>,
    /// `S_t(a)` for `a ∈ ⟦0, M-1⟧`.
    sums: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SupVariance {
    pub overlap: i64,
    pub site: Site,
    pub value: f64,
}

impl Phi0Profile {
    pub fn new(dim: usize, overlap: i64) -> Result<Self> {
        if dim < 3 {
            return invalid("the infinite-volume profile needs d >= 3");
        }
        if overlap < 2 {
            return invalid("overlap width must be at least 2");
        }
        let m = overlap * overlap + overlap;
        let mf = m as f64;
        let rates: Vec<f64> = (1..m)
            .map(|k| 2.0 * (1.0 - (std::f64::consts::PI * k as f64 / mf).cos()))
            .collect();
        // the slowest mode of the d-fold product decays like e^{-d λ₁ t}
        let t_max = 50.0 / (dim as f64 * rates[0]);
        let sin2: Vec<Vec<f64>> = (0..m)
            .map(|a| {
                (1..m)
                    .map(|k| (std::f64::consts::PI * (k * a) as f64 / mf).sin().powi(2))
                    .collect()
            })
            .collect();
        let nodes = log_time_nodes(t_max)
            .into_iter()
            .map(|(t, w)| {
                let decay: Vec<f64> = rates.iter().map(|r| (-r * t).exp()).collect();
                let kernel: Vec<f64> = sin2
                    .iter()
                    .map(|s| 2.0 / mf * s.iter().zip(&decay).map(|(a, b)| a * b).sum::<f64>())
                    .collect();
                let sums: Vec<f64> = (0..m)
                    .map(|a| (0..=overlap).map(|y| kernel[(a - y).rem_euclid(m) as usize]).sum())
                    .collect();
                Node {
                    weight: w,
                    kernel,
                    sums,
                }
            })
            .collect();
        Ok(Self {
            dim,
            overlap,
            period: m,
            sigma2: sigma2(dim),
            nodes,
        })
    }

    pub fn period(&self) -> i64 {
        self.period
    }

    fn killed_part(&self, residues: &[usize]) -> f64 {
        self.nodes
            .iter()
            .map(|n| n.weight * residues.iter().map(|&a| n.sums[a]).product::<f64>())
            .sum()
    }

    /// `Var φ₀(x)`.
    pub fn variance(&self, x: &[i64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        let r: Vec<usize> = x.iter().map(|v| v.rem_euclid(self.period) as usize).collect();
        let norm = ((self.overlap + 1) as f64).powi(self.dim as i32);
        self.sigma2 - self.killed_part(&r) / norm
    }

    /// `Var H^(y)(x) = σ² - G_cell(x, x)`, the contribution of one copy.
    pub fn copy_variance(&self, y: &[i64], x: &[i64]) -> f64 {
        let r: Vec<usize> = x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b).rem_euclid(self.period) as usize)
            .collect();
        let cell: f64 = self
            .nodes
            .iter()
            .map(|n| n.weight * r.iter().map(|&a| n.kernel[a]).product::<f64>())
            .sum();
        self.sigma2 - cell
    }

    /// Supremum of `Var φ₀` over a period cell. The variance is symmetric in
    /// the coordinates, so only sorted residue tuples are visited.
    pub fn sup_variance(&self) -> SupVariance {
        let m = self.period as usize;
        let d = self.dim;
        let mut best = (f64::INFINITY, vec![0usize; d]);
        let mut r = vec![0usize; d];
        loop {
            let v = self.killed_part(&r);
            if v < best.0 {
                best = (v, r.clone());
            }
            // next non-decreasing tuple
            let mut i = d;
            loop {
                if i == 0 {
                    let norm = ((self.overlap + 1) as f64).powi(d as i32);
                    return SupVariance {
                        overlap: self.overlap,
                        site: best.1.iter().map(|&a| a as i64).collect(),
                        value: self.sigma2 - best.0 / norm,
                    };
                }
                i -= 1;
                if r[i] + 1 < m {
                    r[i] += 1;
                    for j in i + 1..d {
                        r[j] = r[i];
                    }
                    break;
                }
            }
        }
    }
}

/// `sup_x Var φ₀(x)` for each overlap width.
pub fn phi0_sup_variance(dim: usize, overlaps: &[i64]) -> Result<Vec<SupVariance>> {
    overlaps
        .iter()
        .map(|&l| Ok(Phi0Profile::new(dim, l)?.sup_variance()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{CovarianceSolver, Domain};
    use crate::lattice::BoxRegion;

    #[test]
    fn sine_series_matches_cell_solver() {
        let p = Phi0Profile::new(3, 2).unwrap();
        let cell = CovarianceSolver::new(Domain::box_interior(&BoxRegion::cube(&[0, 0, 0], 6).unwrap()).unwrap()).unwrap();
        for x in [[1i64, 1, 1], [3, 3, 3], [2, 4, 5]] {
            let direct = p.sigma2 - cell.variance(&x).unwrap();
            assert!((p.copy_variance(&[0, 0, 0], &x) - direct).abs() < 1e-11);
        }
    }

    #[test]
    fn profile_is_the_average_of_copies() {
        let p = Phi0Profile::new(3, 2).unwrap();
        for x in [[0i64, 0, 0], [1, 4, 2], [3, 3, 5]] {
            let avg: f64 = BoxRegion::cube(&[0, 0, 0], 2)
                .unwrap()
                .sites()
                .map(|y| p.copy_variance(&y, &x))
                .sum::<f64>()
                / 27.0;
            assert!((avg - p.variance(&x)).abs() < 1e-11);
        }
    }

    #[test]
    fn grid_sites_carry_the_full_variance() {
        let p = Phi0Profile::new(3, 2).unwrap();
        assert_eq!(p.copy_variance(&[1, 2, 0], &[7, 3, 3]), p.sigma2);
    }

    #[test]
    fn sup_is_a_maximum_and_periodic() {
        let p = Phi0Profile::new(3, 2).unwrap();
        let s = p.sup_variance();
        for x in BoxRegion::cube(&[0, 0, 0], 5).unwrap().sites() {
            assert!(p.variance(&x) <= s.value + 1e-14);
        }
        assert!((p.variance(&[1, 2, 3]) - p.variance(&[7, -4, 15])).abs() < 1e-15);
    }
}
