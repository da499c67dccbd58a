use crate::error::{invalid, Result};
use crate::gaussian::{bi_gradient_variance, Domain, FieldSample, HarmonicExtender};
use crate::lattice::{Hierarchy, Site};

/// Multiscale split of a field on `Λ_N` along the grids of a hierarchy:
/// `φ = ψ + ψ̄` with `ψ̄ = E[φ | 𝔾_0]` and `ψ̄ = Σ_{j=1}^J ψ_j`, where
/// `ψ_j = E[φ | 𝔾_{j-1}] - E[φ | 𝔾_j]` (the last term vanishes for zero
/// boundary data).
#[derive(Clone, Debug)]
pub struct TelescopingFields {
    /// `ψ_1, …, ψ_J`.
    pub levels: Vec<FieldSample>,
    /// `ψ̄ = E[φ | 𝔾_0]`.
    pub smooth: FieldSample,
    /// `ψ = φ - ψ̄`.
    pub rough: FieldSample,
    /// `E[φ | 𝔾_J]`, the harmonic extension of the boundary data.
    pub boundary: FieldSample,
}

impl TelescopingFields {
    /// `ψ_j` for `j ∈ ⟦1, J⟧`.
    pub fn level(&self, j: usize) -> &FieldSample {
        &self.levels[j - 1]
    }

    /// `max |ψ̄ - E[φ|𝔾_J] - Σ_j ψ_j|`.
    pub fn telescoping_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.smooth.values().len() {
            let sum: f64 = self.levels.iter().map(|f| f.values()[k]).sum();
            let lhs = self.smooth.values()[k] - self.boundary.values()[k];
            worst = worst.max((lhs - sum).abs());
        }
        worst
    }
}

/// `E[φ | φ on 𝔾_j]` on the interior sites of `Λ_N`.
pub fn conditional_on_grid(phi: &FieldSample, h: &Hierarchy, j: usize) -> Result<FieldSample> {
    let top = h.top_box();
    let datum = h.grid(j);
    let region: Vec<Site> = top.sites().collect();
    let dom = phi.domain();
    let free_count = dom.sites().iter().filter(|x| !datum.contains(x)).count();
    if free_count == 0 {
        return Ok(phi.clone());
    }
    let ext = HarmonicExtender::new(&region, &datum)?;
    let values: Vec<f64> = datum.iter().map(|x| phi.at(x)).collect();
    let free = ext.extend(&values)?;
    let fd = ext.free_domain();
    let out = dom
        .sites()
        .iter()
        .map(|x| match fd.index_of(x) {
            Some(k) => free[k],
            None => phi.at(x),
        })
        .collect();
    Ok(FieldSample::new(phi.domain_arc(), out, phi.exterior()))
}

/// Builds every `ψ_j` from one sample on the interior of `Λ_N`. Exterior
/// data is the field's exterior value.
pub fn build_telescoping(phi: &FieldSample, h: &Hierarchy) -> Result<TelescopingFields> {
    let top = h.top_box();
    let interior = top.interior().map_or(0, |b| b.volume());
    if phi.domain().len() != interior
        || !phi.domain().sites().iter().all(|x| top.contains(x) && !top.on_inner_boundary(x))
    {
        return invalid("field must live on the interior of the hierarchy's top box");
    }
    let dom = phi.domain_arc();
    let j_max = h.num_levels();
    let cond: Vec<FieldSample> = (0..=j_max)
        .map(|j| conditional_on_grid(phi, h, j))
        .collect::<Result<_>>()?;
    let diff = |a: &FieldSample, b: &FieldSample| {
        let v = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
        FieldSample::new(dom.clone(), v, 0.0)
    };
    let levels = (1..=j_max).map(|j| diff(&cond[j - 1], &cond[j])).collect();
    let smooth = FieldSample::new(dom.clone(), cond[0].values().to_vec(), phi.exterior());
    let rough = diff(phi, &cond[0]);
    Ok(TelescopingFields {
        levels,
        smooth,
        rough,
        boundary: cond[j_max].clone(),
    })
}

/// `Var(∇_{eg} ψ_j(x))` for the zero-boundary field on `Λ_N`.
pub fn level_bi_gradient_variance(h: &Hierarchy, j: usize, x: &[i64], e: usize, g: usize) -> Result<f64> {
    if j == 0 || j > h.num_levels() {
        return invalid(format!("level {j} outside 1..={}", h.num_levels()));
    }
    let dom = Domain::box_interior(h.top_box())?;
    bi_gradient_variance(&dom, |y| h.in_grid(j - 1, y), |y| h.in_grid(j, y), x, e, g)
}

/// `Var(E[∇_{eg} φ(x) | 𝔾_{j-1}])` for the zero-boundary field on `Λ_N`,
/// an upper bound for [`level_bi_gradient_variance`].
pub fn conditioned_bi_gradient_variance(
    h: &Hierarchy,
    j: usize,
    x: &[i64],
    e: usize,
    g: usize,
) -> Result<f64> {
    if j == 0 || j > h.num_levels() {
        return invalid(format!("level {j} outside 1..={}", h.num_levels()));
    }
    let dom = Domain::box_interior(h.top_box())?;
    bi_gradient_variance(&dom, |y| h.in_grid(j - 1, y), |_| false, x, e, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::CovarianceSolver;
    use crate::rng::{stream, Purpose};

    fn small() -> Hierarchy {
        let h = Hierarchy::build(24, 0.9, 3, 0.9).unwrap();
        assert_eq!(h.num_levels(), 2);
        h
    }

    #[test]
    fn telescoping_identity_holds_per_sample() {
        let h = small();
        let solver = CovarianceSolver::new(Domain::box_interior(h.top_box()).unwrap()).unwrap();
        let phi = solver.sample_field(0.0, &mut stream(3, Purpose::Test, 0, 0));
        let t = build_telescoping(&phi, &h).unwrap();
        assert_eq!(t.levels.len(), 2);
        assert!(t.boundary.values().iter().all(|v| *v == 0.0));
        assert!(t.telescoping_error() < 1e-9);
        for (k, v) in phi.values().iter().enumerate() {
            assert!((t.rough.values()[k] + t.smooth.values()[k] - v).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_values_are_reproduced() {
        let h = small();
        let solver = CovarianceSolver::new(Domain::box_interior(h.top_box()).unwrap()).unwrap();
        let phi = solver.sample_field(0.0, &mut stream(4, Purpose::Test, 0, 0));
        let c0 = conditional_on_grid(&phi, &h, 0).unwrap();
        for x in h.grid(0).iter() {
            if phi.domain().contains(x) {
                assert_eq!(c0.at(x), phi.at(x));
            }
        }
    }

    #[test]
    fn level_variance_is_dominated() {
        let h = small();
        let b = &h.level_boxes(1)[0];
        let x = b.center();
        for (e, g) in [(0, 0), (0, 1)] {
            let lhs = level_bi_gradient_variance(&h, 1, &x, e, g).unwrap();
            let rhs = conditioned_bi_gradient_variance(&h, 1, &x, e, g).unwrap();
            assert!(lhs >= 0.0 && lhs <= rhs * (1.0 + 1e-9), "{lhs} {rhs}");
        }
    }
}
