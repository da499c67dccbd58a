//! Harmonic extension, hitting distributions and conditional (Markov) variances.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::domain::{Domain, NONE};
use super::field::FieldSample;
use super::solver::{cg_solve_default, CovarianceSolver};
use crate::error::{invalid, Error, Result};
use crate::lattice::{add, BoxRegion, Site, SiteSet};

/// Above this many free sites the extender switches from Cholesky to CG.
const DIRECT_LIMIT: usize = 60_000;

enum Backend {
    Direct(CovarianceSolver),
    Iterative,
}

/// Reusable solver for "harmonic off `U`, equal to the datum on `A`", where
/// `U = region \ A`. Every neighbour of a free site must lie in the region.
pub struct HarmonicExtender {
    free: Arc<Domain>,
    datum: SiteSet,
    /// for each free site, the datum indices among its neighbours
    coupling: Vec<Vec<usize>>,
    backend: Backend,
}

impl HarmonicExtender {
    pub fn new(region: &[Site], datum: &SiteSet) -> Result<Self> {
        if datum.is_empty() {
            return invalid("harmonic extension needs a nonempty datum");
        }
        let dim = datum.as_slice()[0].len();
        let free_sites: Vec<Site> = region
            .iter()
            .filter(|x| !datum.contains(x))
            .cloned()
            .collect();
        if free_sites.is_empty() {
            return invalid("every site of the region carries datum");
        }
        let free = Domain::from_sites(dim, free_sites)?;
        let index_of_datum: HashMap<&Site, usize> =
            datum.iter().enumerate().map(|(k, x)| (x, k)).collect();
        let mut coupling = vec![Vec::new(); free.len()];
        for k in 0..free.len() {
            for (slot, &j) in free.neighbor_slots(k).iter().enumerate() {
                if j != NONE {
                    continue;
                }
                let mut y = free.site(k).to_vec();
                y[slot / 2] += if slot % 2 == 0 { -1 } else { 1 };
                match index_of_datum.get(&y) {
                    Some(&a) => coupling[k].push(a),
                    None => {
                        return Err(Error::InvalidArgument(format!(
                            "site {:?} has neighbour {y:?} outside the region",
                            free.site(k)
                        )))
                    }
                }
            }
        }
        let (ncomp, label) = free.components();
        let mut anchored = vec![false; ncomp];
        for k in 0..free.len() {
            if !coupling[k].is_empty() {
                anchored[label[k]] = true;
            }
        }
        if anchored.iter().any(|a| !a) {
            return invalid("a component of the free sites does not touch the datum");
        }
        let free = Arc::new(free);
        let backend = if free.len() <= DIRECT_LIMIT {
            Backend::Direct(CovarianceSolver::with_limit(free.clone(), DIRECT_LIMIT)?)
        } else {
            Backend::Iterative
        };
        Ok(Self {
            free,
            datum: datum.clone(),
            coupling,
            backend,
        })
    }

    pub fn free_domain(&self) -> &Domain {
        &self.free
    }

    pub fn free_domain_arc(&self) -> Arc<Domain> {
        self.free.clone()
    }

    pub fn datum(&self) -> &SiteSet {
        &self.datum
    }

    /// Values on the free sites given datum values aligned with `datum()`.
    pub fn extend(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.datum.len() {
            return invalid("one datum value per datum site");
        }
        let rhs: Vec<f64> = self
            .coupling
            .iter()
            .map(|c| c.iter().map(|&a| values[a]).sum())
            .collect();
        match &self.backend {
            Backend::Direct(s) => Ok(s.solve(&rhs)),
            Backend::Iterative => cg_solve_default(&self.free, &rhs, 1e-13),
        }
    }
}

/// Result of a harmonic extension: values on the free sites plus the datum.
#[derive(Clone, Debug)]
pub struct HarmonicExtension {
    pub extended: FieldSample,
    pub datum: SiteSet,
    pub datum_values: Vec<f64>,
}

impl HarmonicExtension {
    pub fn at(&self, x: &[i64]) -> Option<f64> {
        if let Some(k) = self.extended.domain().index_of(x) {
            return Some(self.extended.values()[k]);
        }
        self.datum
            .as_slice()
            .binary_search_by(|s| s.as_slice().cmp(x))
            .ok()
            .map(|k| self.datum_values[k])
    }

    /// `max |ΔH|` over the free sites.
    pub fn laplacian_residual(&self) -> f64 {
        let dom = self.extended.domain();
        let mut worst: f64 = 0.0;
        for k in 0..dom.len() {
            let x = dom.site(k);
            let mut lap = -2.0 * dom.dim() as f64 * self.extended.values()[k];
            for i in 0..dom.dim() {
                for s in [-1, 1] {
                    let mut y = x.to_vec();
                    y[i] += s;
                    lap += self.at(&y).unwrap_or(f64::NAN);
                }
            }
            worst = worst.max(lap.abs());
        }
        worst
    }
}

/// Harmonic extension of `(datum_sites, datum_values)` to the rest of `region`.
pub fn harmonic_extend(
    region: &BoxRegion,
    datum_sites: &[Site],
    datum_values: &[f64],
) -> Result<HarmonicExtension> {
    if datum_sites.len() != datum_values.len() {
        return invalid("datum sites and values differ in length");
    }
    let mut pairs: Vec<(Site, f64)> = datum_sites
        .iter()
        .cloned()
        .zip(datum_values.iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    pairs.dedup_by(|a, b| a.0 == b.0);
    let datum = SiteSet::new(pairs.iter().map(|p| p.0.clone()).collect());
    let values: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let region_sites: Vec<Site> = region.sites().collect();
    let ext = HarmonicExtender::new(&region_sites, &datum)?;
    let v = ext.extend(&values)?;
    Ok(HarmonicExtension {
        extended: FieldSample::new(ext.free_domain_arc(), v, f64::NAN),
        datum,
        datum_values: values,
    })
}

/// Hitting distribution on `∂C` from the rounded-down center of the cube
/// `C = ⟦0, L⟧^d`, as (offset from the cube corner, probability) pairs.
pub fn hitting_weights(d: usize, l: i64) -> Result<Vec<(Site, f64)>> {
    static CACHE: Mutex<Vec<((usize, i64), Arc<Vec<(Site, f64)>>)>> = Mutex::new(Vec::new());
    if let Some((_, w)) = CACHE.lock().unwrap().iter().find(|(k, _)| *k == (d, l)) {
        return Ok((**w).clone());
    }
    let cube = BoxRegion::cube(&vec![0; d], l)?;
    let dom = Domain::box_interior(&cube)?;
    let solver = CovarianceSolver::new(dom)?;
    let g = solver.green_column(&cube.center())?;
    let mut out = Vec::new();
    for b in cube.inner_boundary() {
        let mut p = 0.0;
        for i in 0..d {
            for s in [-1, 1] {
                let mut y = b.clone();
                y[i] += s;
                if let Some(k) = solver.domain().index_of(&y) {
                    p += g[k];
                }
            }
        }
        if p > 0.0 {
            out.push((b, p));
        }
    }
    CACHE.lock().unwrap().push(((d, l), Arc::new(out.clone())));
    Ok(out)
}

/// `H_L(z) = Σ_{x∈∂C_L^z} p_{L,z}(x) φ(x)` for the cube `C_L^z = zL + ⟦0, L⟧^d`.
/// Boundary sites of the cube must lie in the field's domain or its exterior,
/// and the cube must be inside `region`.
pub fn harmonic_average(phi: &FieldSample, region: &BoxRegion, z: &[i64], l: i64) -> Result<f64> {
    let d = region.dim();
    let corner: Site = z.iter().map(|v| v * l).collect();
    let cube = BoxRegion::cube(&corner, l)?;
    if !region.contains(cube.lo()) || !region.contains(cube.hi()) {
        return invalid(format!("cube at {z:?} with edge {l} leaves the region"));
    }
    let w = hitting_weights(d, l)?;
    Ok(w.iter().map(|(b, p)| p * phi.at(&add(&corner, b))).sum())
}

/// `Var(φ(x) | φ on conditioning)` for the zero-exterior field on `domain`:
/// the Green diagonal of `domain \ conditioning` at `x`.
pub fn conditional_variance(domain: &Domain, x: &[i64], conditioning: &SiteSet) -> Result<f64> {
    if conditioning.contains(x) {
        return invalid("x belongs to the conditioning set");
    }
    if !domain.contains(x) {
        return Err(Error::NotInterior(x.to_vec()));
    }
    let rest = domain.without(|y| conditioning.contains(y))?;
    green_diagonal(&rest, x)
}

fn green_diagonal(domain: &Domain, x: &[i64]) -> Result<f64> {
    let k = domain
        .index_of(x)
        .ok_or_else(|| Error::NotInterior(x.to_vec()))?;
    let mut e = vec![0.0; domain.len()];
    e[k] = 1.0;
    let g = if domain.len() <= DIRECT_LIMIT {
        CovarianceSolver::new(domain.clone())?.solve(&e)
    } else {
        cg_solve_default(domain, &e, 1e-13)?
    };
    Ok(g[k])
}

/// `f(x+e+g) - f(x+e) - f(x+g) + f(x)`.
pub fn bi_gradient(
    f: impl Fn(&[i64]) -> Option<f64>,
    x: &[i64],
    e: usize,
    g: usize,
) -> Result<f64> {
    let d = x.len();
    if e >= d || g >= d {
        return invalid("direction index out of range");
    }
    let mut xe = x.to_vec();
    xe[e] += 1;
    let mut xg = x.to_vec();
    xg[g] += 1;
    let mut xeg = xe.clone();
    xeg[g] += 1;
    let get =
        |y: &[i64]| f(y).ok_or_else(|| Error::InvalidArgument(format!("site {y:?} is undefined")));
    Ok(get(&xeg)? - get(&xe)? - get(&xg)? + get(x)?)
}

/// The bi-gradient as a signed stencil on four sites.
pub fn bi_gradient_stencil(x: &[i64], e: usize, g: usize) -> Vec<(Site, f64)> {
    let mut xe = x.to_vec();
    xe[e] += 1;
    let mut xg = x.to_vec();
    xg[g] += 1;
    let mut xeg = xe.clone();
    xeg[g] += 1;
    let mut out: Vec<(Site, f64)> = Vec::new();
    for (y, c) in [(xeg, 1.0), (xe, -1.0), (xg, -1.0), (x.to_vec(), 1.0)] {
        match out.iter_mut().find(|(s, _)| *s == y) {
            Some(slot) => slot.1 += c,
            None => out.push((y, c)),
        }
    }
    out.retain(|(_, c)| *c != 0.0);
    out
}

/// `vᵀ (G_outer - G_inner) v` for `inner ⊆ outer`, the variance of
/// `vᵀ E[φ | φ on outer \ inner]` for the zero-exterior field on `outer`.
/// Stencil sites in `outer \ inner` are conditioned on directly; sites
/// off `outer` carry zero data and drop out.
///
/// Computed without cancellation: `a = G_inner v`, the weights
/// `r = v - Q_outer a` live on `outer \ inner`, and the result is `vᵀ G_outer r`.
pub fn projection_variance(outer: &Domain, inner: &Domain, stencil: &[(Site, f64)]) -> Result<f64> {
    let mut v_in = vec![0.0; inner.len()];
    let mut r = vec![0.0; outer.len()];
    for (y, c) in stencil {
        if let Some(k) = inner.index_of(y) {
            v_in[k] += c;
        } else if let Some(k) = outer.index_of(y) {
            r[k] += c;
        }
    }
    if v_in.iter().any(|v| *v != 0.0) {
        let a = solve_on(inner, &v_in)?;
        for (k, x) in inner.sites().iter().enumerate() {
            let ko = outer.index_of(x).ok_or_else(|| {
                Error::InvalidArgument("inner domain not contained in outer".into())
            })?;
            for nb in outer.neighbors(ko) {
                if !inner.contains(outer.site(nb)) {
                    r[nb] += a[k];
                }
            }
        }
    }
    if r.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let b = solve_on(outer, &r)?;
    Ok(stencil
        .iter()
        .filter_map(|(y, c)| outer.index_of(y).map(|k| c * b[k]))
        .sum())
}

fn solve_on(domain: &Domain, rhs: &[f64]) -> Result<Vec<f64>> {
    cg_solve_default(domain, rhs, 1e-13)
}

/// `Var(∇_{eg} ψ(x))` for `ψ = E[φ|fine] - E[φ|coarse]`, `coarse ⊆ fine`,
/// with `φ` the zero-exterior field on `domain`.
pub fn bi_gradient_variance(
    domain: &Domain,
    fine: impl Fn(&[i64]) -> bool,
    coarse: impl Fn(&[i64]) -> bool,
    x: &[i64],
    e: usize,
    g: usize,
) -> Result<f64> {
    let outer = domain.without(&coarse)?;
    let inner = domain.without(|y| fine(y) || coarse(y))?;
    projection_variance(&outer, &inner, &bi_gradient_stencil(x, e, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_box;

    #[test]
    fn affine_datum_is_reproduced() {
        let b = build_box(6, 3).unwrap();
        let bd = b.inner_boundary();
        let f = |x: &[i64]| 0.5 + 2.0 * x[0] as f64 - 1.5 * x[1] as f64 + 0.25 * x[2] as f64;
        let vals: Vec<f64> = bd.iter().map(|x| f(x)).collect();
        let h = harmonic_extend(&b, &bd, &vals).unwrap();
        for x in b.interior().unwrap().sites() {
            assert!((h.at(&x).unwrap() - f(&x)).abs() < 1e-11);
        }
        assert!(h.laplacian_residual() < 1e-10);
    }

    #[test]
    fn disconnected_free_sites_are_rejected() {
        let b = build_box(4, 3).unwrap();
        let datum: Vec<Site> = b
            .sites()
            .filter(|x| b.on_inner_boundary(x) || x[0] == 2)
            .collect();
        // both halves touch the datum, so this is fine
        assert!(harmonic_extend(&b, &datum, &vec![1.0; datum.len()]).is_ok());
        let region: Vec<Site> = vec![vec![0, 0, 0]];
        let datum = SiteSet::new(vec![vec![5, 5, 5]]);
        assert!(HarmonicExtender::new(&region, &datum).is_err());
    }

    #[test]
    fn hitting_weights_normalised() {
        for l in [2, 4, 7] {
            let w = hitting_weights(3, l).unwrap();
            let s: f64 = w.iter().map(|p| p.1).sum();
            assert!((s - 1.0).abs() < 1e-10, "L={l}: {s}");
            assert!(w.iter().all(|p| p.1 >= 0.0));
        }
    }

    #[test]
    fn neighbours_conditioning_gives_one_over_2d() {
        let dom = Domain::box_interior(&build_box(6, 3).unwrap()).unwrap();
        let x = vec![3, 3, 3];
        let nb: SiteSet = crate::lattice::unit_steps(3)
            .iter()
            .map(|e| add(&x, e))
            .collect();
        let v = conditional_variance(&dom, &x, &nb).unwrap();
        assert!((v - 1.0 / 6.0).abs() < 1e-12);
        let full = conditional_variance(&dom, &x, &SiteSet::default()).unwrap();
        let s = CovarianceSolver::new(dom.clone()).unwrap();
        assert!((full - s.variance(&x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn bi_gradient_examples() {
        let f = |x: &[i64]| Some((x[0] * x[1]) as f64);
        assert_eq!(bi_gradient(f, &[2, 3, 0], 0, 1).unwrap(), 1.0);
        let q = |x: &[i64]| Some((x[0] * x[0]) as f64);
        assert_eq!(bi_gradient(q, &[2, 3, 0], 0, 0).unwrap(), 2.0);
        let a = |x: &[i64]| Some(1.0 + 3.0 * x[0] as f64 - x[2] as f64);
        assert_eq!(bi_gradient(a, &[2, 3, 0], 2, 1).unwrap(), 0.0);
        assert!(bi_gradient(|_| None, &[0, 0, 0], 0, 1).is_err());
    }

    #[test]
    fn projection_variance_matches_difference_of_greens() {
        let b = build_box(8, 3).unwrap();
        let outer = Domain::box_interior(&b).unwrap();
        let inner = outer.without(|x| x[0] == 4).unwrap();
        let so = CovarianceSolver::new(outer.clone()).unwrap();
        let si = CovarianceSolver::new(inner.clone()).unwrap();
        // the second stencil straddles the conditioning plane
        for x in [[2, 3, 3], [3, 3, 3]] {
            let st = bi_gradient_stencil(&x, 0, 1);
            let pv = projection_variance(&outer, &inner, &st).unwrap();
            let quad = |s: &CovarianceSolver| -> f64 {
                let mut v = vec![0.0; s.domain().len()];
                for (y, c) in &st {
                    if let Some(k) = s.domain().index_of(y) {
                        v[k] += c;
                    }
                }
                let g = s.solve(&v);
                v.iter().zip(&g).map(|(a, b)| a * b).sum()
            };
            let direct = quad(&so) - quad(&si);
            assert!(pv > 0.0);
            assert!((pv - direct).abs() < 1e-12, "{pv} vs {direct}");
        }
    }
}
