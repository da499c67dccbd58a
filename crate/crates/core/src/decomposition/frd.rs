use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::gaussian::{CovarianceSolver, Domain, FieldSample, DEFAULT_SITE_LIMIT};
use crate::lattice::{add, BoxRegion, Site};
use crate::rng::{stream, Purpose};

/// Splits the lattice free field into a small long-range part `φ₀` and
/// independent local fields `φ^(z)`, each living on a box of edge `M + L - 2`.
///
/// Built from `(L+1)^d` independent copies `φ^(y)` of the field. Copy `y`
/// is conditioned on the grid `y + {x : some x_i ∈ MZ}` with `M = L² + L`;
/// its harmonic part goes to `φ₀` and its cell remainders to the `φ^(z)`.
/// Only the blocks `z` listed in the window are realized when sampling.
#[derive(Debug)]
pub struct FiniteRangeDecomposition {
    dim: usize,
    overlap: i64,
    period: i64,
    window: Vec<Site>,
    cell: Arc<CovarianceSolver>,
}

/// Components of one draw on the sampling region.
#[derive(Clone, Debug)]
pub struct FrdSample {
    pub region: BoxRegion,
    pub phi0: FieldSample,
    /// `(z, φ^(z))`, each on its own support box.
    pub locals: Vec<(Site, FieldSample)>,
    pub total: FieldSample,
}

/// Deterministic comparison of the component covariances with the field's.
#[derive(Clone, Debug, Serialize)]
pub struct CovarianceCheck {
    pub sites: Vec<Site>,
    pub padding: i64,
    pub max_deviation: f64,
    pub min_phi0_entry: f64,
    pub min_local_entry: f64,
    pub phi0_diagonal: Vec<f64>,
    pub local_diagonal: Vec<f64>,
    pub field_diagonal: Vec<f64>,
}

impl FiniteRangeDecomposition {
    pub fn new(dim: usize, overlap: i64, window: Vec<Site>) -> Result<Self> {
        if dim == 0 {
            return invalid("dimension must be positive");
        }
        if overlap < 2 {
            return invalid(format!("overlap width L = {overlap} must be at least 2"));
        }
        if window.is_empty() {
            return invalid("window must contain at least one block");
        }
        if let Some(z) = window.iter().find(|z| z.len() != dim) {
            return invalid(format!("block index {z:?} has the wrong dimension"));
        }
        let mut window = window;
        window.sort();
        window.dedup();
        let period = overlap * overlap + overlap;
        let cell_box = BoxRegion::cube(&vec![0; dim], period)?;
        let cell = Arc::new(CovarianceSolver::new(Domain::box_interior(&cell_box)?)?);
        let frd = Self {
            dim,
            overlap,
            period,
            window,
            cell,
        };
        let sites = frd.sampling_region().pad(3 * period).volume();
        if sites > DEFAULT_SITE_LIMIT {
            return Err(Error::TooLarge {
                sites,
                limit: DEFAULT_SITE_LIMIT,
            });
        }
        Ok(frd)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `L`.
    pub fn overlap(&self) -> i64 {
        self.overlap
    }

    /// `M = L² + L`.
    pub fn period(&self) -> i64 {
        self.period
    }

    pub fn window(&self) -> &[Site] {
        &self.window
    }

    /// `(L+1)^{-d/2}`, the weight of each copy.
    pub fn copy_weight(&self) -> f64 {
        ((self.overlap + 1) as f64).powf(-(self.dim as f64) / 2.0)
    }

    /// Grid offsets `y ∈ ⟦0, L⟧^d`.
    pub fn offsets(&self) -> Vec<Site> {
        BoxRegion::cube(&vec![0; self.dim], self.overlap)
            .expect("L >= 2")
            .sites()
            .collect()
    }

    /// `Mz + ⟦1, M+L-1⟧^d`.
    pub fn support(&self, z: &[i64]) -> BoxRegion {
        let lo: Site = z.iter().map(|v| self.period * v + 1).collect();
        let hi: Site = lo.iter().map(|v| v + self.period + self.overlap - 2).collect();
        BoxRegion::new(lo, hi).expect("nonempty support")
    }

    /// The closed cell `y + Mz + ⟦0, M⟧^d` of grid `y`.
    pub fn cell_box(&self, y: &[i64], z: &[i64]) -> BoxRegion {
        let lo: Site = y.iter().zip(z).map(|(a, b)| a + self.period * b).collect();
        BoxRegion::cube(&lo, self.period).expect("M >= 6")
    }

    /// Block of the open cell of grid `y` containing `x`, or `None` on the grid.
    pub fn cell_of(&self, y: &[i64], x: &[i64]) -> Option<Site> {
        let mut z = Vec::with_capacity(self.dim);
        for (xi, yi) in x.iter().zip(y) {
            let r = xi - yi;
            if r.rem_euclid(self.period) == 0 {
                return None;
            }
            z.push(r.div_euclid(self.period));
        }
        Some(z)
    }

    /// Bounding box of the window's supports.
    pub fn sampling_region(&self) -> BoxRegion {
        let mut lo = self.support(&self.window[0]).lo().to_vec();
        let mut hi = self.support(&self.window[0]).hi().to_vec();
        for z in &self.window[1..] {
            let s = self.support(z);
            for i in 0..self.dim {
                lo[i] = lo[i].min(s.lo()[i]);
                hi[i] = hi[i].max(s.hi()[i]);
            }
        }
        BoxRegion::new(lo, hi).expect("valid bounds")
    }

    /// Every local field that can be nonzero at `x` belongs to the window.
    pub fn is_complete(&self, x: &[i64]) -> bool {
        self.offsets().iter().all(|y| {
            self.cell_of(y, x)
                .is_none_or(|z| self.window.binary_search(&z).is_ok())
        })
    }

    fn local(&self, y: &[i64], z: &[i64], x: &[i64]) -> Site {
        let corner = self.cell_box(y, z);
        x.iter().zip(corner.lo()).map(|(a, b)| a - b).collect()
    }

    /// Green function of the zero-boundary field on one open cell, in cell
    /// coordinates.
    fn cell_green_column(&self, local: &[i64]) -> Result<Vec<f64>> {
        self.cell.green_column(local)
    }

    /// `Cov(φ^(z)(x), φ^(z)(x'))`.
    pub fn local_covariance(&self, z: &[i64], x: &[i64], x2: &[i64]) -> Result<f64> {
        let mut total = 0.0;
        for y in self.offsets() {
            if self.cell_of(&y, x).as_deref() == Some(z) && self.cell_of(&y, x2).as_deref() == Some(z)
            {
                let col = self.cell_green_column(&self.local(&y, z, x2))?;
                let k = self.cell.domain().index_of(&self.local(&y, z, x)).unwrap();
                total += col[k];
            }
        }
        Ok(total * self.copy_weight().powi(2))
    }

    /// `Σ_z Cov(φ^(z)(x), φ^(z)(x'))` over all blocks of the lattice.
    pub fn local_covariance_total(&self, x: &[i64], x2: &[i64]) -> Result<f64> {
        let mut total = 0.0;
        for y in self.offsets() {
            match (self.cell_of(&y, x), self.cell_of(&y, x2)) {
                (Some(z), Some(z2)) if z == z2 => {
                    let col = self.cell_green_column(&self.local(&y, &z, x2))?;
                    let k = self.cell.domain().index_of(&self.local(&y, &z, x)).unwrap();
                    total += col[k];
                }
                _ => {}
            }
        }
        Ok(total * self.copy_weight().powi(2))
    }

    /// Harmonic measure of grid `y` seen from `x`: `H^(y)(x) = Σ p(b) φ^(y)(b)`.
    /// A grid site sees only itself.
    pub fn grid_weights(&self, y: &[i64], x: &[i64]) -> Result<Vec<(Site, f64)>> {
        let Some(z) = self.cell_of(y, x) else {
            return Ok(vec![(x.to_vec(), 1.0)]);
        };
        let cell = self.cell_box(y, &z);
        let g = self.cell_green_column(&self.local(y, &z, x))?;
        let dom = self.cell.domain();
        let mut out = Vec::new();
        for b in cell.inner_boundary() {
            let lb: Site = b.iter().zip(cell.lo()).map(|(a, c)| a - c).collect();
            let mut p = 0.0;
            for i in 0..self.dim {
                for s in [-1, 1] {
                    let mut n = lb.clone();
                    n[i] += s;
                    if let Some(k) = dom.index_of(&n) {
                        p += g[k];
                    }
                }
            }
            if p > 0.0 {
                out.push((b, p));
            }
        }
        Ok(out)
    }

    /// Compares `Cov(φ₀) + Σ_z Cov(φ^(z))` with the covariance of the
    /// zero-boundary field on the bounding box of `sites` padded by `padding`,
    /// entrywise over `sites × sites`. Every copy `φ^(y)` is taken with that
    /// same padded-box law, for which the Markov split is exact.
    pub fn covariance_identity(&self, sites: &[Site], padding: i64) -> Result<CovarianceCheck> {
        if sites.is_empty() {
            return invalid("no sites to compare");
        }
        if padding < self.period + 1 {
            return invalid(format!(
                "padding {padding} must exceed the period {}",
                self.period
            ));
        }
        let mut lo = sites[0].clone();
        let mut hi = sites[0].clone();
        for x in sites {
            for i in 0..self.dim {
                lo[i] = lo[i].min(x[i]);
                hi[i] = hi[i].max(x[i]);
            }
        }
        let padded = BoxRegion::new(lo, hi)?.pad(padding);
        let field = CovarianceSolver::new(Domain::box_interior(&padded)?)?;
        let pdom = field.domain();
        let n = sites.len();
        let to_vec = |w: &[(Site, f64)]| -> Result<Vec<f64>> {
            let mut v = vec![0.0; pdom.len()];
            for (b, p) in w {
                let k = pdom
                    .index_of(b)
                    .ok_or_else(|| Error::NotInterior(b.clone()))?;
                v[k] += p;
            }
            Ok(v)
        };

        let mut phi0 = vec![vec![0.0; n]; n];
        for y in self.offsets() {
            let weights: Vec<Vec<(Site, f64)>> = sites
                .iter()
                .map(|x| self.grid_weights(&y, x))
                .collect::<Result<_>>()?;
            let rhs: Vec<Vec<f64>> = weights.iter().map(|w| to_vec(w)).collect::<Result<_>>()?;
            let solved = field.solve_many(&rhs);
            for a in 0..n {
                for b in 0..n {
                    phi0[a][b] += weights[a]
                        .iter()
                        .map(|(s, p)| p * solved[b][pdom.index_of(s).unwrap()])
                        .sum::<f64>();
                }
            }
        }
        let w2 = self.copy_weight().powi(2);
        let units: Vec<Vec<f64>> = sites
            .iter()
            .map(|x| to_vec(&[(x.clone(), 1.0)]))
            .collect::<Result<_>>()?;
        let green = field.solve_many(&units);

        let mut max_dev: f64 = 0.0;
        let mut min0 = f64::INFINITY;
        let mut min_loc = f64::INFINITY;
        let (mut d0, mut dl, mut dg) = (Vec::new(), Vec::new(), Vec::new());
        for a in 0..n {
            for b in 0..n {
                let c0 = phi0[a][b] * w2;
                let cl = self.local_covariance_total(&sites[a], &sites[b])?;
                let g = green[b][pdom.index_of(&sites[a]).unwrap()];
                max_dev = max_dev.max((c0 + cl - g).abs());
                min0 = min0.min(c0);
                min_loc = min_loc.min(cl);
                if a == b {
                    d0.push(c0);
                    dl.push(cl);
                    dg.push(g);
                }
            }
        }
        Ok(CovarianceCheck {
            sites: sites.to_vec(),
            padding,
            max_deviation: max_dev,
            min_phi0_entry: min0,
            min_local_entry: min_loc,
            phi0_diagonal: d0,
            local_diagonal: dl,
            field_diagonal: dg,
        })
    }

    /// One draw of all components on the sampling region. Copy `y` (index
    /// `i`) uses stream `(i, 0)` for its padded-box field; the cell field of
    /// `(y, z)` with `z` the `k`-th window block uses stream `(i, k + 1)`.
    pub fn sample(&self, seed: u64) -> Result<FrdSample> {
        let region = self.sampling_region();
        let padded = region.pad(3 * self.period);
        let big = CovarianceSolver::new(Domain::box_interior(&padded)?)?;
        self.sample_with(&big, seed)
    }

    /// As [`sample`](Self::sample), reusing a factorization of the padded region.
    pub fn sample_with(&self, big: &CovarianceSolver, seed: u64) -> Result<FrdSample> {
        let region = self.sampling_region();
        let out_dom = Arc::new(Domain::from_box(&region)?);
        let weight = self.copy_weight();
        let cell_dom = self.cell.domain();
        let mut phi0 = vec![0.0; out_dom.len()];

        for (iy, y) in self.offsets().iter().enumerate() {
            let mut rng = stream(seed, Purpose::Decomposition, iy as u64, 0);
            let full = big.sample_centered(&mut rng);
            let value = |x: &[i64]| big.domain().index_of(x).map_or(0.0, |k| full[k]);
            let mut cells: BTreeMap<Site, Vec<usize>> = BTreeMap::new();
            for (k, x) in out_dom.sites().iter().enumerate() {
                match self.cell_of(y, x) {
                    None => phi0[k] += weight * value(x),
                    Some(z) => cells.entry(z).or_default().push(k),
                }
            }
            for (z, members) in cells {
                let corner = self.cell_box(y, &z).lo().to_vec();
                let mut rhs = vec![0.0; cell_dom.len()];
                for (k, s) in cell_dom.sites().iter().enumerate() {
                    for i in 0..self.dim {
                        for step in [-1, 1] {
                            let mut n = s.clone();
                            n[i] += step;
                            if !cell_dom.contains(&n) {
                                rhs[k] += value(&add(&corner, &n));
                            }
                        }
                    }
                }
                let h = self.cell.solve(&rhs);
                for k in members {
                    let x = out_dom.site(k);
                    let local: Site = x.iter().zip(&corner).map(|(a, b)| a - b).collect();
                    phi0[k] += weight * h[cell_dom.index_of(&local).unwrap()];
                }
            }
        }

        let mut locals = Vec::with_capacity(self.window.len());
        for (iz, z) in self.window.iter().enumerate() {
            let support = self.support(z);
            let dom = Arc::new(Domain::from_box(&support)?);
            let mut v = vec![0.0; dom.len()];
            for (iy, y) in self.offsets().iter().enumerate() {
                let mut rng = stream(seed, Purpose::Decomposition, iy as u64, iz as u64 + 1);
                let psi = self.cell.sample_centered(&mut rng);
                let corner = self.cell_box(y, z).lo().to_vec();
                for (k, s) in cell_dom.sites().iter().enumerate() {
                    let g = add(&corner, s);
                    v[dom.index_of(&g).expect("cell inside support")] += weight * psi[k];
                }
            }
            locals.push((z.clone(), FieldSample::new(dom, v, 0.0)));
        }

        let phi0 = FieldSample::new(out_dom.clone(), phi0, f64::NAN);
        let total = FieldSample::from_fn(out_dom, f64::NAN, |x| {
            phi0.at(x) + locals.iter().map(|(_, f)| f.at(x)).sum::<f64>()
        });
        Ok(FrdSample {
            region,
            phi0,
            locals,
            total,
        })
    }
}
