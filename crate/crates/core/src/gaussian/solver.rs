use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Par, Side};
use rand::Rng;
use rand_distr::StandardNormal;

use super::domain::{Domain, NONE};
use super::field::FieldSample;
use crate::error::{Error, Result};

/// Interior-volume ceiling for the direct factorization.
pub const DEFAULT_SITE_LIMIT: usize = 300_000;

/// Relative residual used by every iterative solve that claims to be exact.
pub const SOLVER_TOL: f64 = 1e-10;

/// Sparse Cholesky factorization of `Q = -Δ` on a domain with zero exterior data.
pub struct CovarianceSolver {
    domain: Arc<Domain>,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl std::fmt::Debug for CovarianceSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CovarianceSolver")
            .field("sites", &self.domain.len())
            .finish()
    }
}

impl CovarianceSolver {
    pub fn new(domain: Domain) -> Result<Self> {
        Self::with_limit(Arc::new(domain), DEFAULT_SITE_LIMIT)
    }

    pub fn with_limit(domain: Arc<Domain>, limit: usize) -> Result<Self> {
        let n = domain.len();
        if n > limit {
            return Err(Error::TooLarge { sites: n, limit });
        }
        faer::set_global_parallelism(Par::Seq);
        let diag = 2.0 * domain.dim() as f64;
        let mut triplets = Vec::with_capacity(n * (domain.dim() + 1));
        for k in 0..n {
            triplets.push(Triplet::new(k, k, diag));
            for j in domain.neighbors(k) {
                if j > k {
                    triplets.push(Triplet::new(j, k, -1.0));
                }
            }
        }
        let q = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let llt = q
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(Self { domain, llt })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn domain_arc(&self) -> Arc<Domain> {
        self.domain.clone()
    }

    /// `Q^{-1} b`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.domain.len();
        let mut m = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
        self.llt.solve_in_place(m.as_mut());
        (0..n).map(|i| m[(i, 0)]).collect()
    }

    /// Solves for several right-hand sides at once; returns one vector per input.
    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.domain.len();
        let mut m = Mat::<f64>::from_fn(n, rhs.len(), |i, j| rhs[j][i]);
        self.llt.solve_in_place(m.as_mut());
        (0..rhs.len())
            .map(|j| (0..n).map(|i| m[(i, j)]).collect())
            .collect()
    }

    fn index(&self, y: &[i64]) -> Result<usize> {
        self.domain
            .index_of(y)
            .ok_or_else(|| Error::NotInterior(y.to_vec()))
    }

    /// `G(·, y) = Q^{-1} e_y`.
    pub fn green_column(&self, y: &[i64]) -> Result<Vec<f64>> {
        let k = self.index(y)?;
        let mut e = vec![0.0; self.domain.len()];
        e[k] = 1.0;
        Ok(self.solve(&e))
    }

    pub fn green(&self, x: &[i64], y: &[i64]) -> Result<f64> {
        let i = self.index(x)?;
        Ok(self.green_column(y)?[i])
    }

    /// Green diagonal at `x`.
    pub fn variance(&self, x: &[i64]) -> Result<f64> {
        self.green(x, x)
    }

    /// `‖Q x - b‖_∞`.
    pub fn residual(&self, x: &[f64], rhs: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        self.domain.apply_precision(x, &mut y);
        y.iter()
            .zip(rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// One exact centered draw with covariance `Q^{-1}`.
    ///
    /// The noise `b = Dᵀξ` sums an independent standard normal per lattice
    /// edge (interior–interior edges contribute `e_x - e_y`, edges to the
    /// exterior contribute `e_x`), so `Cov(b) = Q` and `Q^{-1} b` has
    /// covariance `Q^{-1}`.
    pub fn sample_centered<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let dom = &*self.domain;
        let n = dom.len();
        let mut b = vec![0.0; n];
        for k in 0..n {
            for (slot, &j) in dom.neighbor_slots(k).iter().enumerate() {
                // each interior edge is visited from its lower endpoint via the + slot
                if j == NONE {
                    let z: f64 = rng.sample(StandardNormal);
                    b[k] += z;
                } else if slot % 2 == 1 {
                    let z: f64 = rng.sample(StandardNormal);
                    b[k] += z;
                    b[j as usize] -= z;
                }
            }
        }
        self.solve(&b)
    }

    /// A draw of the field with the constant `shift` added at every site and
    /// used as exterior value.
    pub fn sample_field<R: Rng + ?Sized>(&self, shift: f64, rng: &mut R) -> FieldSample {
        let mut v = self.sample_centered(rng);
        for x in &mut v {
            *x += shift;
        }
        FieldSample::new(self.domain.clone(), v, shift)
    }
}

/// Matrix-free conjugate gradients for `Q x = b` on `domain`.
pub fn cg_solve(domain: &Domain, rhs: &[f64], rel_tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = domain.len();
    let bnorm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = bnorm * bnorm;
    for it in 0..max_iter {
        if rr.sqrt() <= rel_tol * bnorm {
            return Ok(x);
        }
        domain.apply_precision(&p, &mut ap);
        let alpha = rr / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_new = r.iter().map(|v| v * v).sum::<f64>();
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
        // recompute the true residual now and then to avoid drift
        if it % 200 == 199 {
            domain.apply_precision(&x, &mut ap);
            for k in 0..n {
                r[k] = rhs[k] - ap[k];
            }
            rr = r.iter().map(|v| v * v).sum::<f64>();
        }
    }
    if rr.sqrt() <= rel_tol * bnorm {
        Ok(x)
    } else {
        Err(Error::NoConvergence {
            residual: rr.sqrt() / bnorm,
            iterations: max_iter,
        })
    }
}

/// CG with a generous iteration cap scaled to the domain diameter.
pub fn cg_solve_default(domain: &Domain, rhs: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    let cap = 200 + 50 * (domain.len() as f64).powf(1.0 / domain.dim() as f64) as usize;
    cg_solve(domain, rhs, rel_tol, cap * 4)
}
