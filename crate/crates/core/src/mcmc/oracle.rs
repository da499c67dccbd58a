use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::chain::PinningModel;
use crate::error::{invalid, Error, Result};
use crate::gaussian::CovarianceSolver;
use crate::scalar::{gaussian_tail, normal_interval, std_normal_pdf};

/// Largest interior volume handled by [`exact_partition`].
pub const ORACLE_MAX_VOLUME: usize = 4;

/// Standard-normal mass beyond this many deviations is dropped (< 3e-19).
const Z_CUT: f64 = 9.0;

#[derive(Clone, Debug, Serialize)]
pub struct ExactSolution {
    pub log_z: f64,
    /// `P(δ_x = 1)` under the pinning measure, in domain order.
    pub contact: Vec<f64>,
    /// Free-field probability of each contact pattern; bit `k` set means
    /// site `k` is in the window.
    pub patterns: Vec<f64>,
    /// Largest change of any pattern probability under the last refinement.
    pub accuracy: f64,
}

/// `Z = Σ_S e^{Σ_{x∈S} a_x} P(pattern S)` for at most four sites. Pattern
/// probabilities come from the Cholesky factorisation `ψ = μ + L z`: nested
/// composite Gauss–Legendre over `z_1, …, z_{n-1}` and the last coordinate in
/// closed form. Panels are halved until the pattern vector moves by less than
/// `1e-10`.
pub fn exact_partition(model: &PinningModel) -> Result<ExactSolution> {
    let n = model.volume();
    if n > ORACLE_MAX_VOLUME {
        return invalid(format!(
            "exact partition function needs volume <= {ORACLE_MAX_VOLUME}, got {n}"
        ));
    }
    let solver = CovarianceSolver::new(model.domain().clone())?;
    let mut cov = vec![vec![0.0; n]; n];
    for (k, row) in cov.iter_mut().enumerate() {
        let col = solver.green_column(model.domain().site(k))?;
        row.copy_from_slice(&col);
    }
    let chol = cholesky(&cov)?;
    // constant exterior data has a constant harmonic extension
    let mean = model.exterior() - model.center();
    let mut width = 1.0;
    let mut patterns = pattern_probabilities(&chol, mean, width);
    let mut accuracy = f64::INFINITY;
    for _ in 0..4 {
        width *= 0.5;
        let finer = pattern_probabilities(&chol, mean, width);
        accuracy = patterns
            .iter()
            .zip(&finer)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        patterns = finer;
        if accuracy < 1e-10 {
            break;
        }
    }
    if accuracy > 1e-8 {
        return Err(Error::Accuracy {
            requested: 1e-8,
            achieved: accuracy,
        });
    }
    let a = model.log_weights();
    let log_terms: Vec<f64> = patterns
        .iter()
        .enumerate()
        .map(|(s, &p)| {
            let w: f64 = (0..n).filter(|k| s >> k & 1 == 1).map(|k| a[k]).sum();
            if p > 0.0 {
                w + p.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let top = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let rel: Vec<f64> = log_terms.iter().map(|t| (t - top).exp()).collect();
    let sum: f64 = rel.iter().sum();
    let contact = (0..n)
        .map(|k| {
            rel.iter()
                .enumerate()
                .filter(|(s, _)| s >> k & 1 == 1)
                .map(|(_, r)| r)
                .sum::<f64>()
                / sum
        })
        .collect();
    Ok(ExactSolution {
        log_z: top + sum.ln(),
        contact,
        patterns,
        accuracy,
    })
}

fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 0.0 {
                    return Err(Error::Factorization("covariance not positive definite".into()));
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Ok(l)
}

/// The three pieces of the real line: below, inside and above `[-1, 1]`.
const PIECES: [(f64, f64, bool); 3] = [
    (f64::NEG_INFINITY, -1.0, false),
    (-1.0, 1.0, true),
    (1.0, f64::INFINITY, false),
];

fn pattern_probabilities(chol: &[Vec<f64>], mean: f64, width: f64) -> Vec<f64> {
    let n = chol.len();
    let rule = GaussLegendre::new(NonZeroUsize::new(8).unwrap());
    let nodes: Vec<(f64, f64)> = rule.iter().map(|(x, w)| (*x, *w)).collect();
    let mut out = vec![0.0; 1 << n];
    let mut z = vec![0.0; n];
    recurse(chol, mean, width, &nodes, 0, &mut z, 1.0, 0, &mut out);
    out
}

/// Integrates coordinate `k` given `z[..k]`, adding `weight · P(rest)` into
/// `out` at pattern `bits`.
#[allow(clippy::too_many_arguments)]
fn recurse(
    chol: &[Vec<f64>],
    mean: f64,
    width: f64,
    nodes: &[(f64, f64)],
    k: usize,
    z: &mut [f64],
    weight: f64,
    bits: usize,
    out: &mut [f64],
) {
    let n = chol.len();
    let shift: f64 = mean + (0..k).map(|j| chol[k][j] * z[j]).sum::<f64>();
    let scale = chol[k][k];
    for (lo, hi, inside) in PIECES {
        let a = (lo - shift) / scale;
        let b = (hi - shift) / scale;
        let bits = if inside { bits | 1 << k } else { bits };
        if k + 1 == n {
            out[bits] += weight * normal_interval(a, b);
            continue;
        }
        let (a, b) = (a.max(-Z_CUT), b.min(Z_CUT));
        if a >= b {
            continue;
        }
        let panels = ((b - a) / width).ceil().max(1.0) as usize;
        let step = (b - a) / panels as f64;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * step;
            for &(x, w) in nodes {
                let t = mid + 0.5 * step * x;
                z[k] = t;
                let wt = weight * 0.5 * step * w * std_normal_pdf(t);
                recurse(chol, mean, width, nodes, k + 1, z, wt, bits, out);
            }
        }
    }
}

/// Stationary law of a single site with conditional law `N(m, sd²)` and
/// weight `e^a` on `[-1, 1]` (window coordinates).
#[derive(Clone, Copy, Debug)]
pub struct OneSiteLaw {
    pub mean: f64,
    pub sd: f64,
    pub log_weight: f64,
}

impl OneSiteLaw {
    fn pieces(&self) -> [f64; 3] {
        let lo = (-1.0 - self.mean) / self.sd;
        let hi = (1.0 - self.mean) / self.sd;
        [gaussian_tail(-lo), self.log_weight.exp() * normal_interval(lo, hi), gaussian_tail(hi)]
    }

    pub fn contact_probability(&self) -> f64 {
        let [b, i, a] = self.pieces();
        i / (b + i + a)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let [b, i, a] = self.pieces();
        let w = self.log_weight.exp();
        let t = (x - self.mean) / self.sd;
        let lo = (-1.0 - self.mean) / self.sd;
        let hi = (1.0 - self.mean) / self.sd;
        let mass = if x < -1.0 {
            gaussian_tail(-t)
        } else if x <= 1.0 {
            b + w * normal_interval(lo, t)
        } else {
            b + i + normal_interval(hi, t)
        };
        mass / (b + i + a)
    }

    /// Independent exact draws by rejection from `N(m, sd²)`, a scheme
    /// unrelated to the heat-bath update.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let w = self.log_weight.exp();
        let (accept_in, accept_out) = if w >= 1.0 { (1.0, 1.0 / w) } else { (w, 1.0) };
        loop {
            let z: f64 = rng.sample(StandardNormal);
            let x = self.mean + self.sd * z;
            let p = if x.abs() <= 1.0 { accept_in } else { accept_out };
            if rng.random::<f64>() < p {
                return x;
            }
        }
    }
}

/// `sup |F_n - F|` for a sorted sample.
pub fn ks_one_sample(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// `sup |F_n - G_m|` for two sorted samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic critical value of the two-sample statistic at level `alpha`:
/// `c(α) √((n+m)/(nm))` with `c(α) = √(-ln(α/2)/2)`.
pub fn ks_critical(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::Domain;
    use crate::lattice::BoxRegion;
    use std::sync::Arc;

    fn line(len: i64) -> Arc<Domain> {
        Arc::new(Domain::from_sites(3, (0..len).map(|i| vec![i, 0, 0]).collect()).unwrap())
    }

    #[test]
    fn one_site_closed_form() {
        let dom = Arc::new(Domain::box_interior(&BoxRegion::cube(&[0, 0, 0], 2).unwrap()).unwrap());
        let q = normal_interval(-6f64.sqrt(), 6f64.sqrt());
        for a in [-1.0, 0.0, 0.7] {
            let m = PinningModel::homogeneous(dom.clone(), 0.0, 0.0, a).unwrap();
            let e = exact_partition(&m).unwrap();
            let z = (1.0 - q) + q * f64::exp(a);
            assert!((e.log_z - z.ln()).abs() < 1e-12);
            let law = OneSiteLaw { mean: 0.0, sd: 6f64.sqrt().recip(), log_weight: a };
            assert!((e.contact[0] - law.contact_probability()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weights_give_unit_partition_function() {
        for len in 1..=4 {
            let m = PinningModel::homogeneous(line(len), 0.3, 0.0, 0.0).unwrap();
            let e = exact_partition(&m).unwrap();
            assert!(e.log_z.abs() < 1e-9, "{len}: {}", e.log_z);
            assert!(e.accuracy < 1e-8);
        }
    }

    #[test]
    fn very_negative_reward_leaves_no_contacts() {
        let m = PinningModel::homogeneous(line(2), 0.0, 0.0, -60.0).unwrap();
        let e = exact_partition(&m).unwrap();
        assert!((e.log_z - e.patterns[0].ln()).abs() < 1e-12);
        assert!(e.contact.iter().all(|c| *c < 1e-20));
    }

    #[test]
    fn independent_sites_factorise() {
        // two sites that are not neighbours are independent
        let dom = Arc::new(Domain::from_sites(3, vec![vec![0, 0, 0], vec![5, 0, 0]]).unwrap());
        let m = PinningModel::new(dom, 0.0, 0.4, vec![0.5, -0.2]).unwrap();
        let e = exact_partition(&m).unwrap();
        let sd = 6f64.sqrt().recip();
        let z1 = OneSiteLaw { mean: -0.4, sd, log_weight: 0.5 };
        let z2 = OneSiteLaw { mean: -0.4, sd, log_weight: -0.2 };
        assert!((e.contact[0] - z1.contact_probability()).abs() < 1e-10);
        assert!((e.contact[1] - z2.contact_probability()).abs() < 1e-10);
    }

    #[test]
    fn volume_above_four_is_rejected() {
        let m = PinningModel::homogeneous(line(5), 0.0, 0.0, 0.0).unwrap();
        assert!(exact_partition(&m).is_err());
    }

    #[test]
    fn ks_helpers() {
        assert!((ks_critical(1e-3, 1, usize::MAX / 4) - 1.9495).abs() < 1e-4);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        let law = OneSiteLaw { mean: 0.2, sd: 0.4, log_weight: 1.3 };
        assert!(law.cdf(-10.0) < 1e-40 && (law.cdf(10.0) - 1.0).abs() < 1e-15);
        // the density jumps at the window edges but the cdf does not
        for e in [-1.0, 1.0] {
            assert!((law.cdf(e - 1e-12) - law.cdf(e + 1e-12)).abs() < 1e-10);
        }
    }
}
