use std::sync::Arc;

use serde::Serialize;

use super::disorder::DisorderField;
use super::truncnorm::standard_truncated;
use crate::error::{invalid, Result};
use crate::gaussian::{Domain, FieldSample};
use crate::rng::StreamRng;
use crate::scalar::{gaussian_tail, DisorderLaw};

/// The pinning measure on a finite domain:
///
/// `dP ∝ exp(Σ_x a_x δ_x) dP_free`, `δ_x = 1{|φ(x) - u| ≤ 1}`,
///
/// with `P_free` the free field with constant exterior data and `a_x` the
/// per-site log-weight (`βω_x - λ(β) + h` for the quenched model).
#[derive(Clone, Debug)]
pub struct PinningModel {
    domain: Arc<Domain>,
    exterior: f64,
    center: f64,
    log_weights: Vec<f64>,
}

/// Scalar parameters of a quenched model, kept for reporting.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct QuenchedParams {
    pub law: DisorderLaw,
    pub beta: f64,
    pub h: f64,
    pub lambda: f64,
}

impl PinningModel {
    pub fn new(domain: Arc<Domain>, exterior: f64, center: f64, log_weights: Vec<f64>) -> Result<Self> {
        if log_weights.len() != domain.len() {
            return invalid(format!(
                "{} log-weights for {} sites",
                log_weights.len(),
                domain.len()
            ));
        }
        if !exterior.is_finite() || !center.is_finite() {
            return invalid("exterior value and window centre must be finite");
        }
        if log_weights.iter().any(|a| a.is_nan() || *a == f64::INFINITY) {
            return invalid("log-weights must be below +inf");
        }
        Ok(Self {
            domain,
            exterior,
            center,
            log_weights,
        })
    }

    /// `a_x = βω_x - λ(β) + h`.
    pub fn quenched(
        domain: Arc<Domain>,
        exterior: f64,
        center: f64,
        beta: f64,
        h: f64,
        disorder: &DisorderField,
    ) -> Result<(Self, QuenchedParams)> {
        if disorder.len() != domain.len() {
            return invalid("disorder and domain sizes differ");
        }
        let law = disorder.law();
        let lambda = if beta == 0.0 { 0.0 } else { law.log_mgf(beta) };
        let a = disorder.values().iter().map(|w| beta * w - lambda + h).collect();
        let params = QuenchedParams { law, beta, h, lambda };
        Ok((Self::new(domain, exterior, center, a)?, params))
    }

    /// `a_x = h` everywhere.
    pub fn homogeneous(domain: Arc<Domain>, exterior: f64, center: f64, h: f64) -> Result<Self> {
        let n = domain.len();
        Self::new(domain, exterior, center, vec![h; n])
    }

    /// Same model with every log-weight multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            log_weights: self.log_weights.iter().map(|a| s * a).collect(),
            ..self.clone()
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn domain_arc(&self) -> Arc<Domain> {
        self.domain.clone()
    }

    pub fn volume(&self) -> usize {
        self.domain.len()
    }

    pub fn exterior(&self) -> f64 {
        self.exterior
    }

    /// Centre `u` of the contact window.
    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }
}

/// `1{|ψ| ≤ 1}` in window coordinates.
#[inline]
fn in_window(psi: f64) -> bool {
    psi.abs() <= 1.0
}

/// A heat-bath chain for a [`PinningModel`]. The state is stored in window
/// coordinates `ψ = φ - u`, so the window is always `[-1, 1]` and the
/// exterior sits at `b - u`; a shifted window and a shifted boundary give the
/// same internal arithmetic.
pub struct ChainState<'a> {
    model: &'a PinningModel,
    psi: Vec<f64>,
    exterior: f64,
    contact: Vec<bool>,
    contacts: usize,
    sweeps: u64,
    sd: f64,
    rng: StreamRng,
}

impl<'a> ChainState<'a> {
    /// Starts from the constant field `φ ≡ start`.
    pub fn flat(model: &'a PinningModel, start: f64, rng: StreamRng) -> Self {
        let psi = vec![start - model.center; model.volume()];
        Self::from_window_coordinates(model, psi, rng)
    }

    /// Starts from `φ` given in domain order.
    pub fn from_field(model: &'a PinningModel, phi: &[f64], rng: StreamRng) -> Result<Self> {
        if phi.len() != model.volume() {
            return invalid("initial field has the wrong length");
        }
        let psi = phi.iter().map(|p| p - model.center).collect();
        Ok(Self::from_window_coordinates(model, psi, rng))
    }

    fn from_window_coordinates(model: &'a PinningModel, psi: Vec<f64>, rng: StreamRng) -> Self {
        let contact: Vec<bool> = psi.iter().map(|&p| in_window(p)).collect();
        let contacts = contact.iter().filter(|c| **c).count();
        Self {
            model,
            psi,
            exterior: model.exterior - model.center,
            contact,
            contacts,
            sweeps: 0,
            sd: (2.0 * model.domain.dim() as f64).sqrt().recip(),
            rng,
        }
    }

    pub fn model(&self) -> &PinningModel {
        self.model
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    /// `Σ_x δ_x`, maintained incrementally.
    pub fn contact_count(&self) -> usize {
        self.contacts
    }

    /// `Σ_x δ_x` counted from the field.
    pub fn recount(&self) -> usize {
        self.psi.iter().filter(|p| in_window(**p)).count()
    }

    pub fn contacts(&self) -> &[bool] {
        &self.contact
    }

    /// `Σ_x a_x δ_x`.
    pub fn energy(&self) -> f64 {
        self.contact
            .iter()
            .zip(&self.model.log_weights)
            .filter(|(c, _)| **c)
            .map(|(_, a)| a)
            .sum()
    }

    /// Field values in window coordinates.
    pub fn window_coordinates(&self) -> &[f64] {
        &self.psi
    }

    /// `φ(x)` for the site with domain index `k`.
    pub fn phi(&self, k: usize) -> f64 {
        self.psi[k] + self.model.center
    }

    pub fn field(&self) -> FieldSample {
        let values = self.psi.iter().map(|p| p + self.model.center).collect();
        FieldSample::new(self.model.domain.clone(), values, self.model.exterior)
    }

    /// One raster-order pass of single-site heat-bath updates.
    pub fn sweep(&mut self) {
        let dom = &self.model.domain;
        let two_d = 2 * dom.dim();
        let inv = 1.0 / two_d as f64;
        let table = dom.neighbor_table();
        for k in 0..self.psi.len() {
            let mut sum = 0.0;
            for &j in &table[k * two_d..(k + 1) * two_d] {
                sum += if j == crate::gaussian::NONE {
                    self.exterior
                } else {
                    self.psi[j as usize]
                };
            }
            let m = sum * inv;
            let new = self.sample_site(m, self.model.log_weights[k]);
            let now = in_window(new);
            if now != self.contact[k] {
                if now {
                    self.contacts += 1;
                } else {
                    self.contacts -= 1;
                }
                self.contact[k] = now;
            }
            self.psi[k] = new;
        }
        self.sweeps += 1;
    }

    /// Draw from `N(m, sd²)` reweighted by `e^a` on `[-1, 1]`.
    fn sample_site(&mut self, m: f64, a: f64) -> f64 {
        let sd = self.sd;
        let lo = (-1.0 - m) / sd;
        let hi = (1.0 - m) / sd;
        let below = gaussian_tail(-lo);
        let above = gaussian_tail(hi);
        // same cancellation-free split as normal_interval, reusing the tails
        let inside = if lo >= 0.0 {
            gaussian_tail(lo) - above
        } else if hi <= 0.0 {
            gaussian_tail(-hi) - below
        } else {
            1.0 - below - above
        };
        // weights e^a·inside : below : above, scaled so the largest is O(1)
        let (w_in, w_out) = if a > 0.0 {
            (inside, (below + above) * (-a).exp())
        } else {
            (inside * a.exp(), below + above)
        };
        let u: f64 = rand::Rng::random(&mut self.rng);
        let z = if u * (w_in + w_out) < w_in {
            standard_truncated(lo, hi, &mut self.rng)
        } else {
            // below vs above, in proportion to their masses
            let v: f64 = rand::Rng::random(&mut self.rng);
            if v * (below + above) < below {
                standard_truncated(f64::NEG_INFINITY, lo, &mut self.rng)
            } else {
                standard_truncated(hi, f64::INFINITY, &mut self.rng)
            }
        };
        m + sd * z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::CovarianceSolver;
    use crate::lattice::BoxRegion;
    use crate::rng::{stream, Purpose};

    fn box_domain(n: i64) -> Arc<Domain> {
        Arc::new(Domain::box_interior(&BoxRegion::cube(&[0, 0, 0], n).unwrap()).unwrap())
    }

    #[test]
    fn incremental_count_matches_recount() {
        let dom = box_domain(6);
        let law = DisorderLaw::Normal;
        let dis = DisorderField::generate(law, 4, 0, dom.len());
        let (model, _) = PinningModel::quenched(dom, 0.0, 0.0, 1.0, 0.3, &dis).unwrap();
        let mut c = ChainState::flat(&model, 3.0, stream(1, Purpose::Chain, 0, 0));
        assert_eq!(c.contact_count(), 0);
        for _ in 0..300 {
            c.sweep();
            assert_eq!(c.contact_count(), c.recount());
        }
    }

    #[test]
    fn shifted_window_equals_shifted_boundary() {
        let dom = box_domain(5);
        let u = 1.7;
        let shifted = PinningModel::homogeneous(dom.clone(), 0.0, u, 0.4).unwrap();
        let centred = PinningModel::homogeneous(dom, -u, 0.0, 0.4).unwrap();
        let mut a = ChainState::flat(&shifted, u, stream(8, Purpose::Chain, 0, 0));
        let mut b = ChainState::flat(&centred, 0.0, stream(8, Purpose::Chain, 0, 0));
        for _ in 0..50 {
            a.sweep();
            b.sweep();
        }
        let bits = |c: &ChainState| c.window_coordinates().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.contact_count(), b.contact_count());
    }

    #[test]
    fn free_gibbs_sampler_has_the_green_variance() {
        // β = 0, h = 0: plain Gibbs sampling of the free field on Λ_4
        let dom = box_domain(4);
        let model = PinningModel::homogeneous(dom.clone(), 0.0, 0.0, 0.0).unwrap();
        let exact = CovarianceSolver::new((*dom).clone()).unwrap().variance(&[2, 2, 2]).unwrap();
        let k = dom.index_of(&[2, 2, 2]).unwrap();
        let mut c = ChainState::flat(&model, 0.0, stream(5, Purpose::Chain, 0, 0));
        for _ in 0..1000 {
            c.sweep();
        }
        let (batches, len) = (40, 5000);
        let means: Vec<f64> = (0..batches)
            .map(|_| {
                (0..len)
                    .map(|_| {
                        c.sweep();
                        c.phi(k) * c.phi(k)
                    })
                    .sum::<f64>()
                    / len as f64
            })
            .collect();
        let mean = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
        let se = (var / batches as f64).sqrt();
        assert!((mean - exact).abs() < 5.0 * se, "{mean} vs {exact} (se {se})");
    }

    #[test]
    fn overwhelming_reward_pins_everything() {
        let dom = box_domain(6);
        let model = PinningModel::homogeneous(dom.clone(), 0.0, 0.0, 20.0).unwrap();
        let mut c = ChainState::flat(&model, 0.0, stream(6, Purpose::Chain, 0, 0));
        for _ in 0..50 {
            c.sweep();
        }
        assert_eq!(c.contact_count(), dom.len());
    }
}
