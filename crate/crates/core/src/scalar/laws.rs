use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::{GaussHermite, GaussLegendre};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::tails::std_normal_pdf;

/// Law of the IID disorder variables `ω_x`. All laws are centered.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DisorderLaw {
    Normal,
    Rademacher,
    /// Uniform on `[-half_width, half_width]`.
    Uniform {
        half_width: f64,
    },
}

const QUAD_TOL: f64 = 1e-12;

fn hermite(order: usize) -> &'static [(f64, f64)] {
    static RULES: [OnceLock<Vec<(f64, f64)>>; 3] =
        [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let slot = match order {
        32 => 0,
        48 => 1,
        _ => 2,
    };
    RULES[slot].get_or_init(|| {
        let rule = GaussHermite::new(NonZeroUsize::new(order).unwrap());
        let norm = std::f64::consts::PI.sqrt();
        rule.iter()
            .map(|(x, w)| (x * std::f64::consts::SQRT_2, w / norm))
            .collect()
    })
}

fn legendre(order: usize) -> &'static [(f64, f64)] {
    static RULES: [OnceLock<Vec<(f64, f64)>>; 4] = [
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
    ];
    let slot = match order {
        16 => 0,
        32 => 1,
        64 => 2,
        _ => 3,
    };
    RULES[slot].get_or_init(|| {
        let rule = GaussLegendre::new(NonZeroUsize::new(order).unwrap());
        rule.iter().map(|(x, w)| (*x, *w)).collect()
    })
}

/// Adaptive-order rule: raises the order until two successive values agree
/// to `QUAD_TOL` relative to `E|f|`.
fn adaptive(orders: &[usize], eval: impl Fn(usize) -> (f64, f64)) -> Option<f64> {
    let (mut prev, _) = eval(orders[0]);
    for &o in &orders[1..] {
        let (cur, scale) = eval(o);
        if (cur - prev).abs() <= QUAD_TOL * scale.max(f64::MIN_POSITIVE) {
            return Some(cur);
        }
        prev = cur;
    }
    None
}

/// Composite 16-point Gauss–Legendre on `[-a, a]` against the normal density.
/// Hermite rules from the quadrature crate lose accuracy past ~80 nodes, so
/// strongly tilted integrands land here instead.
fn normal_panels(f: &impl Fn(f64) -> f64) -> f64 {
    const HALF: f64 = 40.0;
    let rule = legendre(16);
    let eval = |panels: usize| {
        let width = 2.0 * HALF / panels as f64;
        let (mut s, mut a) = (0.0, 0.0);
        for k in 0..panels {
            let mid = -HALF + (k as f64 + 0.5) * width;
            for &(x, w) in rule {
                let t = mid + 0.5 * width * x;
                let v = f(t) * std_normal_pdf(t);
                s += 0.5 * width * w * v;
                a += 0.5 * width * w * v.abs();
            }
        }
        (s, a)
    };
    let mut panels = 64;
    let (mut prev, _) = eval(panels);
    while panels < 8192 {
        panels *= 2;
        let (cur, scale) = eval(panels);
        if (cur - prev).abs() <= QUAD_TOL * scale.max(f64::MIN_POSITIVE) {
            return cur;
        }
        prev = cur;
    }
    prev
}

impl DisorderLaw {
    pub fn name(&self) -> String {
        match self {
            DisorderLaw::Normal => "normal".into(),
            DisorderLaw::Rademacher => "rademacher".into(),
            DisorderLaw::Uniform { half_width } => format!("uniform({half_width})"),
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if let DisorderLaw::Uniform { half_width } = self {
            if !(half_width.is_finite() && *half_width > 0.0) {
                return Err(crate::Error::InvalidArgument(format!(
                    "uniform half width {half_width} must be positive"
                )));
            }
        }
        Ok(())
    }

    /// `λ(s) = log E[e^{sω}]`.
    pub fn log_mgf(&self, s: f64) -> f64 {
        match *self {
            DisorderLaw::Normal => 0.5 * s * s,
            DisorderLaw::Rademacher => {
                let a = s.abs();
                a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
            }
            DisorderLaw::Uniform { half_width } => {
                let a = (half_width * s).abs();
                if a < 1e-4 {
                    a * a / 6.0 - a.powi(4) / 180.0
                } else {
                    a + (-(-2.0 * a).exp()).ln_1p() - std::f64::consts::LN_2 - a.ln()
                }
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            DisorderLaw::Normal | DisorderLaw::Rademacher => 1.0,
            DisorderLaw::Uniform { half_width } => half_width * half_width / 3.0,
        }
    }

    /// Largest value of `|ω|`, if bounded.
    pub fn bound(&self) -> Option<f64> {
        match *self {
            DisorderLaw::Normal => None,
            DisorderLaw::Rademacher => Some(1.0),
            DisorderLaw::Uniform { half_width } => Some(half_width),
        }
    }

    /// `E[f(ω)]`: exact for Rademacher, adaptive Gauss–Hermite (with a
    /// composite fallback) for the normal law and adaptive Gauss–Legendre for
    /// the uniform law.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        match *self {
            DisorderLaw::Rademacher => 0.5 * (f(1.0) + f(-1.0)),
            DisorderLaw::Normal => adaptive(&[32, 48, 64], |o| {
                let mut s = 0.0;
                let mut a = 0.0;
                for &(x, w) in hermite(o) {
                    let v = f(x);
                    s += w * v;
                    a += w * v.abs();
                }
                (s, a)
            })
            .unwrap_or_else(|| normal_panels(&f)),
            DisorderLaw::Uniform { half_width } => {
                let eval = |o: usize| {
                    let mut s = 0.0;
                    let mut a = 0.0;
                    for &(x, w) in legendre(o) {
                        let v = f(half_width * x);
                        s += 0.5 * w * v;
                        a += 0.5 * w * v.abs();
                    }
                    (s, a)
                };
                adaptive(&[32, 64, 128], eval).unwrap_or_else(|| eval(128).0)
            }
        }
    }

    /// `E[|ω|; |ω| > k]`.
    pub fn tail_abs_mean(&self, k: f64) -> f64 {
        match *self {
            DisorderLaw::Normal => 2.0 * std_normal_pdf(k.max(0.0)),
            DisorderLaw::Rademacher => {
                if k < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            DisorderLaw::Uniform { half_width: a } => {
                let k = k.max(0.0);
                if k < a {
                    (a * a - k * k) / (2.0 * a)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DisorderLaw::Normal => rng.sample(StandardNormal),
            DisorderLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            DisorderLaw::Uniform { half_width } => half_width * (2.0 * rng.random::<f64>() - 1.0),
        }
    }
}

/// `ω̄ = ω 1_{|ω| ≤ K}`.
pub fn truncate(omega: f64, k: f64) -> f64 {
    if omega.abs() <= k {
        omega
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAWS: [DisorderLaw; 3] = [
        DisorderLaw::Normal,
        DisorderLaw::Rademacher,
        DisorderLaw::Uniform { half_width: 1.5 },
    ];

    #[test]
    fn closed_forms() {
        assert_eq!(DisorderLaw::Normal.log_mgf(2.0), 2.0);
        assert!((DisorderLaw::Rademacher.log_mgf(1.0) - 1f64.cosh().ln()).abs() < 1e-15);
        assert!((DisorderLaw::Rademacher.log_mgf(1.0) - 0.433781).abs() < 1e-6);
        for law in LAWS {
            assert_eq!(law.log_mgf(0.0), 0.0);
        }
    }

    #[test]
    fn log_mgf_matches_quadrature() {
        for law in LAWS {
            for s in [-1.3, 0.2, 0.7, 2.0] {
                let q = law.expect(|w| (s * w).exp()).ln();
                assert!(
                    (q - law.log_mgf(s)).abs() < 1e-12,
                    "{law:?} s={s}: {q} vs {}",
                    law.log_mgf(s)
                );
            }
        }
    }

    #[test]
    fn moments() {
        for law in LAWS {
            assert!(law.expect(|w| w).abs() < 1e-13);
            assert!((law.expect(|w| w * w) - law.variance()).abs() < 1e-12);
        }
    }

    #[test]
    fn tail_mean_against_midpoint_sums() {
        let k = 0.8;
        let steps = 400_000;
        let h = 20.0 / steps as f64;
        let normal: f64 = (0..steps)
            .map(|i| k + (i as f64 + 0.5) * h)
            .map(|t| 2.0 * t * std_normal_pdf(t) * h)
            .sum();
        assert!((normal - DisorderLaw::Normal.tail_abs_mean(k)).abs() < 1e-9);
        let a = 1.5;
        let h = (a - k) / steps as f64;
        let uniform: f64 = (0..steps)
            .map(|i| k + (i as f64 + 0.5) * h)
            .map(|t| t / a * h)
            .sum();
        assert!((uniform - DisorderLaw::Uniform { half_width: a }.tail_abs_mean(k)).abs() < 1e-9);
        assert_eq!(DisorderLaw::Rademacher.tail_abs_mean(k), 1.0);
    }

    #[test]
    fn strongly_tilted_normal_expectation() {
        let v = DisorderLaw::Normal.expect(|w| (3.0 * w).exp());
        assert!((v / 4.5f64.exp() - 1.0).abs() < 1e-11, "{v}");
        let v = DisorderLaw::Normal.expect(|w| (6.0 * w).exp());
        assert!((v / 18f64.exp() - 1.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn convexity_on_a_grid() {
        for law in LAWS {
            for i in -20..20 {
                let s = i as f64 * 0.15;
                let t = s + 0.6;
                assert!(
                    law.log_mgf(0.5 * (s + t)) <= 0.5 * (law.log_mgf(s) + law.log_mgf(t)) + 1e-15
                );
            }
        }
    }
}
