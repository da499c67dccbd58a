use serde::Serialize;

use super::laws::DisorderLaw;
use super::tails::{normal_interval, window_probability};
use crate::error::{invalid, Error, Result};

/// `χ(β) = 1 / (2 (e^{λ(2β) - 2λ(β)} - 1))`.
pub fn chi(law: &DisorderLaw, beta: f64) -> Result<f64> {
    if beta <= 0.0 {
        return invalid("χ(β) needs β > 0");
    }
    Ok(0.5 / (law.log_mgf(2.0 * beta) - 2.0 * law.log_mgf(beta)).exp_m1())
}

/// `1 / (2 Var(e^{βω - λ(β)}))` by quadrature; agrees with [`chi`].
pub fn chi_by_variance(law: &DisorderLaw, beta: f64) -> Result<f64> {
    if beta <= 0.0 {
        return invalid("χ(β) needs β > 0");
    }
    let lam = law.log_mgf(beta);
    let var = law.expect(|w| (beta * w - lam).exp_m1().powi(2));
    Ok(0.5 / var)
}

/// `ξ = e^{βω - λ(β) + h} - 1`.
pub fn xi(law: &DisorderLaw, beta: f64, h: f64, omega: f64) -> f64 {
    (beta * omega - law.log_mgf(beta) + h).exp_m1()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct OptimalDensity {
    pub p_star: f64,
    pub value: f64,
}

/// Maximizes `p ↦ E log(1 + p ξ)` over `[0, 1]`.
pub fn optimal_density(law: &DisorderLaw, beta: f64, h: f64) -> Result<OptimalDensity> {
    if beta <= 0.0 {
        return invalid("optimal density needs β > 0");
    }
    let lam = law.log_mgf(beta);
    let slope = |p: f64| {
        law.expect(|w| {
            let x = (beta * w - lam + h).exp_m1();
            x / (1.0 + p * x)
        })
    };
    let objective = |p: f64| law.expect(|w| (p * (beta * w - lam + h).exp_m1()).ln_1p());
    if h.exp_m1() <= 0.0 {
        return Ok(OptimalDensity {
            p_star: 0.0,
            value: 0.0,
        });
    }
    // E[ξ/(1+ξ)] at p = 1; for p = 1 the objective is E[βω - λ + h]
    let at_one = law.expect(|w| -(-(beta * w - lam + h)).exp_m1());
    if at_one >= 0.0 {
        return Ok(OptimalDensity {
            p_star: 1.0,
            value: h - lam,
        });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = 0.5 * (lo + hi);
    Ok(OptimalDensity {
        p_star: p,
        value: objective(p),
    })
}

/// `E[ξ/(1+pξ)]` and `E[1/(1+pξ)]`; at an interior maximizer these are `0` and `1`.
pub fn first_order_conditions(law: &DisorderLaw, beta: f64, h: f64, p: f64) -> (f64, f64) {
    let lam = law.log_mgf(beta);
    let a = law.expect(|w| {
        let x = (beta * w - lam + h).exp_m1();
        x / (1.0 + p * x)
    });
    let b = law.expect(|w| 1.0 / (1.0 + p * (beta * w - lam + h).exp_m1()));
    (a, b)
}

/// Root `u > 0` of `P(σ𝒩 ∈ [u-1, u+1]) = 2hχ(β)`, with `σ² = sigma2`.
pub fn shift_height(sigma2: f64, law: &DisorderLaw, beta: f64, h: f64) -> Result<f64> {
    let target = 2.0 * h * chi(law, beta)?;
    shift_height_for_target(sigma2, target)
}

/// Root `u > 0` of `P(σ𝒩 ∈ [u-1, u+1]) = target`.
pub fn shift_height_for_target(sigma2: f64, target: f64) -> Result<f64> {
    let sigma = sigma2.sqrt();
    let threshold = window_probability(sigma, 0.0);
    if !(target > 0.0) || target >= threshold {
        return Err(Error::NoSolution { target, threshold });
    }
    let mut lo = 0.0;
    let mut hi = 1.0 + 40.0 * sigma;
    while window_probability(sigma, hi) > target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < 1e-13 {
            break;
        }
        if window_probability(sigma, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Asymptotic expansion `u(a, h)` of the shift height.
pub fn shift_height_expansion(sigma2: f64, a: f64, h: f64) -> f64 {
    let sigma = sigma2.sqrt();
    let l = (1.0 / h).ln();
    let r = (2.0 * l).sqrt();
    sigma * r + 1.0
        - 0.5 * sigma * l.ln() / r
        - sigma * (2.0 * a * std::f64::consts::PI.sqrt()).ln() / r
}

/// `P(σ𝒩 ∈ [u-1, u-1+r])`, the mass of a thin slice at the window's lower edge.
pub fn lower_edge_mass(sigma2: f64, u: f64, r: f64) -> f64 {
    let sigma = sigma2.sqrt();
    normal_interval((u - 1.0) / sigma, (u - 1.0 + r) / sigma)
}

/// Smallest `K ≥ √(log 1/h)` with `E[|ω|; |ω| > K] ≤ h³`.
pub fn disorder_cutoff(law: &DisorderLaw, h: f64) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return invalid("cut-off needs h in (0, 1)");
    }
    let k0 = (1.0 / h).ln().sqrt();
    let eps = h.powi(3);
    if law.tail_abs_mean(k0) <= eps {
        return Ok(k0);
    }
    if let Some(b) = law.bound() {
        return Ok(b.max(k0));
    }
    let mut hi = k0 + 1.0;
    while law.tail_abs_mean(hi) > eps {
        hi *= 2.0;
    }
    let mut lo = k0;
    for _ in 0..200 {
        if hi - lo < 1e-13 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if law.tail_abs_mean(mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FractionalMoment {
    pub p: f64,
    pub value: f64,
}

/// `(1/θ) max_{p∈[0,1]} log E[(1 + pξ)^θ]`.
pub fn fractional_moment_value(
    law: &DisorderLaw,
    beta: f64,
    h: f64,
    theta: f64,
) -> Result<FractionalMoment> {
    if !(theta > 0.0 && theta < 1.0) {
        return invalid("θ must lie in (0, 1)");
    }
    let lam = law.log_mgf(beta);
    let moment = |p: f64| law.expect(|w| (1.0 + p * (beta * w - lam + h).exp_m1()).powf(theta));
    let derivative = |p: f64| {
        law.expect(|w| {
            let x = (beta * w - lam + h).exp_m1();
            x * (1.0 + p * x).powf(theta - 1.0)
        })
    };
    let p = if derivative(0.0) <= 0.0 {
        0.0
    } else if derivative(1.0) >= 0.0 {
        1.0
    } else {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if derivative(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    Ok(FractionalMoment {
        p,
        value: moment(p).ln() / theta,
    })
}

/// Derived scalar parameters for one `(β, h)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PinningParams {
    pub beta: f64,
    pub h: f64,
    pub lambda_beta: f64,
    pub chi: f64,
    pub p_star: f64,
    pub u_h: Option<f64>,
    pub cutoff: Option<f64>,
}

impl PinningParams {
    pub fn derive(law: &DisorderLaw, sigma2: f64, beta: f64, h: f64) -> Result<Self> {
        let chi = chi(law, beta)?;
        let p_star = optimal_density(law, beta, h)?.p_star;
        let u_h = if h > 0.0 {
            shift_height(sigma2, law, beta, h).ok()
        } else {
            None
        };
        let cutoff = if h > 0.0 && h < 1.0 {
            Some(disorder_cutoff(law, h)?)
        } else {
            None
        };
        Ok(Self {
            beta,
            h,
            lambda_beta: law.log_mgf(beta),
            chi,
            p_star,
            u_h,
            cutoff,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::sigma2;

    const LAWS: [DisorderLaw; 3] = [
        DisorderLaw::Normal,
        DisorderLaw::Rademacher,
        DisorderLaw::Uniform { half_width: 1.5 },
    ];

    #[test]
    fn chi_values() {
        let n = chi(&DisorderLaw::Normal, 1.0).unwrap();
        assert!((n - 0.5 / (std::f64::consts::E - 1.0)).abs() < 1e-15);
        assert!((n - 0.290988).abs() < 1e-6);
        let r = chi(&DisorderLaw::Rademacher, 1.0).unwrap();
        let direct = 0.5 / ((2f64).cosh() / 1f64.cosh().powi(2) - 1.0);
        assert!((r - direct).abs() < 1e-14);
        assert!((r - 0.86206).abs() < 1e-4);
        assert!(chi(&DisorderLaw::Normal, 0.0).is_err());
    }

    #[test]
    fn chi_forms_agree() {
        for law in LAWS {
            for beta in [0.3, 0.5, 1.0, 1.5] {
                let a = chi(&law, beta).unwrap();
                let b = chi_by_variance(&law, beta).unwrap();
                assert!(
                    (a - b).abs() <= 1e-12 * a.max(1.0),
                    "{law:?} β={beta}: {a} {b}"
                );
            }
        }
    }

    #[test]
    fn chi_small_beta() {
        let vals: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|b| chi(&DisorderLaw::Normal, *b).unwrap() * b * b)
            .collect();
        for w in vals.windows(2) {
            assert!((w[1] - 0.5).abs() < (w[0] - 0.5).abs());
        }
        assert!((vals[2] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn zero_field_gives_zero_density() {
        let o = optimal_density(&DisorderLaw::Normal, 1.0, 0.0).unwrap();
        assert_eq!(o.p_star, 0.0);
        assert_eq!(o.value, 0.0);
    }

    #[test]
    fn first_order_conditions_hold() {
        for law in LAWS {
            for h in [1e-3, 0.05, 0.2] {
                let o = optimal_density(&law, 1.0, h).unwrap();
                assert!(o.p_star > 0.0 && o.p_star < 1.0);
                let (a, b) = first_order_conditions(&law, 1.0, h, o.p_star);
                assert!(
                    a.abs() < 1e-9 && (b - 1.0).abs() < 1e-9,
                    "{law:?} h={h}: {a} {b}"
                );
            }
        }
    }

    #[test]
    fn large_field_saturates() {
        let o = optimal_density(&DisorderLaw::Rademacher, 0.5, 5.0).unwrap();
        assert_eq!(o.p_star, 1.0);
    }

    #[test]
    fn objective_is_concave() {
        let law = DisorderLaw::Normal;
        let lam = law.log_mgf(1.0);
        let f = |p: f64| law.expect(|w| (p * (w - lam + 0.1).exp_m1()).ln_1p());
        let step = 0.02;
        for i in 1..49 {
            let p = i as f64 * step;
            assert!(f(p + step) - 2.0 * f(p) + f(p - step) <= 1e-13);
        }
    }

    #[test]
    fn cutoff_values() {
        let k = disorder_cutoff(&DisorderLaw::Normal, 0.1).unwrap();
        assert!((k - 3.656).abs() < 1e-3, "{k}");
        let r = disorder_cutoff(&DisorderLaw::Rademacher, 0.1).unwrap();
        assert_eq!(r, (10f64).ln().sqrt());
    }

    #[test]
    fn shift_height_is_decreasing_and_matches_expansion() {
        let s2 = sigma2(3);
        let law = DisorderLaw::Normal;
        let mut prev = 0.0;
        for h in [0.2, 0.1, 0.05, 0.01, 1e-3] {
            let u = shift_height(s2, &law, 1.0, h).unwrap();
            assert!(u > prev);
            prev = u;
        }
        let a = 2.0 * chi(&law, 1.0).unwrap();
        let gaps: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&h| {
                let u = shift_height(s2, &law, 1.0, h).unwrap();
                (u - shift_height_expansion(s2, a, h)).abs() * (1.0 / h).ln().sqrt()
            })
            .collect();
        assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "{gaps:?}");
        assert!(matches!(
            shift_height(s2, &law, 1.0, 5.0),
            Err(Error::NoSolution { .. })
        ));
    }

    #[test]
    fn shift_height_near_threshold_goes_to_zero() {
        let s2 = sigma2(3);
        let thr = window_probability(s2.sqrt(), 0.0);
        let u = shift_height_for_target(s2, thr * (1.0 - 1e-9)).unwrap();
        assert!(u < 1e-3, "{u}");
    }
}
