use libm::erfc;
use statrs::function::erf::erfc_inv;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `P(𝒩 > x)`.
pub fn gaussian_tail(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 1.0;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `P(𝒩 ≤ x)`.
pub fn normal_cdf(x: f64) -> f64 {
    gaussian_tail(-x)
}

/// Mills-ratio form `e^{-x²/2} / (x √(2π))`.
pub fn gaussian_tail_asymptotic(x: f64) -> f64 {
    std_normal_pdf(x) / x
}

/// Inverse of the upper tail: the `x` with `P(𝒩 > x) = p`, for `p ∈ (0, 1)`.
pub fn inverse_gaussian_tail(p: f64) -> f64 {
    let mut x = std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    // Newton polish; the starting value is only good to about 1e-11
    for _ in 0..3 {
        let pdf = std_normal_pdf(x);
        if pdf == 0.0 {
            break;
        }
        let step = (gaussian_tail(x) - p) / pdf;
        x += step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// `P(a ≤ 𝒩 ≤ b)` evaluated on the side of the origin that avoids cancellation.
pub fn normal_interval(a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    if a >= 0.0 {
        gaussian_tail(a) - gaussian_tail(b)
    } else if b <= 0.0 {
        gaussian_tail(-b) - gaussian_tail(-a)
    } else {
        1.0 - gaussian_tail(-a) - gaussian_tail(b)
    }
}

/// `P(σ𝒩 ∈ [u-1, u+1])`.
pub fn window_probability(sigma: f64, u: f64) -> f64 {
    normal_interval((u - 1.0) / sigma, (u + 1.0) / sigma)
}
