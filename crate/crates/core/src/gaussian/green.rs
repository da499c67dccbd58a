//! Green functions of `-Δ`: the infinite-lattice value from its integral
//! representation, killed versions on boxes, and extrapolation between them.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::Serialize;

use super::domain::Domain;
use super::solver::cg_solve_default;
use crate::error::{Error, Result};
use crate::lattice::{add, build_box, Site};

/// `e^{-x} I_n(x)` for integer order `n ≥ 0` and `x ≥ 0`.
pub fn scaled_bessel_i(n: u32, x: f64) -> f64 {
    let nf = n as f64;
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x > 60.0 && x > 2.0 * nf * nf {
        // Hankel expansion; terms shrink quickly in this range
        let mu = 4.0 * nf * nf;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..40 {
            let kk = (2 * k - 1) as f64;
            term *= -(mu - kk * kk) / (k as f64 * 8.0 * x);
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        return sum / (2.0 * std::f64::consts::PI * x).sqrt();
    }
    // (1/π) ∫_0^π e^{x(cos θ - 1)} cos(nθ) dθ with the periodic trapezoid rule
    let m = (6.0 * x.sqrt() + nf + 40.0).ceil() as usize;
    let h = std::f64::consts::PI / m as f64;
    let f = |th: f64| (x * (th.cos() - 1.0)).exp() * (nf * th).cos();
    let mut s = 0.5 * (f(0.0) + f(std::f64::consts::PI));
    for k in 1..m {
        s += f(k as f64 * h);
    }
    s / m as f64
}

fn legendre(n: usize) -> GaussLegendre {
    GaussLegendre::new(NonZeroUsize::new(n).unwrap())
}

/// `G(0, x) = ∫_0^∞ Π_i e^{-2t} I_{x_i}(2t) dt`, the Green function of the
/// continuous-time walk with unit rate per direction, i.e. of `Q = -Δ`.
/// Requires `d ≥ 3`.
pub fn lattice_green(d: usize, x: &[i64]) -> f64 {
    assert!(d >= 3 && x.len() == d, "lattice_green needs d >= 3");
    let orders: Vec<u32> = x.iter().map(|v| v.unsigned_abs() as u32).collect();
    let f = |t: f64| {
        orders
            .iter()
            .map(|&n| scaled_bessel_i(n, 2.0 * t))
            .product::<f64>()
    };
    let r2: f64 = x.iter().map(|v| (*v as f64).powi(2)).sum();
    let t_max = 64f64.max(4.0 * r2);
    let gl = legendre(40);
    let mut total = gl.integrate(0.0, 0.5, &f);
    let mut a = 0.5;
    while a < t_max {
        let b = 2.0 * a;
        total += gl.integrate(a, b, &f);
        a = b;
    }
    // tail: t = a / s²
    let tail = legendre(80).integrate(0.0, 1.0, |s| {
        if s == 0.0 {
            return 0.0;
        }
        let t = a / (s * s);
        f(t) * 2.0 * a / (s * s * s)
    });
    total + tail
}

/// `σ_d² = G(0, 0)`.
pub fn sigma2(d: usize) -> f64 {
    lattice_green(d, &vec![0; d])
}

/// Killed Green function `G_N(c, c + offset)` on `Λ_N = ⟦0, N⟧^d` with
/// `c` the (rounded-down) center.
pub fn killed_green_center(d: usize, n: i64, offset: &[i64]) -> Result<f64> {
    let b = build_box(n, d)?;
    let dom = Domain::box_interior(&b)?;
    let c = b.center();
    let target: Site = add(&c, offset);
    let kc = dom
        .index_of(&c)
        .ok_or_else(|| Error::NotInterior(c.clone()))?;
    let kt = dom.index_of(&target).ok_or(Error::NotInterior(target))?;
    let mut e = vec![0.0; dom.len()];
    e[kc] = 1.0;
    let g = cg_solve_default(&dom, &e, 1e-13)?;
    Ok(g[kt])
}

/// Richardson extrapolation of a sequence computed at sizes growing by `ratio`,
/// with error terms `N^{-p}, N^{-p-1}, ...`. Returns the extrapolant and the
/// difference between the last two orders as an error estimate.
pub fn richardson(values: &[f64], first_exponent: f64, ratio: f64) -> (f64, f64) {
    let mut table = values.to_vec();
    let mut prev_best = *values.last().unwrap();
    let mut best = prev_best;
    for k in 0..values.len().saturating_sub(1) {
        let f = ratio.powf(first_exponent + k as f64);
        let next: Vec<f64> = table
            .windows(2)
            .map(|w| (f * w[1] - w[0]) / (f - 1.0))
            .collect();
        prev_best = best;
        best = *next.last().unwrap();
        table = next;
    }
    (best, (best - prev_best).abs())
}

#[derive(Clone, Debug, Serialize)]
pub struct GreenEstimate {
    pub value: f64,
    pub error: f64,
    pub sizes: Vec<i64>,
    pub raw: Vec<f64>,
}

/// `G(0, x)` from box solves at `N = 8, 16, …` extrapolated in `N^{2-d}`.
pub fn infinite_volume_green(d: usize, x: &[i64], tol: f64, max_n: i64) -> Result<GreenEstimate> {
    if d < 3 {
        return Err(Error::InvalidArgument(
            "infinite-volume Green function needs d >= 3".into(),
        ));
    }
    let reach = x.iter().map(|v| v.abs()).max().unwrap_or(0);
    let mut n = 8;
    while n / 2 <= 2 * reach + 1 {
        n *= 2;
    }
    let mut sizes = Vec::new();
    let mut raw = Vec::new();
    let mut best = (f64::NAN, f64::INFINITY);
    while n <= max_n {
        raw.push(killed_green_center(d, n, x)?);
        sizes.push(n);
        if raw.len() >= 3 {
            best = richardson(&raw, d as f64 - 2.0, 2.0);
            if best.1 <= tol {
                return Ok(GreenEstimate {
                    value: best.0,
                    error: best.1,
                    sizes,
                    raw,
                });
            }
        }
        n *= 2;
    }
    Err(Error::Accuracy {
        requested: tol,
        achieved: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_branches_agree() {
        for n in 0..4u32 {
            let x = 2.0 * (n * n) as f64 + 61.0;
            let asym = scaled_bessel_i(n, x);
            let m = (6.0 * x.sqrt() + n as f64 + 40.0).ceil() as usize;
            let h = std::f64::consts::PI / m as f64;
            let f = |th: f64| (x * (th.cos() - 1.0)).exp() * (n as f64 * th).cos();
            let mut s = 0.5 * (f(0.0) + f(std::f64::consts::PI));
            for k in 1..m {
                s += f(k as f64 * h);
            }
            let trap = s / m as f64;
            assert!(
                (asym - trap).abs() < 1e-14 * trap,
                "n={n}: {asym} vs {trap}"
            );
        }
        assert!((scaled_bessel_i(0, 1.0) - 1.2660658777520082 * (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn watson_value() {
        // Watson's integral for the simple cubic lattice divided by 2d
        let w = 1.516_386_059_151_978;
        assert!((sigma2(3) - w / 6.0).abs() < 1e-12, "{}", sigma2(3));
    }

    #[test]
    fn oracle_is_harmonic_off_origin() {
        let x = [2i64, 1, 0];
        let mut s = 0.0;
        for i in 0..3 {
            for st in [-1, 1] {
                let mut y = x;
                y[i] += st;
                s += lattice_green(3, &y);
            }
        }
        assert!((6.0 * lattice_green(3, &x) - s).abs() < 1e-12);
        let mut s0 = 0.0;
        for i in 0..3 {
            let mut y = [0i64; 3];
            y[i] = 1;
            s0 += 2.0 * lattice_green(3, &y);
        }
        assert!((6.0 * sigma2(3) - s0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn richardson_removes_known_terms() {
        let vals: Vec<f64> = [8.0f64, 16.0, 32.0]
            .iter()
            .map(|n| 2.0 - 3.0 / n + 5.0 / (n * n))
            .collect();
        let (v, _) = richardson(&vals, 1.0, 2.0);
        assert!((v - 2.0).abs() < 1e-12);
    }
}
