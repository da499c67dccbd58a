use libm::lgamma as ln_gamma;
use serde::Serialize;

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum BinomialSide {
    /// `P(Bin ≤ pΔn) ≤ e^{-np/2}` for `Δ ∈ [0, 1/6]`.
    Lower { delta: f64 },
    /// `P(Bin ≥ pΔn) ≤ e^{-np/2}` for `Δ ≥ 3`.
    Upper { delta: f64 },
    /// `P(Bin ≥ ηn) ≤ p^{ηn/2}` for `p ≤ (1/2)^{2/η}`.
    Eta { eta: f64 },
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundCheck {
    pub exact: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Thresholds like `pΔn` are computed in floating point; `0.1·3·20` must count as 6.
const INTEGER_SLACK: f64 = 1e-9;

fn ln_pmf(n: u64, p: f64, k: u64) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    let ln_choose = ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0);
    let a = if k == 0 { 0.0 } else { kf * p.ln() };
    let b = if k == n {
        0.0
    } else {
        (nf - kf) * (-p).ln_1p()
    };
    ln_choose + a + b
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `P(Bin(n,p) ≤ k)` (real `k`, so `⌊k⌋` is the last included value).
pub fn binomial_cdf(n: u64, p: f64, k: f64) -> f64 {
    if k < 0.0 {
        return 0.0;
    }
    let top = ((k + INTEGER_SLACK).floor() as u64).min(n);
    log_sum_exp((0..=top).map(|j| ln_pmf(n, p, j)))
        .exp()
        .min(1.0)
}

/// `P(Bin(n,p) ≥ k)`.
pub fn binomial_sf(n: u64, p: f64, k: f64) -> f64 {
    let first = (k - INTEGER_SLACK).max(0.0).ceil() as u64;
    if first > n {
        return 0.0;
    }
    log_sum_exp((first..=n).map(|j| ln_pmf(n, p, j)))
        .exp()
        .min(1.0)
}

/// Exact tail, the claimed bound, and whether it holds.
pub fn binomial_bound(n: u64, p: f64, side: BinomialSide) -> Result<BoundCheck> {
    if n == 0 || n > 10_000 {
        return invalid("n must lie in 1..=10000");
    }
    if !(p > 0.0 && p <= 1.0) {
        return invalid("p must lie in (0, 1]");
    }
    let nf = n as f64;
    let (exact, bound) = match side {
        BinomialSide::Lower { delta } => {
            if !(0.0..=1.0 / 6.0).contains(&delta) {
                return invalid("lower-tail bound needs Δ ∈ [0, 1/6]");
            }
            (binomial_cdf(n, p, p * delta * nf), (-nf * p / 2.0).exp())
        }
        BinomialSide::Upper { delta } => {
            if delta < 3.0 {
                return invalid("upper-tail bound needs Δ ≥ 3");
            }
            (binomial_sf(n, p, p * delta * nf), (-nf * p / 2.0).exp())
        }
        BinomialSide::Eta { eta } => {
            if !(eta > 0.0) || p > 0.5f64.powf(2.0 / eta) {
                return invalid("η-bound needs η > 0 and p ≤ (1/2)^{2/η}");
            }
            (binomial_sf(n, p, eta * nf), p.powf(eta * nf / 2.0))
        }
    };
    // rounding slack for the log-space accumulation
    Ok(BoundCheck {
        exact,
        bound,
        holds: exact <= bound * (1.0 + 1e-12),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        let up = binomial_bound(20, 0.1, BinomialSide::Upper { delta: 3.0 }).unwrap();
        assert!((up.exact - 0.011_253).abs() < 1e-5, "{}", up.exact);
        assert!((up.bound - (-1f64).exp()).abs() < 1e-15);
        assert!(up.holds);
        let lo = binomial_bound(20, 0.1, BinomialSide::Lower { delta: 1.0 / 6.0 }).unwrap();
        assert!((lo.exact - 0.9f64.powi(20)).abs() < 1e-14);
        assert!(lo.holds);
        let imp = binomial_bound(10, 1.0, BinomialSide::Upper { delta: 3.0 }).unwrap();
        assert_eq!(imp.exact, 0.0);
        assert!(imp.holds);
    }

    #[test]
    fn preconditions_are_enforced() {
        assert!(binomial_bound(10, 0.1, BinomialSide::Lower { delta: 0.5 }).is_err());
        assert!(binomial_bound(10, 0.1, BinomialSide::Upper { delta: 2.0 }).is_err());
        assert!(binomial_bound(10, 0.4, BinomialSide::Eta { eta: 0.5 }).is_err());
    }

    #[test]
    fn cdf_and_sf_are_complementary() {
        for n in [1u64, 7, 30] {
            for k in 0..=n {
                let s = binomial_cdf(n, 0.3, k as f64 - 1.0) + binomial_sf(n, 0.3, k as f64);
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }
}
