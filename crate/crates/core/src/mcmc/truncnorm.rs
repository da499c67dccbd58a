use rand::Rng;
use rand_distr::{Exp, StandardNormal};

use crate::scalar::{gaussian_tail, inverse_gaussian_tail, normal_interval};

/// Past this many standard deviations the tail quantile underflows, and the
/// exponential proposal of Robert (1995) takes over.
const FAR_TAIL: f64 = 30.0;

/// Above this interval mass, plain rejection from the untruncated law is
/// cheaper than the quantile and just as exact.
const REJECTION_MASS: f64 = 0.5;

/// Standard normal conditioned on `[a, b]` (`a < b`, either may be infinite).
pub fn standard_truncated<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    debug_assert!(a < b);
    if b <= 0.0 {
        return -upper_side(-b, -a, rng);
    }
    if a >= 0.0 {
        return upper_side(a, b, rng);
    }
    // the interval contains the mode
    let mass = normal_interval(a, b);
    if mass >= REJECTION_MASS {
        loop {
            let z: f64 = rng.sample(StandardNormal);
            if z >= a && z <= b {
                return z;
            }
        }
    }
    let u: f64 = rng.random();
    // lower-tail mass of the target point, read from whichever side is smaller
    let below = gaussian_tail(-a) + u * mass;
    let z = if below <= 0.5 {
        -inverse_gaussian_tail(below)
    } else {
        inverse_gaussian_tail(gaussian_tail(b) + (1.0 - u) * mass)
    };
    z.clamp(a, b)
}

/// `[a, b]` with `0 ≤ a < b`.
fn upper_side<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if a > FAR_TAIL {
        let rate = 0.5 * (a + (a * a + 4.0).sqrt());
        let exp = Exp::new(rate).expect("positive rate");
        loop {
            let z = a + rng.sample(exp);
            if z > b {
                continue;
            }
            let u: f64 = rng.random();
            if u <= (-0.5 * (z - rate) * (z - rate)).exp() {
                return z;
            }
        }
    }
    let mass = normal_interval(a, b);
    if mass >= REJECTION_MASS {
        loop {
            let z: f64 = rng.sample(StandardNormal);
            if z >= a && z <= b {
                return z;
            }
        }
    }
    let u: f64 = rng.random();
    let (ta, tb) = (gaussian_tail(a), gaussian_tail(b));
    // complementary quantile: P(N > z) runs from ta down to tb
    let z = inverse_gaussian_tail(tb + (1.0 - u) * (ta - tb));
    z.clamp(a, b)
}

/// `N(mean, sd²)` conditioned on `[lo, hi]`.
pub fn truncated_normal<R: Rng + ?Sized>(mean: f64, sd: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    mean + sd * standard_truncated((lo - mean) / sd, (hi - mean) / sd, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::scalar::normal_cdf;

    fn ks_against(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = samples.len() as f64;
        samples
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn stays_inside_and_matches_cdf() {
        let cases = [
            (-1.0, 1.0),
            (-0.2, 0.1),
            (0.5, 3.0),
            (2.0, f64::INFINITY),
            (f64::NEG_INFINITY, -4.0),
            (-3.0, -2.5),
            (5.0, 5.5),
        ];
        for (k, &(a, b)) in cases.iter().enumerate() {
            let mut rng = stream(1, Purpose::Test, 0, k as u64);
            let mut s: Vec<f64> = (0..20_000).map(|_| standard_truncated(a, b, &mut rng)).collect();
            assert!(s.iter().all(|z| *z >= a && *z <= b));
            let mass = normal_interval(a, b);
            let cdf = |x: f64| {
                if a >= 0.0 {
                    normal_interval(a, x) / mass
                } else {
                    (normal_cdf(x) - normal_cdf(a)) / mass
                }
            };
            let d = ks_against(&mut s, cdf);
            // 1e-3 critical value for n = 20000
            assert!(d < 1.9495 / (20_000f64).sqrt(), "[{a}, {b}]: D = {d}");
        }
    }

    #[test]
    fn far_tail_is_finite() {
        let mut rng = stream(2, Purpose::Test, 0, 0);
        for _ in 0..1000 {
            let z = standard_truncated(45.0, f64::INFINITY, &mut rng);
            assert!((45.0..46.0).contains(&z));
            let w = standard_truncated(f64::NEG_INFINITY, -38.0, &mut rng);
            assert!((-39.0..=-38.0).contains(&w));
        }
    }

    #[test]
    fn scaled_version() {
        let mut rng = stream(3, Purpose::Test, 0, 0);
        let n = 50_000;
        let mean: f64 = (0..n).map(|_| truncated_normal(2.0, 0.5, 2.0, f64::INFINITY, &mut rng)).sum::<f64>() / n as f64;
        let exact = 2.0 + 0.5 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean - exact).abs() < 5e-3, "{mean} {exact}");
    }
}
