use std::sync::Arc;

use rayon::prelude::*;

use super::CheckReport;
use crate::decomposition::{phi0_sup_variance, FiniteRangeDecomposition};
use crate::error::Result;
use crate::gaussian::{bi_gradient_variance, killed_green_center, richardson, sigma2, Domain};
use crate::lattice::{minimal_edge_for_levels, BoxRegion, Hierarchy, Site};
use crate::mcmc::{
    coupling_path, exact_partition, integrate_over_h, ks_critical, ks_one_sample, ks_two_sample,
    monotonicity_violations, run_chain, Anchor, ChainConfig, ChainState, DisorderField, Estimate,
    HeightSpec, OneSiteLaw, PinningModel,
};
use crate::rng::{stream, Purpose};
use crate::scalar::{
    binomial_bound, chi, disorder_cutoff, shift_height, window_probability,
    BinomialSide, DisorderLaw,
};

/// Least-squares `(intercept, slope)` of `y` against `x`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

fn box_interior(n: i64, d: usize) -> Result<Arc<Domain>> {
    Ok(Arc::new(Domain::box_interior(&BoxRegion::cube(&vec![0; d], n)?)?))
}

pub(super) fn green_convergence(r: &mut CheckReport) -> Result<()> {
    let sizes = [8i64, 16, 32];
    let oracle = sigma2(3);
    let values: Vec<f64> = sizes
        .iter()
        .map(|&n| killed_green_center(3, n, &[0, 0, 0]))
        .collect::<Result<_>>()?;
    let logn: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let logdef: Vec<f64> = values.iter().map(|g| (oracle - g).ln()).collect();
    let exponent = -linear_fit(&logn, &logdef).1;
    r.measure(
        "decay exponent of G(0,0) - G_N(c,c)",
        exponent,
        "in [0.8, 1.2]",
        (0.8..=1.2).contains(&exponent),
    );
    let (extrapolated, _) = richardson(&values, 1.0, 2.0);
    let gap = (extrapolated - oracle).abs();
    r.measure(
        "|Richardson(N=8,16,32) - Bessel-integral sigma_3^2|",
        gap,
        "<= 1e-4",
        gap <= 1e-4,
    );
    r.note(format!("sigma_3^2 = {oracle:.14}, extrapolated {extrapolated:.10}"));
    Ok(())
}

pub(super) fn frd_covariance(r: &mut CheckReport) -> Result<()> {
    let window: Vec<Site> = BoxRegion::cube(&[5, 5, 5], 2)?.sites().collect();
    let frd = FiniteRangeDecomposition::new(3, 2, window.clone())?;
    let check = frd.covariance_identity(&window, 18)?;
    r.measure(
        "max |Cov(phi0) + sum Cov(phi_z) - G_padded|",
        check.max_deviation,
        "<= 1e-6",
        check.max_deviation <= 1e-6,
    );
    r.note(format!(
        "L = 2, period {}, {} sites, padding {}",
        frd.period(),
        window.len(),
        check.padding
    ));
    Ok(())
}

pub(super) fn phi0_variance(r: &mut CheckReport) -> Result<()> {
    let sups = phi0_sup_variance(3, &[2, 4, 8])?;
    let ratio = |s: &crate::decomposition::SupVariance| {
        let l = s.overlap as f64;
        s.value * l / l.ln()
    };
    let c2 = ratio(&sups[0]);
    for w in sups.windows(2) {
        r.measure(
            format!("sup Var(phi0) L={} minus L={}", w[1].overlap, w[0].overlap),
            w[1].value - w[0].value,
            "< 0 (decreasing)",
            w[1].value < w[0].value,
        );
    }
    for s in &sups[1..] {
        let v = ratio(s);
        r.measure(
            format!("sup Var(phi0) * L / log L at L={}", s.overlap),
            v,
            format!("<= {c2:.6} (value at L=2)"),
            v <= c2,
        );
    }
    for s in &sups {
        r.note(format!("L = {}: sup {:.6} at residues {:?}", s.overlap, s.value, s.site));
    }
    Ok(())
}

pub(super) fn hierarchy_bounds(r: &mut CheckReport) -> Result<()> {
    let varkappa = 0.5;
    for h in [0.05, 0.1] {
        for levels in 1..=3 {
            let n = minimal_edge_for_levels(h, 3, varkappa, levels);
            let hier = Hierarchy::build(n, h, 3, varkappa)?;
            let bad = hier.check();
            let n0 = hier.edge_lengths()[0];
            let doubling = hier
                .edge_lengths()
                .iter()
                .enumerate()
                .all(|(j, &nj)| nj >= (1i64 << j) * n0);
            r.measure(
                format!("h={h} J={levels} N={n}: violated bounds"),
                bad.len() as f64,
                "= 0",
                bad.is_empty() && doubling && hier.num_levels() == levels,
            );
            r.note(format!("h={h} N={n} edges {:?}", hier.edge_lengths()));
            for b in bad {
                r.note(b);
            }
        }
    }
    Ok(())
}

pub(super) fn optimal_density(r: &mut CheckReport) -> Result<()> {
    let hs = [1e-2, 1e-3, 1e-4];
    for law in [DisorderLaw::Normal, DisorderLaw::Rademacher] {
        for beta in [0.5, 1.0] {
            let ratios: Vec<f64> = hs
                .iter()
                .map(|&h| Ok(crate::scalar::optimal_density(&law, beta, h)?.p_star / h))
                .collect::<Result<_>>()?;
            let (limit, _) = linear_fit(&hs, &ratios);
            let target = 2.0 * chi(&law, beta)?;
            let rel = (limit / target - 1.0).abs();
            r.measure(
                format!("{} beta={beta}: |fitted lim p*/h / 2chi - 1|, 2chi = {target:.6}", law.name()),
                rel,
                "relative error <= 0.02",
                rel <= 0.02,
            );
        }
    }
    Ok(())
}

pub(super) fn mcmc_oracle(r: &mut CheckReport) -> Result<()> {
    let regions: Vec<(&str, Vec<Site>)> = vec![
        ("single", vec![vec![0, 0, 0]]),
        ("pair", vec![vec![0, 0, 0], vec![1, 0, 0]]),
        ("line", vec![vec![0, 0, 0], vec![1, 0, 0], vec![2, 0, 0]]),
        ("corner", vec![vec![0, 0, 0], vec![1, 0, 0], vec![1, 1, 0]]),
    ];
    let mut instances = Vec::new();
    for (name, sites) in &regions {
        for beta in [0.0, 1.0] {
            for h in [-1.0, 0.0, 0.5] {
                for seed in 0..3u64 {
                    for center in [0.0, 1.5] {
                        instances.push((*name, sites.clone(), beta, h, seed, center));
                    }
                }
            }
        }
    }
    let results: Vec<(f64, String)> = instances
        .par_iter()
        .enumerate()
        .map(|(i, (name, sites, beta, h, seed, center))| {
            let dom = Arc::new(Domain::from_sites(3, sites.clone())?);
            let dis = DisorderField::generate(DisorderLaw::Normal, 600, *seed, dom.len());
            let (model, _) = PinningModel::quenched(dom, 0.0, *center, *beta, *h, &dis)?;
            let exact = exact_partition(&model)?;
            let mut cfg = ChainConfig::new(200_000).with_per_site();
            cfg.batches = 100;
            let (s, _) = run_chain(&model, &cfg, stream(601, Purpose::Chain, i as u64, 0))?;
            let est = s.per_site.expect("per-site estimates requested");
            let worst = est
                .iter()
                .zip(&exact.contact)
                .map(|(e, p)| (e.mean - p).abs() / e.se)
                .fold(0.0, f64::max);
            Ok((
                worst,
                format!("{name} beta={beta} h={h} seed={seed} u={center}: worst |z| {worst:.2}"),
            ))
        })
        .collect::<Result<_>>()?;
    let (worst, label) = results
        .iter()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .cloned()
        .expect("nonempty grid");
    r.measure(
        format!("max |MCMC - exact| / SE over {} instances", results.len()),
        worst,
        "<= 4",
        worst <= 4.0,
    );
    r.note(label);

    // one interior site: Λ_2 in d = 3
    let dom = box_interior(2, 3)?;
    let dis = DisorderField::generate(DisorderLaw::Normal, 602, 0, 1);
    let (model, _) = PinningModel::quenched(dom, 0.0, 0.0, 1.0, 0.5, &dis)?;
    let n = 1_000_000;
    let mut chain = ChainState::flat(&model, 0.0, stream(603, Purpose::Chain, 0, 0));
    let mut mc: Vec<f64> = (0..n)
        .map(|_| {
            chain.sweep();
            chain.phi(0)
        })
        .collect();
    let law = OneSiteLaw {
        mean: 0.0,
        sd: 6f64.sqrt().recip(),
        log_weight: model.log_weights()[0],
    };
    let mut rng = stream(604, Purpose::Test, 0, 0);
    let mut direct: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
    mc.sort_by(f64::total_cmp);
    direct.sort_by(f64::total_cmp);
    let d2 = ks_two_sample(&mc, &direct);
    let crit2 = ks_critical(1e-3, n, n);
    r.measure(
        "two-sample KS, heat bath vs rejection sampler (1e6 each)",
        d2,
        format!("< {crit2:.6} (level 1e-3)"),
        d2 < crit2,
    );
    let d1 = ks_one_sample(&mc, |x| law.cdf(x));
    let crit1 = ks_critical(1e-3, n, usize::MAX / 2);
    r.measure(
        "one-sample KS, heat bath vs exact mixture cdf",
        d1,
        format!("< {crit1:.6} (level 1e-3)"),
        d1 < crit1,
    );
    Ok(())
}

pub(super) fn homogeneous_free_energy(r: &mut CheckReport) -> Result<()> {
    let dom = box_interior(16, 3)?;
    let hs: Vec<f64> = (0..=10).map(|k| k as f64 * 0.01).collect();
    let cfg = ChainConfig::new(4000);
    let rho: Vec<(f64, Estimate)> = hs
        .par_iter()
        .enumerate()
        .map(|(i, &h)| {
            let model = PinningModel::homogeneous(dom.clone(), 0.0, 0.0, h)?;
            let (s, _) = run_chain(&model, &cfg, stream(700, Purpose::Chain, 0, i as u64))?;
            Ok((h, s.rho))
        })
        .collect::<Result<_>>()?;
    // Z = 1 at h = 0 when β = 0
    let curve = integrate_over_h(&rho, Anchor::Exact(0.0))?;
    let fit: Vec<&(f64, Estimate)> = curve
        .points
        .iter()
        .filter(|(h, _)| *h >= 0.02 - 1e-12 && *h <= 0.1 + 1e-12)
        .collect();
    let slope = fit.iter().map(|(h, f)| h * f.mean).sum::<f64>()
        / fit.iter().map(|(h, _)| h * h).sum::<f64>();
    let c_d = window_probability(sigma2(3).sqrt(), 0.0);
    let rel = (slope / c_d - 1.0).abs();
    r.measure(
        "least-squares slope of F against h on [0.02, 0.1]",
        slope,
        format!("within 10% of c_3 = {c_d:.4} (relative error {rel:.4})"),
        rel <= 0.10,
    );
    let viol = monotonicity_violations(&rho);
    r.measure(
        "pairwise drops of rho beyond 2 combined SE",
        viol.len() as f64,
        "= 0",
        viol.is_empty(),
    );
    let worst = curve
        .points
        .iter()
        .skip(1)
        .map(|(_, f)| f.mean / f.se)
        .fold(f64::INFINITY, f64::min);
    r.measure("min F/SE over the grid", worst, ">= -2", worst >= -2.0);
    Ok(())
}

/// `C_β = max_h (value(h) - χh²)/h³` over a log grid in `[1e-3, 1e-1]`.
fn fitted_upper_constant(law: &DisorderLaw, beta: f64) -> Result<f64> {
    let c = chi(law, beta)?;
    let mut best = f64::NEG_INFINITY;
    for k in 0..=16 {
        let h = 10f64.powf(-3.0 + k as f64 / 8.0);
        let v = crate::scalar::optimal_density(law, beta, h)?.value;
        best = best.max((v - c * h * h) / h.powi(3));
    }
    Ok(best)
}

pub(super) fn quenched_inequalities(r: &mut CheckReport) -> Result<()> {
    let law = DisorderLaw::Normal;
    let beta = 1.0;
    let s2 = sigma2(3);
    let dom = box_interior(24, 3)?;
    let replicas = 8u64;
    let nodes = 6;
    let cfg = ChainConfig::new(2000);
    let chi_b = chi(&law, beta)?;
    let c_beta = fitted_upper_constant(&law, beta)?;
    r.note(format!("chi = {chi_b:.6}, fitted C_beta = {c_beta:.4}"));
    for (hi, h) in [0.05, 0.1].into_iter().enumerate() {
        let u = shift_height(s2, &law, beta, h)?;
        let quenched: Vec<Estimate> = (0..replicas)
            .into_par_iter()
            .map(|rep| {
                let dis = DisorderField::generate(law, 800 + hi as u64, rep, dom.len());
                let (model, _) = PinningModel::quenched(dom.clone(), 0.0, u, beta, h, &dis)?;
                let est = coupling_path(&model, nodes, &cfg, |q| {
                    stream(810 + hi as u64, Purpose::Chain, rep, q as u64)
                })?;
                Ok(est.value)
            })
            .collect::<Result<_>>()?;
        let annealed_model = PinningModel::homogeneous(dom.clone(), 0.0, u, h)?;
        let annealed = coupling_path(&annealed_model, nodes, &cfg, |q| {
            stream(820 + hi as u64, Purpose::Chain, 0, q as u64)
        })?
        .value;
        let low = quenched.iter().map(|f| f.mean / f.se).fold(f64::INFINITY, f64::min);
        r.measure(format!("h={h}: min over replicas of F/SE"), low, ">= -2", low >= -2.0);
        let excess = quenched
            .iter()
            .map(|f| (f.mean - annealed.mean) / f.se.hypot(annealed.se))
            .fold(f64::NEG_INFINITY, f64::max);
        r.measure(
            format!("h={h}: max over replicas of (F - F_annealed)/combined SE"),
            excess,
            "<= 2",
            excess <= 2.0,
        );
        let means: Vec<f64> = quenched.iter().map(|f| f.mean).collect();
        let avg = Estimate::from_independent(&means);
        let curve = chi_b + c_beta * h;
        let scaled = avg.mean / (h * h);
        let slack = 2.0 * avg.se / (h * h);
        r.measure(
            format!("h={h}: replica mean F/h^2"),
            scaled,
            format!("<= chi + C_beta h + 2 SE = {curve:.4} + {slack:.4}"),
            scaled <= curve + slack,
        );
        r.note(format!(
            "h={h}: u_h = {u:.4}, F = {:.4e} +- {:.1e} (between replicas), annealed {:.4e} +- {:.1e}",
            avg.mean, avg.se, annealed.mean, annealed.se
        ));
    }
    Ok(())
}

/// `P(Bin(n, p) ∈ S)` by summing exact integer binomial coefficients.
pub(crate) fn brute_tail(n: u64, p: f64, keep: impl Fn(u64) -> bool) -> f64 {
    let mut coef: u128 = 1;
    let mut total = 0.0;
    for k in 0..=n {
        if k > 0 {
            coef = coef * (n - k + 1) as u128 / k as u128;
        }
        if keep(k) {
            total += coef as f64 * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
        }
    }
    total
}

pub(super) fn bounds(r: &mut CheckReport) -> Result<()> {
    // integer thresholds are compared with a small slack, as in the library
    const SLACK: f64 = 1e-9;
    let ps: Vec<f64> = (1..=60)
        .map(|k| if k <= 20 { 10f64.powf(-4.0 + k as f64 * 0.15) } else { (k - 20) as f64 / 40.0 })
        .collect();
    let (mut cases, mut failures, mut worst_gap) = (0usize, 0usize, 0.0f64);
    for n in 1..=30u64 {
        let nf = n as f64;
        for &p in &ps {
            let mut sides: Vec<BinomialSide> = Vec::new();
            for delta in [0.0, 1.0 / 12.0, 1.0 / 6.0] {
                sides.push(BinomialSide::Lower { delta });
            }
            for delta in [3.0, 4.0, 6.0] {
                sides.push(BinomialSide::Upper { delta });
            }
            for eta in [0.25, 0.5, 1.0, 2.0] {
                if p <= 0.5f64.powf(2.0 / eta) {
                    sides.push(BinomialSide::Eta { eta });
                }
            }
            for side in sides {
                let brute = match side {
                    BinomialSide::Lower { delta } => {
                        brute_tail(n, p, |k| k as f64 <= p * delta * nf + SLACK)
                    }
                    BinomialSide::Upper { delta } => {
                        brute_tail(n, p, |k| k as f64 >= p * delta * nf - SLACK)
                    }
                    BinomialSide::Eta { eta } => brute_tail(n, p, |k| k as f64 >= eta * nf - SLACK),
                };
                let check = binomial_bound(n, p, side)?;
                cases += 1;
                worst_gap = worst_gap.max((brute - check.exact).abs());
                if brute > check.bound * (1.0 + 1e-12) || !check.holds {
                    failures += 1;
                }
            }
        }
    }
    r.measure(
        format!("binomial tail bounds violated (n <= 30, {cases} cases)"),
        failures as f64,
        "= 0",
        failures == 0,
    );
    r.measure(
        "max |brute-force tail - library tail|",
        worst_gap,
        "<= 1e-12",
        worst_gap <= 1e-12,
    );

    // disorder cut-off on the one-site model Λ_2 (d = 3) at u = u_h
    let law = DisorderLaw::Normal;
    let (beta, h) = (1.0, 0.05);
    let u = shift_height(sigma2(3), &law, beta, h)?;
    let q = window_probability(6f64.sqrt().recip(), u);
    let lambda = law.log_mgf(beta);
    let log_z = |w: f64| ((1.0 - q) + q * (beta * w - lambda + h).exp()).ln();
    let k_h = disorder_cutoff(&law, h)?;
    let mut rng = stream(900, Purpose::Disorder, 0, 0);
    let draws: Vec<f64> = (0..100).map(|_| law.sample(&mut rng)).collect();
    for k in [0.5, 1.0, k_h] {
        let bad = draws
            .iter()
            .filter(|&&w| {
                let diff = log_z(w) - log_z(crate::scalar::truncate(w, k));
                let lo = if w < -k { beta * w } else { 0.0 };
                let hi = if w > k { beta * w } else { 0.0 };
                diff < lo - 1e-14 || diff > hi + 1e-14
            })
            .count();
        r.measure(
            format!("K={k:.4}: draws outside the pathwise cut-off sandwich (100 draws)"),
            bad as f64,
            "= 0",
            bad == 0,
        );
        let mean_gap = law.expect(|w| log_z(w) - log_z(crate::scalar::truncate(w, k))).abs();
        let bound = beta * law.tail_abs_mean(k);
        r.measure(
            format!("K={k:.4}: |E log Z(omega) - E log Z(omega-bar)|"),
            mean_gap,
            format!("<= beta L_K = {bound:.4e}"),
            mean_gap <= bound,
        );
    }
    Ok(())
}

pub(super) fn bi_gradient_decay(r: &mut CheckReport) -> Result<()> {
    let radii = [4i64, 8, 16];
    let mut logs: Vec<(usize, usize, Vec<f64>)> = vec![(0, 0, Vec::new()), (0, 1, Vec::new())];
    for &rad in &radii {
        // Λ_{4r} split by its bisecting walls at 2r; x is the centre of a chamber
        let dom = Domain::box_interior(&BoxRegion::cube(&[0, 0, 0], 4 * rad)?)?;
        let x = vec![rad; 3];
        for (e, g, out) in logs.iter_mut() {
            let v = bi_gradient_variance(&dom, |y| y.iter().any(|&c| c == 2 * rad), |_| false, &x, *e, *g)?;
            out.push(v.ln());
        }
    }
    let lr: Vec<f64> = radii.iter().map(|&v| (v as f64).ln()).collect();
    for (e, g, out) in &logs {
        let slope = linear_fit(&lr, out).1;
        r.measure(
            format!("log-log slope of Var(grad_{e}{g} psi_1) vs r in {{4,8,16}}"),
            slope,
            "<= -4",
            slope <= -4.0,
        );
    }
    Ok(())
}

pub(super) fn height_profile(r: &mut CheckReport) -> Result<()> {
    let law = DisorderLaw::Normal;
    let (beta, h) = (1.0, 0.02);
    let s2 = sigma2(3);
    let dom = box_interior(24, 3)?;
    let u = shift_height(s2, &law, beta, h)?;
    let scale = s2.sqrt() * (2.0 * (1.0 / h).ln()).sqrt();
    let (lo, hi) = (0.6 * scale, 1.4 * scale);
    let spec = HeightSpec::new(h, s2, 0.25)?;
    let cfg = ChainConfig::new(2500).starting_at(u).with_heights(spec);
    let medians: Vec<(f64, f64)> = (0..4u64)
        .into_par_iter()
        .map(|rep| {
            let dis = DisorderField::generate(law, 1100, rep, dom.len());
            let (model, _) = PinningModel::quenched(dom.clone(), 0.0, 0.0, beta, h, &dis)?;
            let (s, _) = run_chain(&model, &cfg, stream(1101, Purpose::Chain, rep, 0))?;
            let p = s.heights.expect("heights requested");
            Ok((p.median(), p.outside_band))
        })
        .collect::<Result<_>>()?;
    for (rep, (m, out)) in medians.iter().enumerate() {
        r.measure(
            format!("replica {rep}: median |phi|"),
            *m,
            format!("in [{lo:.4}, {hi:.4}]"),
            (lo..=hi).contains(m),
        );
        r.note(format!(
            "replica {rep}: fraction outside the 0.25-band around sqrt(2) sigma_3: {out:.3}"
        ));
    }
    r.note(format!("start at u_h = {u:.4}; sigma_3 sqrt(2 log 1/h) = {scale:.4}"));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_recovers_a_line() {
        let x = [1.0, 2.0, 3.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 - 2.0 * v).collect();
        let (a, b) = linear_fit(&x, &y);
        assert!((a - 0.5).abs() < 1e-12 && (b + 2.0).abs() < 1e-12);
    }

    #[test]
    fn brute_tail_sums_to_one() {
        assert!((brute_tail(30, 0.3, |_| true) - 1.0).abs() < 1e-12);
        assert!((brute_tail(5, 0.5, |k| k == 0) - 1.0 / 32.0).abs() < 1e-15);
    }
}
