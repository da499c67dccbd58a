use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::Serialize;

use super::chain::{ChainState, PinningModel};
use crate::error::{invalid, Error, Result};
use crate::gaussian::FieldSample;
use crate::rng::StreamRng;

/// Minimum number of batches accepted by the batch-means error estimate.
pub const MIN_BATCHES: usize = 20;

/// A mean with its standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn new(mean: f64, se: f64) -> Self {
        Self { mean, se }
    }

    /// Sample mean and `sd/√n` of independent values.
    pub fn from_independent(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::new(f64::NAN, f64::NAN);
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self::new(mean, f64::NAN);
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Self::new(mean, (var / n as f64).sqrt())
    }

    /// `|a - b| / √(se_a² + se_b²)`.
    pub fn z_score(&self, other: &Estimate) -> f64 {
        (self.mean - other.mean).abs() / self.se.hypot(other.se)
    }
}

/// Histogram settings for `|φ(x)| / √(log(1/h))`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct HeightSpec {
    pub h: f64,
    /// Band half-width around the target `√2 σ_d`.
    pub epsilon: f64,
    pub target: f64,
    pub bin_width: f64,
    pub max: f64,
}

impl HeightSpec {
    pub fn new(h: f64, sigma2: f64, epsilon: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return invalid("height profile needs 0 < h < 1");
        }
        Ok(Self {
            h,
            epsilon,
            target: (2.0 * sigma2).sqrt(),
            bin_width: 0.002,
            max: 8.0,
        })
    }

    pub fn scale(&self) -> f64 {
        (1.0 / self.h).ln().sqrt()
    }
}

/// Empirical law of `|φ(x)| / √(log(1/h))` over sites and recorded sweeps.
#[derive(Clone, Debug, Serialize)]
pub struct HeightProfile {
    pub spec: HeightSpec,
    /// Counts per bin of width `spec.bin_width` starting at 0; the last bin
    /// collects everything above `spec.max`.
    pub counts: Vec<u64>,
    pub total: u64,
    /// Fraction with `| |φ|/√(log 1/h) - √2σ_d | > ε`.
    pub outside_band: f64,
    /// `|φ|` quantiles at 0.1, 0.25, 0.5, 0.75, 0.9.
    pub quantiles: [f64; 5],
}

impl HeightProfile {
    pub fn median(&self) -> f64 {
        self.quantiles[2]
    }
}

struct HeightAccumulator {
    spec: HeightSpec,
    counts: Vec<u64>,
    total: u64,
    outside: u64,
}

impl HeightAccumulator {
    fn new(spec: HeightSpec) -> Self {
        let bins = (spec.max / spec.bin_width).ceil() as usize + 1;
        Self {
            spec,
            counts: vec![0; bins],
            total: 0,
            outside: 0,
        }
    }

    fn record(&mut self, state: &ChainState) {
        let scale = self.spec.scale();
        let last = self.counts.len() - 1;
        for k in 0..state.model().volume() {
            let y = state.phi(k).abs() / scale;
            let bin = ((y / self.spec.bin_width) as usize).min(last);
            self.counts[bin] += 1;
            if (y - self.spec.target).abs() > self.spec.epsilon {
                self.outside += 1;
            }
        }
        self.total += state.model().volume() as u64;
    }

    fn finish(self) -> HeightProfile {
        let scale = self.spec.scale();
        let quantile = |p: f64| {
            let target = p * self.total as f64;
            let mut acc = 0.0;
            for (b, &c) in self.counts.iter().enumerate() {
                if acc + c as f64 >= target && c > 0 {
                    let frac = (target - acc) / c as f64;
                    return (b as f64 + frac) * self.spec.bin_width * scale;
                }
                acc += c as f64;
            }
            f64::NAN
        };
        let quantiles = [0.1, 0.25, 0.5, 0.75, 0.9].map(quantile);
        HeightProfile {
            spec: self.spec,
            outside_band: self.outside as f64 / self.total.max(1) as f64,
            counts: self.counts,
            total: self.total,
            quantiles,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainConfig {
    pub sweeps: usize,
    pub burn_in: usize,
    pub batches: usize,
    /// Initial constant height `φ ≡ start`.
    pub start: f64,
    /// Recount the contacts every this many sweeps and fail on a mismatch.
    pub recount_every: usize,
    /// Keep per-site contact frequencies.
    pub per_site: bool,
    #[serde(skip)]
    pub heights: Option<HeightSpec>,
}

impl ChainConfig {
    /// 20% burn-in and 30 batches.
    pub fn new(sweeps: usize) -> Self {
        Self {
            sweeps,
            burn_in: sweeps / 5,
            batches: 30,
            start: 0.0,
            recount_every: 100,
            per_site: false,
            heights: None,
        }
    }

    pub fn starting_at(mut self, start: f64) -> Self {
        self.start = start;
        self
    }

    pub fn with_per_site(mut self) -> Self {
        self.per_site = true;
        self
    }

    pub fn with_heights(mut self, spec: HeightSpec) -> Self {
        self.heights = Some(spec);
        self
    }

    /// `(effective burn-in, batch length)`; sweeps that do not fill a whole
    /// batch are added to the burn-in.
    pub fn layout(&self) -> Result<(usize, usize)> {
        if self.batches < MIN_BATCHES {
            return invalid(format!("{} batches; at least {MIN_BATCHES} needed", self.batches));
        }
        if self.burn_in >= self.sweeps {
            return invalid(format!("burn-in {} must be below sweeps {}", self.burn_in, self.sweeps));
        }
        let post = self.sweeps - self.burn_in;
        if post < self.batches {
            return invalid(format!(
                "{post} post-burn-in sweeps cannot fill {} batches",
                self.batches
            ));
        }
        let len = post / self.batches;
        Ok((self.sweeps - len * self.batches, len))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainSummary {
    /// Contact fraction `Σδ_x / |Λ|`.
    pub rho: Estimate,
    /// `Σ a_x δ_x / |Λ|`.
    pub energy: Estimate,
    /// Lag-1 autocorrelation of the contact-fraction batch means; values near
    /// 1 flag batches that are too short for the mixing time.
    pub batch_autocorrelation: f64,
    pub per_site: Option<Vec<Estimate>>,
    pub heights: Option<HeightProfile>,
    pub sweeps: usize,
    pub burn_in: usize,
    pub batches: usize,
}

fn batch_estimate(means: &[f64]) -> (Estimate, f64) {
    let e = Estimate::from_independent(means);
    let var: f64 = means.iter().map(|m| (m - e.mean).powi(2)).sum();
    let cov: f64 = means.windows(2).map(|w| (w[0] - e.mean) * (w[1] - e.mean)).sum();
    let rho1 = if var > 0.0 { cov / var } else { 0.0 };
    (e, rho1)
}

/// Runs one chain and reports batch-means estimates. Returns the final field.
pub fn run_chain(model: &PinningModel, cfg: &ChainConfig, rng: StreamRng) -> Result<(ChainSummary, FieldSample)> {
    let (burn, len) = cfg.layout()?;
    let volume = model.volume() as f64;
    let mut state = ChainState::flat(model, cfg.start, rng);
    let check = |state: &ChainState| -> Result<()> {
        if cfg.recount_every > 0 && state.sweeps().is_multiple_of(cfg.recount_every as u64) {
            let (inc, full) = (state.contact_count(), state.recount());
            if inc != full {
                return Err(Error::InvalidArgument(format!(
                    "contact count drifted: {inc} maintained, {full} counted"
                )));
            }
        }
        Ok(())
    };
    for _ in 0..burn {
        state.sweep();
        check(&state)?;
    }
    let mut heights = cfg.heights.map(HeightAccumulator::new);
    let n_sites = model.volume();
    let mut site_batches: Vec<Vec<f64>> = if cfg.per_site {
        vec![Vec::with_capacity(cfg.batches); n_sites]
    } else {
        Vec::new()
    };
    let mut rho_means = Vec::with_capacity(cfg.batches);
    let mut energy_means = Vec::with_capacity(cfg.batches);
    let mut site_counts = vec![0u32; if cfg.per_site { n_sites } else { 0 }];
    for _ in 0..cfg.batches {
        let (mut rho, mut energy) = (0.0, 0.0);
        site_counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..len {
            state.sweep();
            check(&state)?;
            rho += state.contact_count() as f64;
            energy += state.energy();
            if cfg.per_site {
                for (c, &on) in site_counts.iter_mut().zip(state.contacts()) {
                    *c += on as u32;
                }
            }
            if let Some(acc) = heights.as_mut() {
                acc.record(&state);
            }
        }
        rho_means.push(rho / (len as f64 * volume));
        energy_means.push(energy / (len as f64 * volume));
        for (b, &c) in site_batches.iter_mut().zip(&site_counts) {
            b.push(c as f64 / len as f64);
        }
    }
    let (rho, rho1) = batch_estimate(&rho_means);
    let (energy, _) = batch_estimate(&energy_means);
    let per_site = cfg
        .per_site
        .then(|| site_batches.iter().map(|b| Estimate::from_independent(b)).collect());
    let summary = ChainSummary {
        rho,
        energy,
        batch_autocorrelation: rho1,
        per_site,
        heights: heights.map(HeightAccumulator::finish),
        sweeps: cfg.sweeps,
        burn_in: burn,
        batches: cfg.batches,
    };
    Ok((summary, state.field()))
}

/// Where the `h`-integration starts.
#[derive(Clone, Copy, Debug, Serialize)]
pub enum Anchor {
    /// Known free energy at the first grid point (for example `F(0) = 0` at `β = 0`).
    Exact(f64),
    /// `F = 0` at the first grid point, assumed deep in the delocalized phase.
    Delocalized,
}

#[derive(Clone, Debug, Serialize)]
pub struct FreeEnergyCurve {
    /// `(h, F̂(h))`.
    pub points: Vec<(f64, Estimate)>,
    pub warning: Option<String>,
}

/// Trapezoid integration of `ρ̂(h)` along an increasing grid. Errors of the
/// grid points are treated as independent.
pub fn integrate_over_h(rho: &[(f64, Estimate)], anchor: Anchor) -> Result<FreeEnergyCurve> {
    if rho.is_empty() {
        return invalid("empty h-grid");
    }
    if rho.windows(2).any(|w| w[1].0 <= w[0].0) {
        return invalid("h-grid must be strictly increasing");
    }
    let (start, warning) = match anchor {
        Anchor::Exact(f) => (f, None),
        Anchor::Delocalized => {
            let first = rho[0].1;
            let zero = first.mean <= 2.0 * first.se || first.mean == 0.0;
            let warning = (!zero).then(|| {
                format!(
                    "anchor invalid: rho({}) = {:.3e} +- {:.1e} is not statistically zero",
                    rho[0].0, first.mean, first.se
                )
            });
            (0.0, warning)
        }
    };
    let mut coef = vec![0.0; rho.len()];
    let mut points = vec![(rho[0].0, Estimate::new(start, 0.0))];
    for k in 1..rho.len() {
        let half = 0.5 * (rho[k].0 - rho[k - 1].0);
        coef[k - 1] += half;
        coef[k] += half;
        let mean = start + (0..=k).map(|i| coef[i] * rho[i].1.mean).sum::<f64>();
        let var: f64 = (0..=k).map(|i| (coef[i] * rho[i].1.se).powi(2)).sum();
        points.push((rho[k].0, Estimate::new(mean, var.sqrt())));
    }
    Ok(FreeEnergyCurve { points, warning })
}

/// Index pairs `(i, i+1)` where `ρ̂` drops by more than two combined errors.
pub fn monotonicity_violations(rho: &[(f64, Estimate)]) -> Vec<usize> {
    rho.windows(2)
        .enumerate()
        .filter(|(_, w)| w[1].1.mean < w[0].1.mean - 2.0 * w[0].1.se.hypot(w[1].1.se))
        .map(|(i, _)| i)
        .collect()
}

/// `(1/|Λ|) log Z = ∫_0^1 E_s[Σ a_x δ_x] / |Λ| ds`, where `E_s` uses the
/// log-weights `s·a_x`; exact anchor `Z(0) = 1`. One chain per node.
#[derive(Clone, Debug, Serialize)]
pub struct CouplingPathEstimate {
    pub value: Estimate,
    /// `(s, E_s[H]/|Λ|)` per node.
    pub nodes: Vec<(f64, Estimate)>,
}

pub fn coupling_path(
    model: &PinningModel,
    nodes: usize,
    cfg: &ChainConfig,
    mut rng_for_node: impl FnMut(usize) -> StreamRng,
) -> Result<CouplingPathEstimate> {
    let rule = GaussLegendre::new(
        NonZeroUsize::new(nodes).ok_or_else(|| Error::InvalidArgument("need at least one node".into()))?,
    );
    let mut out = Vec::with_capacity(nodes);
    let (mut mean, mut var) = (0.0, 0.0);
    for (q, (x, w)) in rule.iter().enumerate() {
        let s = 0.5 * (x + 1.0);
        let (summary, _) = run_chain(&model.scaled(s), cfg, rng_for_node(q))?;
        // the chain reports Σ s·a_x δ_x
        let e = Estimate::new(summary.energy.mean / s, summary.energy.se / s);
        mean += 0.5 * w * e.mean;
        var += (0.5 * w * e.se).powi(2);
        out.push((s, e));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(CouplingPathEstimate {
        value: Estimate::new(mean, var.sqrt()),
        nodes: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::Domain;
    use crate::lattice::BoxRegion;
    use crate::rng::{stream, Purpose};
    use std::sync::Arc;

    #[test]
    fn batch_layout_rules() {
        let cfg = ChainConfig::new(1000);
        assert_eq!(cfg.layout().unwrap(), (220, 26));
        let mut few = ChainConfig::new(100);
        few.batches = 19;
        assert!(few.layout().is_err());
        let mut short = ChainConfig::new(30);
        short.burn_in = 15;
        assert!(short.layout().is_err());
    }

    #[test]
    fn trapezoid_of_linear_density() {
        let grid: Vec<(f64, Estimate)> = (0..=10)
            .map(|k| {
                let h = k as f64 * 0.1;
                (h, Estimate::new(2.0 * h, 0.01))
            })
            .collect();
        let f = integrate_over_h(&grid, Anchor::Exact(0.5)).unwrap();
        let (h, last) = f.points[10];
        assert!((last.mean - (0.5 + h * h)).abs() < 1e-12);
        assert!(f.warning.is_none());
        let g = integrate_over_h(&grid[3..], Anchor::Delocalized).unwrap();
        assert!(g.warning.unwrap().starts_with("anchor invalid"));
    }

    #[test]
    fn monotonicity_flags_real_drops_only() {
        let pts = vec![
            (0.0, Estimate::new(0.1, 0.01)),
            (0.1, Estimate::new(0.095, 0.01)),
            (0.2, Estimate::new(0.05, 0.01)),
        ];
        assert_eq!(monotonicity_violations(&pts), vec![1]);
    }

    #[test]
    fn one_site_contact_probability() {
        // Λ_2 in d = 3: one interior site with law N(0, 1/6)
        let dom = Arc::new(Domain::box_interior(&BoxRegion::cube(&[0, 0, 0], 2).unwrap()).unwrap());
        let q = crate::scalar::normal_interval(-6f64.sqrt(), 6f64.sqrt());
        assert!((q - 0.98569).abs() < 1e-5);
        for a in [0.0, -2.0, 1.0] {
            let model = PinningModel::homogeneous(dom.clone(), 0.0, 0.0, a).unwrap();
            let cfg = ChainConfig::new(200_000);
            let (s, _) = run_chain(&model, &cfg, stream(11, Purpose::Chain, 0, 0)).unwrap();
            let w = f64::exp(a);
            let exact = w * q / (w * q + 1.0 - q);
            assert!((s.rho.mean - exact).abs() < 4.0 * s.rho.se, "{a}: {:?} vs {exact}", s.rho);
        }
    }

    #[test]
    fn coupling_path_matches_exact_log_partition_function() {
        use crate::mcmc::{exact_partition, DisorderField};
        use crate::scalar::DisorderLaw;
        let dom = Arc::new(
            Domain::from_sites(3, vec![vec![0, 0, 0], vec![1, 0, 0], vec![1, 1, 0]]).unwrap(),
        );
        let dis = DisorderField::generate(DisorderLaw::Normal, 21, 0, 3);
        let (model, _) = PinningModel::quenched(dom, 0.0, 0.8, 1.0, 0.4, &dis).unwrap();
        let exact = exact_partition(&model).unwrap().log_z / 3.0;
        let est = coupling_path(&model, 6, &ChainConfig::new(60_000), |q| {
            stream(31, Purpose::Chain, 0, q as u64)
        })
        .unwrap();
        // quadrature error of 6 nodes is far below the sampling error here
        assert!(
            (est.value.mean - exact).abs() < 4.0 * est.value.se,
            "{:?} vs {exact}",
            est.value
        );
    }

    #[test]
    fn heights_of_a_pinned_field_sit_near_zero() {
        let dom = Arc::new(Domain::box_interior(&BoxRegion::cube(&[0, 0, 0], 6).unwrap()).unwrap());
        let model = PinningModel::homogeneous(dom, 0.0, 0.0, 20.0).unwrap();
        // at this scale the band around √2σ_d is |φ| ∈ [1.1, 2.0], outside the window
        let spec = HeightSpec::new(0.01, 0.2527, 0.2).unwrap();
        let cfg = ChainConfig::new(200).with_heights(spec);
        let (s, _) = run_chain(&model, &cfg, stream(12, Purpose::Chain, 0, 0)).unwrap();
        let p = s.heights.unwrap();
        assert!(p.median() < 0.6);
        assert_eq!(p.outside_band, 1.0);
    }
}
