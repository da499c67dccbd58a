use std::sync::Arc;

use rayon::prelude::*;
use serde_json::json;

use super::{AnchorChoice, Cell, ExperimentKind, Outcome, RunConfig, Table};
use crate::decomposition::{phi0_sup_variance, FiniteRangeDecomposition};
use crate::error::Result;
use crate::gaussian::{killed_green_center, richardson, sigma2, Domain, FieldSample};
use crate::lattice::{minimal_edge_for_levels, BoxRegion, Hierarchy};
use crate::mcmc::{
    box_diagnostics, integrate_over_h, monotonicity_violations, run_chain, Anchor, BoxThresholds,
    ChainConfig, ChainSummary, DisorderField, Estimate, HeightSpec, PinningModel,
};
use crate::rng::{stream, Purpose};
use crate::scalar::{binomial_bound, chi, optimal_density, shift_height, BinomialSide, PinningParams};

pub(super) fn dispatch(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.experiment {
        ExperimentKind::GreenConvergence => green_convergence(cfg),
        ExperimentKind::FrdVerify => frd_verify(cfg),
        ExperimentKind::HierarchyVerify => hierarchy_verify(cfg),
        ExperimentKind::PstarSweep => pstar_sweep(cfg),
        ExperimentKind::UhSweep => uh_sweep(cfg),
        ExperimentKind::RhoVsH => rho_vs_h(cfg),
        ExperimentKind::FreeEnergy => free_energy(cfg),
        ExperimentKind::HeightProfile => height_profile(cfg),
        ExperimentKind::BoxDiagnostics => box_diagnostics_run(cfg),
        ExperimentKind::BoundsSuite => bounds_suite(cfg),
    }
}

fn row(cells: Vec<Cell>) -> Vec<Cell> {
    cells
}

macro_rules! cells {
    ($($v:expr),* $(,)?) => { row(vec![$(Cell::from($v)),*]) };
}

fn green_convergence(cfg: &RunConfig) -> Result<Outcome> {
    let sizes = cfg.sizes.clone().unwrap_or_default();
    let d = cfg.d;
    let s2 = sigma2(d);
    let values: Vec<f64> = sizes
        .par_iter()
        .map(|&n| killed_green_center(d, n, &vec![0; d]))
        .collect::<Result<_>>()?;
    let mut t = Table::new("green", &["n", "green_center", "deficit", "scaled_deficit"], 1);
    for (&n, &g) in sizes.iter().zip(&values) {
        let deficit = s2 - g;
        t.push(cells![n, g, deficit, deficit * (n as f64).powi(d as i32 - 2)]);
    }
    let (extrapolated, spread) = richardson(&values, (d - 2) as f64, 2.0);
    let mut x = Table::new("extrapolation", &["d", "sigma2", "richardson", "richardson_spread", "gap"], 1);
    x.push(cells![d, s2, extrapolated, spread, extrapolated - s2]);
    Ok(Outcome {
        tables: vec![t, x],
        ..Default::default()
    })
}

fn frd_verify(cfg: &RunConfig) -> Result<Outcome> {
    let overlaps = cfg.overlaps.clone().unwrap_or_default();
    let d = cfg.d;
    let mut sup = Table::new("phi0_sup_variance", &["overlap", "sup_variance", "scaled", "argmax"], 1);
    for s in phi0_sup_variance(d, &overlaps)? {
        let l = s.overlap as f64;
        let site: Vec<String> = s.site.iter().map(|v| v.to_string()).collect();
        sup.push(cells![s.overlap, s.value, s.value * l.powi(d as i32 - 2) / l.ln(), site.join(" ")]);
    }
    let mut cov = Table::new(
        "covariance_identity",
        &["overlap", "period", "sites", "padding", "max_deviation", "min_phi0_entry", "min_local_entry"],
        1,
    );
    let checks: Vec<_> = overlaps
        .par_iter()
        .map(|&l| {
            let lo = vec![2 * l + 1; d];
            let window: Vec<_> = BoxRegion::cube(&lo, 2)?.sites().collect();
            let frd = FiniteRangeDecomposition::new(d, l, window.clone())?;
            let padding = cfg.padding.max(frd.period() + 1);
            Ok((l, frd.period(), frd.covariance_identity(&window, padding)?))
        })
        .collect::<Result<_>>()?;
    for (l, period, c) in checks {
        cov.push(cells![
            l,
            period,
            c.sites.len(),
            c.padding,
            c.max_deviation,
            c.min_phi0_entry,
            c.min_local_entry
        ]);
    }
    Ok(Outcome {
        tables: vec![sup, cov],
        ..Default::default()
    })
}

fn hierarchy_verify(cfg: &RunConfig) -> Result<Outcome> {
    let mut t = Table::new(
        "hierarchy",
        &["h", "levels", "n", "edges", "violations", "coverage", "coverage_bound"],
        2,
    );
    let mut warnings = Vec::new();
    for h in cfg.h_values() {
        for &levels in cfg.levels.as_deref().unwrap_or(&[]) {
            let n = minimal_edge_for_levels(h, cfg.d, cfg.varkappa, levels);
            let hier = Hierarchy::build(n, h, cfg.d, cfg.varkappa)?;
            let bad = hier.check();
            let edges: Vec<String> = hier.edge_lengths().iter().map(|e| e.to_string()).collect();
            t.push(cells![
                h,
                levels,
                n,
                edges.join(" "),
                bad.len(),
                hier.coverage_fraction(),
                hier.coverage_bound()
            ]);
            warnings.extend(bad.into_iter().map(|b| format!("h={h} J={levels}: {b}")));
        }
    }
    Ok(Outcome {
        tables: vec![t],
        warnings,
        ..Default::default()
    })
}

fn pstar_sweep(cfg: &RunConfig) -> Result<Outcome> {
    let mut t = Table::new("pstar", &["beta", "h", "pStar", "pStar/(2chi*h)", "value"], 2);
    for beta in cfg.beta_values() {
        let c = chi(&cfg.disorder, beta)?;
        for h in cfg.h_values() {
            let o = optimal_density(&cfg.disorder, beta, h)?;
            t.push(cells![beta, h, o.p_star, o.p_star / (2.0 * c * h), o.value]);
        }
    }
    Ok(Outcome {
        tables: vec![t],
        ..Default::default()
    })
}

fn uh_sweep(cfg: &RunConfig) -> Result<Outcome> {
    let s2 = sigma2(cfg.d);
    let mut t = Table::new("params", &["beta", "h", "lambda", "chi", "pStar", "u_h", "K_h"], 2);
    for beta in cfg.beta_values() {
        for h in cfg.h_values() {
            let p = PinningParams::derive(&cfg.disorder, s2, beta, h)?;
            t.push(cells![
                beta,
                h,
                p.lambda_beta,
                p.chi,
                p.p_star,
                p.u_h.unwrap_or(f64::NAN),
                p.cutoff.unwrap_or(f64::NAN)
            ]);
        }
    }
    Ok(Outcome {
        tables: vec![t],
        ..Default::default()
    })
}

/// One chain per `(β index, h index, replica)`.
#[derive(Clone, Copy)]
struct Task {
    bi: usize,
    hi: usize,
    beta: f64,
    h: f64,
    replica: u64,
}

struct Setup {
    domain: Arc<Domain>,
    tasks: Vec<Task>,
    h_count: usize,
}

fn setup(cfg: &RunConfig, domain: Option<Arc<Domain>>) -> Result<Setup> {
    let domain = match domain {
        Some(d) => d,
        None => {
            let n = cfg.n.expect("validated");
            Arc::new(Domain::box_interior(&BoxRegion::cube(&vec![0; cfg.d], n)?)?)
        }
    };
    let hs = cfg.h_values();
    let mut tasks = Vec::new();
    for (bi, &beta) in cfg.beta_values().iter().enumerate() {
        for (hi, &h) in hs.iter().enumerate() {
            for replica in 0..cfg.replicas {
                tasks.push(Task { bi, hi, beta, h, replica });
            }
        }
    }
    Ok(Setup {
        domain,
        tasks,
        h_count: hs.len(),
    })
}

fn chain_config(cfg: &RunConfig) -> ChainConfig {
    let mut c = ChainConfig::new(cfg.sweeps.expect("validated"));
    c.burn_in = cfg.effective_burn_in();
    c.batches = cfg.batches;
    c
}

struct ChainResult {
    task: Task,
    center: f64,
    summary: ChainSummary,
    field: FieldSample,
}

/// Runs every task in parallel. `place` maps a task to `(window center,
/// start height)`; the disorder of a replica is shared across `(β, h)`.
fn run_tasks(
    cfg: &RunConfig,
    s: &Setup,
    chain: &ChainConfig,
    place: impl Fn(&Task) -> Result<(f64, f64)> + Sync,
) -> Result<Vec<ChainResult>> {
    s.tasks
        .par_iter()
        .map(|task| {
            let dis = DisorderField::generate(cfg.disorder, cfg.seed, task.replica, s.domain.len());
            let (center, start) = place(task)?;
            let (model, _) =
                PinningModel::quenched(s.domain.clone(), 0.0, center, task.beta, task.h, &dis)?;
            let mut c = chain.clone();
            c.start = start;
            if let Some(spec) = chain.heights {
                c.heights = Some(HeightSpec { h: task.h, ..spec });
            }
            let index = (task.bi * s.h_count + task.hi) as u64;
            let rng = stream(cfg.seed, Purpose::Chain, task.replica, index);
            let (summary, field) = run_chain(&model, &c, rng)?;
            Ok(ChainResult {
                task: *task,
                center,
                summary,
                field,
            })
        })
        .collect()
}

fn mixing_warnings(results: &[ChainResult]) -> Vec<String> {
    results
        .iter()
        .filter(|r| r.summary.batch_autocorrelation > 0.5)
        .map(|r| {
            format!(
                "slow mixing at beta={} h={} replica {}: lag-1 batch autocorrelation {:.2}",
                r.task.beta, r.task.h, r.task.replica, r.summary.batch_autocorrelation
            )
        })
        .collect()
}

fn snapshots(cfg: &RunConfig, results: &[ChainResult]) -> Vec<(String, Vec<f64>)> {
    if !cfg.snapshots {
        return Vec::new();
    }
    results
        .iter()
        .map(|r| {
            (
                format!("field_b{}_h{}_r{}", r.task.bi, r.task.hi, r.task.replica),
                r.field.values().to_vec(),
            )
        })
        .collect()
}

fn u_h(cfg: &RunConfig, beta: f64, h: f64) -> Result<f64> {
    shift_height(sigma2(cfg.d), &cfg.disorder, beta, h)
}

/// `u_h` when lifted starts are requested and `u_h` exists (`β > 0`), else `otherwise`.
fn lifted_start(cfg: &RunConfig, t: &Task, otherwise: f64) -> Result<f64> {
    if cfg.lifted_start && t.beta > 0.0 && t.h > 0.0 && t.h < 1.0 {
        u_h(cfg, t.beta, t.h)
    } else {
        Ok(otherwise)
    }
}

fn replica_means(name: &str, results: &[ChainResult], value: impl Fn(&ChainResult) -> f64) -> Table {
    let mut t = Table::new(name, &["beta", "h", "replicas", "mean", "between_se"], 2);
    let mut keys: Vec<(usize, usize)> = results.iter().map(|r| (r.task.bi, r.task.hi)).collect();
    keys.sort();
    keys.dedup();
    for (bi, hi) in keys {
        let group: Vec<&ChainResult> = results
            .iter()
            .filter(|r| r.task.bi == bi && r.task.hi == hi)
            .collect();
        let values: Vec<f64> = group.iter().map(|r| value(r)).collect();
        let e = Estimate::from_independent(&values);
        t.push(cells![group[0].task.beta, group[0].task.h, values.len(), e.mean, e.se]);
    }
    t
}

fn rho_vs_h(cfg: &RunConfig) -> Result<Outcome> {
    let s = setup(cfg, None)?;
    let results = run_tasks(cfg, &s, &chain_config(cfg), |t| {
        let center = if cfg.shifted { u_h(cfg, t.beta, t.h)? } else { 0.0 };
        Ok((center, lifted_start(cfg, t, center)?))
    })?;
    let mut t = Table::new(
        "rho",
        &["beta", "h", "replica", "center", "rho", "rho_se", "energy", "energy_se", "batch_autocorrelation"],
        3,
    );
    for r in &results {
        let m = &r.summary;
        t.push(cells![
            r.task.beta,
            r.task.h,
            r.task.replica,
            r.center,
            m.rho.mean,
            m.rho.se,
            m.energy.mean,
            m.energy.se,
            m.batch_autocorrelation
        ]);
    }
    let means = replica_means("rho_replica_mean", &results, |r| r.summary.rho.mean);
    Ok(Outcome {
        tables: vec![t, means],
        warnings: mixing_warnings(&results),
        snapshots: snapshots(cfg, &results),
        ..Default::default()
    })
}

fn free_energy(cfg: &RunConfig) -> Result<Outcome> {
    let s = setup(cfg, None)?;
    let results = run_tasks(cfg, &s, &chain_config(cfg), |t| Ok((0.0, lifted_start(cfg, t, 0.0)?)))?;
    let mut warnings = mixing_warnings(&results);
    let mut t = Table::new(
        "free_energy",
        &["beta", "h", "replica", "rho", "rho_se", "F", "F_se"],
        3,
    );
    let anchor = match cfg.anchor {
        AnchorChoice::Delocalized => Anchor::Delocalized,
        AnchorChoice::Exact => Anchor::Exact(0.0),
    };
    let betas = cfg.beta_values();
    for (bi, &beta) in betas.iter().enumerate() {
        for replica in 0..cfg.replicas {
            let mut rho: Vec<(f64, Estimate)> = results
                .iter()
                .filter(|r| r.task.bi == bi && r.task.replica == replica)
                .map(|r| (r.task.h, r.summary.rho))
                .collect();
            rho.sort_by(|a, b| a.0.total_cmp(&b.0));
            let curve = integrate_over_h(&rho, anchor)?;
            if let Some(w) = curve.warning {
                warnings.push(format!("beta={beta} replica {replica}: {w}"));
            }
            for i in monotonicity_violations(&rho) {
                warnings.push(format!(
                    "beta={beta} replica {replica}: rho drops between h={} and h={}",
                    rho[i].0,
                    rho[i + 1].0
                ));
            }
            for ((h, r), (_, f)) in rho.iter().zip(&curve.points) {
                t.push(cells![beta, *h, replica, r.mean, r.se, f.mean, f.se]);
            }
        }
    }
    Ok(Outcome {
        tables: vec![t],
        warnings,
        snapshots: snapshots(cfg, &results),
        ..Default::default()
    })
}

fn height_profile(cfg: &RunConfig) -> Result<Outcome> {
    let s = setup(cfg, None)?;
    let s2 = sigma2(cfg.d);
    // h is filled in per task
    let spec = HeightSpec::new(0.5, s2, cfg.epsilon)?;
    let chain = chain_config(cfg).with_heights(spec);
    let results = run_tasks(cfg, &s, &chain, |t| Ok((0.0, u_h(cfg, t.beta, t.h)?)))?;
    let mut t = Table::new(
        "heights",
        &[
            "beta", "h", "replica", "rho", "rho_se", "q10", "q25", "median", "q75", "q90",
            "median_over_scale", "outside_band",
        ],
        3,
    );
    let mut hist = Vec::new();
    for r in &results {
        let p = r.summary.heights.as_ref().expect("heights requested");
        let scale = s2.sqrt() * (2.0 * (1.0 / r.task.h).ln()).sqrt();
        let q = p.quantiles;
        t.push(cells![
            r.task.beta,
            r.task.h,
            r.task.replica,
            r.summary.rho.mean,
            r.summary.rho.se,
            q[0],
            q[1],
            q[2],
            q[3],
            q[4],
            q[2] / scale,
            p.outside_band
        ]);
        hist.push((r.task.bi, r.task.hi, r.task.replica, r.task.beta, p.clone()));
    }
    hist.sort_by_key(|(b, h, r, _, _)| (*b, *h, *r));
    let doc = json!(hist
        .into_iter()
        .map(|(_, _, replica, beta, p)| json!({
            "beta": beta,
            "h": p.spec.h,
            "replica": replica,
            "profile": p,
        }))
        .collect::<Vec<_>>());
    Ok(Outcome {
        tables: vec![t],
        documents: vec![("histograms".to_string(), doc)],
        warnings: mixing_warnings(&results),
        snapshots: snapshots(cfg, &results),
    })
}

fn box_diagnostics_run(cfg: &RunConfig) -> Result<Outcome> {
    let n = cfg.n.expect("validated");
    let mut table = Table::new(
        "boxes",
        &[
            "beta", "h", "replica", "rho", "elementary_boxes", "zeta_mean", "zeta_good",
            "level0_boxes", "bi_gradient_good", "harmonic_cubes", "harmonic_good",
        ],
        3,
    );
    let mut docs = Vec::new();
    let mut warnings = Vec::new();
    let mut snaps = Vec::new();
    for (hi, h) in cfg.h_values().into_iter().enumerate() {
        let hier = Hierarchy::build(n, h, cfg.d, cfg.varkappa)?;
        let dom = Arc::new(Domain::box_interior(hier.top_box())?);
        let mut s = setup(cfg, Some(dom))?;
        s.tasks.retain(|t| t.hi == hi);
        let results = run_tasks(cfg, &s, &chain_config(cfg), |t| {
            let u = u_h(cfg, t.beta, t.h)?;
            Ok((if cfg.shifted { u } else { 0.0 }, u))
        })?;
        warnings.extend(mixing_warnings(&results));
        snaps.extend(snapshots(cfg, &results));
        for r in &results {
            let thresholds = BoxThresholds {
                chi: chi(&cfg.disorder, r.task.beta)?,
                h,
                u_h: u_h(cfg, r.task.beta, h)?,
                epsilon: cfg.epsilon,
                harmonic_edge: cfg.harmonic_edge.unwrap_or(hier.elementary_edge()),
            };
            let b = box_diagnostics(&r.field, r.center, &hier, &thresholds)?;
            let zeta_mean = b.zeta.iter().sum::<f64>() / b.zeta.len().max(1) as f64;
            table.push(cells![
                r.task.beta,
                h,
                r.task.replica,
                r.summary.rho.mean,
                b.zeta.len(),
                zeta_mean,
                b.zeta_good,
                b.smooth_bi_gradient.len(),
                b.bi_gradient_good,
                b.harmonic_averages.len(),
                b.harmonic_good
            ]);
            docs.push(((r.task.bi, hi, r.task.replica), json!({
                "beta": r.task.beta,
                "h": h,
                "replica": r.task.replica,
                "edges": hier.edge_lengths(),
                "thresholds": thresholds,
                "boxes": b,
            })));
        }
    }
    docs.sort_by_key(|(k, _)| *k);
    Ok(Outcome {
        tables: vec![table],
        documents: vec![(
            "boxes".to_string(),
            json!(docs.into_iter().map(|(_, v)| v).collect::<Vec<_>>()),
        )],
        warnings,
        snapshots: snaps,
    })
}

fn bounds_suite(cfg: &RunConfig) -> Result<Outcome> {
    let mut t = Table::new(
        "binomial",
        &["side", "parameter", "n", "p", "exact", "brute_force", "bound", "holds"],
        4,
    );
    let mut warnings = Vec::new();
    for n in 1..=30u64 {
        for k in 1..=19 {
            let p = k as f64 * 0.05;
            let mut sides = vec![
                ("lower", BinomialSide::Lower { delta: 0.0 }),
                ("lower", BinomialSide::Lower { delta: 1.0 / 12.0 }),
                ("lower", BinomialSide::Lower { delta: 1.0 / 6.0 }),
                ("upper", BinomialSide::Upper { delta: 3.0 }),
                ("upper", BinomialSide::Upper { delta: 6.0 }),
            ];
            for eta in [0.25, 0.5, 1.0, 2.0] {
                if p <= 0.5f64.powf(2.0 / eta) {
                    sides.push(("eta", BinomialSide::Eta { eta }));
                }
            }
            for (name, side) in sides {
                let (param, brute) = match side {
                    BinomialSide::Lower { delta } => {
                        (delta, crate::suites::brute_tail(n, p, |j| j as f64 <= p * delta * n as f64 + 1e-9))
                    }
                    BinomialSide::Upper { delta } => {
                        (delta, crate::suites::brute_tail(n, p, |j| j as f64 >= p * delta * n as f64 - 1e-9))
                    }
                    BinomialSide::Eta { eta } => {
                        (eta, crate::suites::brute_tail(n, p, |j| j as f64 >= eta * n as f64 - 1e-9))
                    }
                };
                let c = binomial_bound(n, p, side)?;
                let holds = c.holds && brute <= c.bound * (1.0 + 1e-12);
                if !holds {
                    warnings.push(format!("{name} bound fails at n={n} p={p} parameter {param}"));
                }
                t.push(cells![name, param, n, p, c.exact, brute, c.bound, if holds { "yes" } else { "no" }]);
            }
        }
    }
    let mut cut = Table::new("cutoff", &["h", "K_h", "tail_abs_mean", "h_cubed"], 1);
    for h in cfg.h_values() {
        let k = crate::scalar::disorder_cutoff(&cfg.disorder, h)?;
        cut.push(cells![h, k, cfg.disorder.tail_abs_mean(k), h.powi(3)]);
    }
    Ok(Outcome {
        tables: vec![t, cut],
        warnings,
        ..Default::default()
    })
}
