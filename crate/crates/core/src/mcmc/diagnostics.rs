use serde::Serialize;

use crate::decomposition::build_telescoping;
use crate::error::Result;
use crate::gaussian::{bi_gradient, harmonic_average, FieldSample};
use crate::lattice::{BoxRegion, Hierarchy};

/// Thresholds of the good-box events.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoxThresholds {
    pub chi: f64,
    pub h: f64,
    pub u_h: f64,
    pub epsilon: f64,
    /// Edge of the cubes carrying harmonic averages.
    pub harmonic_edge: i64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoxDiagnostics {
    /// Contact fraction per elementary box.
    pub zeta: Vec<f64>,
    /// Fraction of elementary boxes with `ζ/(χh) ∈ [1, 3]`.
    pub zeta_good: f64,
    /// `max_{e,g} sup |∇_{eg} ψ̄|` per level-0 box, `ψ̄ = E[φ | 𝔾_0]`.
    pub smooth_bi_gradient: Vec<f64>,
    /// Fraction of level-0 boxes whose sup-norm is below `N_0^{-2}`.
    pub bi_gradient_good: f64,
    /// `H_L(z)` for every cube `C_L^z ⊂ Λ_N`.
    pub harmonic_averages: Vec<f64>,
    /// Fraction with `|H_L(z)| > (1 - ε/2) u_h`.
    pub harmonic_good: f64,
}

/// `ζ = (#sites with |φ - u| ≤ 1) / |B|` for each box.
pub fn contact_fractions(phi: &FieldSample, center: f64, boxes: &[BoxRegion]) -> Vec<f64> {
    boxes
        .iter()
        .map(|b| {
            let hits = b.sites().filter(|x| (phi.at(x) - center).abs() <= 1.0).count();
            hits as f64 / b.volume() as f64
        })
        .collect()
}

/// `max_{e,g} max_x |∇_{eg} f(x)|` over `x` with the whole stencil in `b`.
pub fn bi_gradient_sup(f: &FieldSample, b: &BoxRegion) -> Result<f64> {
    let d = b.dim();
    let mut worst: f64 = 0.0;
    for x in b.sites() {
        for e in 0..d {
            if x[e] + 1 > b.hi()[e] {
                continue;
            }
            for g in e..d {
                if x[g] + 1 > b.hi()[g] {
                    continue;
                }
                worst = worst.max(bi_gradient(|y| Some(f.at(y)), &x, e, g)?.abs());
            }
        }
    }
    Ok(worst)
}

fn fraction(flags: impl Iterator<Item = bool>) -> f64 {
    let (mut hit, mut all) = (0usize, 0usize);
    for f in flags {
        all += 1;
        hit += f as usize;
    }
    if all == 0 {
        f64::NAN
    } else {
        hit as f64 / all as f64
    }
}

/// Per-box record of one field configuration on the interior of the
/// hierarchy's top box.
pub fn box_diagnostics(
    phi: &FieldSample,
    center: f64,
    hierarchy: &Hierarchy,
    t: &BoxThresholds,
) -> Result<BoxDiagnostics> {
    let zeta = contact_fractions(phi, center, &hierarchy.elementary_boxes());
    let ratio = t.chi * t.h;
    let zeta_good = fraction(zeta.iter().map(|z| (1.0..=3.0).contains(&(z / ratio))));

    let smooth = build_telescoping(phi, hierarchy)?.smooth;
    let smooth_bi_gradient: Vec<f64> = hierarchy
        .level0_boxes()
        .iter()
        .map(|b| bi_gradient_sup(&smooth, b))
        .collect::<Result<_>>()?;
    let n0 = hierarchy.edge_lengths()[0] as f64;
    let bi_gradient_good = fraction(smooth_bi_gradient.iter().map(|s| *s < n0.powi(-2)));

    // Λ_N = ⟦0, N⟧^d, so the cubes C_L^z = zL + ⟦0, L⟧^d start at the origin
    let top = hierarchy.top_box();
    let l = t.harmonic_edge;
    let per_side = top.edge(0) / l;
    let mut harmonic_averages = Vec::new();
    if per_side > 0 {
        let zs = BoxRegion::new(vec![0; top.dim()], vec![per_side - 1; top.dim()])?;
        for z in zs.sites() {
            harmonic_averages.push(harmonic_average(phi, top, &z, l)?);
        }
    }
    let harmonic_good = fraction(
        harmonic_averages
            .iter()
            .map(|v| v.abs() > (1.0 - 0.5 * t.epsilon) * t.u_h),
    );
    Ok(BoxDiagnostics {
        zeta,
        zeta_good,
        smooth_bi_gradient,
        bi_gradient_good,
        harmonic_averages,
        harmonic_good,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::Domain;
    use std::sync::Arc;

    fn setup() -> (Hierarchy, Arc<Domain>) {
        // N_0 = 14, elementary edge 2
        let h = Hierarchy::build(32, 0.5, 3, 0.9).unwrap();
        let dom = Arc::new(Domain::box_interior(h.top_box()).unwrap());
        (h, dom)
    }

    fn thresholds() -> BoxThresholds {
        BoxThresholds {
            chi: 0.29,
            h: 0.9,
            u_h: 1.0,
            epsilon: 0.2,
            harmonic_edge: 6,
        }
    }

    #[test]
    fn constant_field_has_equal_zeta() {
        let (h, dom) = setup();
        for (u, expect) in [(0.5, 1.0), (1.5, 0.0)] {
            let phi = FieldSample::from_fn(dom.clone(), u, |_| u);
            let r = box_diagnostics(&phi, 0.0, &h, &thresholds()).unwrap();
            assert!(!r.zeta.is_empty());
            assert!(r.zeta.iter().all(|z| *z == expect));
            assert!(r.harmonic_averages.iter().all(|v| (v - u).abs() < 1e-12));
        }
    }

    #[test]
    fn affine_field_has_no_bi_gradient() {
        let (_, dom) = setup();
        let f = |x: &[i64]| 0.3 * x[0] as f64 - 0.2 * x[1] as f64 + 0.05 * x[2] as f64 + 1.0;
        let phi = FieldSample::from_fn(dom.clone(), 0.0, f);
        // affine data everywhere, boundary included
        let b = BoxRegion::cube(&[2, 2, 2], 5).unwrap();
        assert!(bi_gradient_sup(&phi, &b).unwrap() < 1e-12);
    }

    #[test]
    fn zeta_counts_shifted_window() {
        let (h, dom) = setup();
        let phi = FieldSample::from_fn(dom, 0.0, |x| if x[0] % 2 == 0 { 2.0 } else { 0.0 });
        let boxes = h.elementary_boxes();
        let z = contact_fractions(&phi, 2.0, &boxes);
        for (b, v) in boxes.iter().zip(&z) {
            let even = b.sites().filter(|x| phi.at(x) == 2.0).count();
            let near = b.sites().filter(|x| (phi.at(x) - 2.0).abs() <= 1.0).count();
            assert_eq!(even, near);
            assert_eq!(*v, near as f64 / b.volume() as f64);
        }
    }
}
