//! Nested multiscale covering of `Λ_N` by boxes separated by conditioning grids.
//!
//! Levels are indexed bottom-up: level 0 holds the `K = 2^{dJ}` smallest boxes and
//! level `J` is `Λ_N` itself. The walls of a box are its inner boundary together
//! with the `d` bisecting hyperplanes `x_i = lo_i + ⌊n/2⌋`. The cumulative grid
//! `𝔾_j` is `∂Λ_N` plus the walls of every box at levels `j+1..=J`; it separates
//! the level-`j` boxes from one another.

use serde::Serialize;

use super::region::{BoxRegion, Site, SiteSet};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct Hierarchy {
    dim: usize,
    n: i64,
    h: f64,
    varkappa: f64,
    threshold: f64,
    /// `N_0..=N_J`.
    edge_lengths: Vec<i64>,
    /// `levels[j]` lists the level-`j` boxes. Children of `levels[j][k]` are
    /// `levels[j-1][k*2^d..(k+1)*2^d]`.
    levels: Vec<Vec<BoxRegion>>,
    elementary_edge: i64,
}

/// `(log(1/h)/h)^{2/d}`, the scale that sizes the level-0 boxes.
pub fn box_scale(h: f64, d: usize) -> f64 {
    ((1.0 / h).ln() / h).powf(2.0 / d as f64)
}

/// One step of the size recursion: `⌊(n - 4⌊n^{1-ϰ}⌋)/2⌋`.
pub fn next_edge(n: i64, varkappa: f64) -> i64 {
    let s = (n as f64).powf(1.0 - varkappa).floor() as i64;
    (n - 4 * s).div_euclid(2)
}

/// `6/(1 - 2^{-ϰ})`.
pub fn spacing_constant(varkappa: f64) -> f64 {
    6.0 / (1.0 - 2f64.powf(-varkappa))
}

fn bisector(b: &BoxRegion, i: usize) -> i64 {
    b.lo()[i] + b.edge(i).div_euclid(2)
}

/// True when `x ∈ B` lies on the inner boundary or a bisecting hyperplane of `B`.
pub fn on_walls(b: &BoxRegion, x: &[i64]) -> bool {
    b.contains(x)
        && (0..b.dim()).any(|i| x[i] == b.lo()[i] || x[i] == b.hi()[i] || x[i] == bisector(b, i))
}

/// The `2^d` chambers cut from `B` by its bisecting hyperplanes, ordered by the
/// bitmask of upper halves (bit `i` set means the upper half in direction `i`).
pub fn chambers(b: &BoxRegion) -> Vec<BoxRegion> {
    let d = b.dim();
    (0..1usize << d)
        .map(|mask| {
            let mut lo = Vec::with_capacity(d);
            let mut hi = Vec::with_capacity(d);
            for i in 0..d {
                let mid = bisector(b, i);
                if mask >> i & 1 == 0 {
                    lo.push(b.lo()[i]);
                    hi.push(mid);
                } else {
                    lo.push(mid);
                    hi.push(b.hi()[i]);
                }
            }
            BoxRegion::new(lo, hi).expect("chamber of a valid box")
        })
        .collect()
}

/// Walls of `B` as an explicit site set.
pub fn walls(b: &BoxRegion) -> SiteSet {
    b.sites().filter(|x| on_walls(b, x)).collect()
}

impl Hierarchy {
    pub fn build(n: i64, h: f64, d: usize, varkappa: f64) -> Result<Self> {
        if d < 3 {
            return Err(Error::InvalidArgument(format!("dimension {d} < 3")));
        }
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::InvalidArgument(format!("h = {h} outside (0, 1)")));
        }
        if !(varkappa > 0.0 && varkappa < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "varkappa = {varkappa} outside (0, 1)"
            )));
        }
        let threshold = box_scale(h, d);
        if (n as f64) <= 7.0 * threshold {
            return Err(Error::NoLevels {
                n,
                threshold: 7.0 * threshold,
            });
        }
        let mut tilde = vec![n];
        loop {
            let next = next_edge(*tilde.last().unwrap(), varkappa);
            if (next as f64) <= 7.0 * threshold {
                break;
            }
            tilde.push(next);
        }
        let j_top = tilde.len() - 1;

        let mut top_down: Vec<Vec<BoxRegion>> = vec![vec![BoxRegion::cube(&vec![0; d], n)?]];
        for t in 1..=j_top {
            let m = tilde[t];
            let mut next_level = Vec::with_capacity(top_down[t - 1].len() << d);
            for parent in &top_down[t - 1] {
                for ch in chambers(parent) {
                    let lo: Vec<i64> = (0..d)
                        .map(|i| ch.lo()[i] + (ch.edge(i) - m).div_euclid(2))
                        .collect();
                    let child = BoxRegion::cube(&lo, m)?;
                    let strictly_inside =
                        (0..d).all(|i| child.lo()[i] > ch.lo()[i] && child.hi()[i] < ch.hi()[i]);
                    if !strictly_inside {
                        return Err(Error::InvalidArgument(format!(
                            "box of edge {m} does not fit strictly inside a chamber of edge {}",
                            ch.edge(0)
                        )));
                    }
                    next_level.push(child);
                }
            }
            top_down.push(next_level);
        }
        top_down.reverse();
        let mut edge_lengths = tilde;
        edge_lengths.reverse();

        Ok(Self {
            dim: d,
            n,
            h,
            varkappa,
            threshold,
            elementary_edge: edge_lengths[0] / 6,
            edge_lengths,
            levels: top_down,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn top_edge(&self) -> i64 {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn varkappa(&self) -> f64 {
        self.varkappa
    }

    /// `(log(1/h)/h)^{2/d}`.
    pub fn scale(&self) -> f64 {
        self.threshold
    }

    /// `J`, the index of the top level.
    pub fn num_levels(&self) -> usize {
        self.edge_lengths.len() - 1
    }

    pub fn edge_lengths(&self) -> &[i64] {
        &self.edge_lengths
    }

    pub fn level_boxes(&self, j: usize) -> &[BoxRegion] {
        &self.levels[j]
    }

    pub fn top_box(&self) -> &BoxRegion {
        &self.levels[self.num_levels()][0]
    }

    pub fn level0_boxes(&self) -> &[BoxRegion] {
        &self.levels[0]
    }

    /// `K = 2^{dJ}`.
    pub fn num_level0(&self) -> usize {
        self.levels[0].len()
    }

    /// Edge `⌊N_0/6⌋` of the elementary boxes.
    pub fn elementary_edge(&self) -> i64 {
        self.elementary_edge
    }

    /// `K̄ = 6^d K`.
    pub fn num_elementary(&self) -> usize {
        6usize.pow(self.dim as u32) * self.num_level0()
    }

    /// The `6^d` elementary boxes of one level-0 box. Each has `N̄` sites per
    /// side, so boxes of the same parent are pairwise disjoint.
    pub fn elementary_boxes_of(&self, k: usize) -> Vec<BoxRegion> {
        let parent = &self.levels[0][k];
        let d = self.dim;
        let e = self.elementary_edge;
        if e == 0 {
            return Vec::new();
        }
        let per = 6usize.pow(d as u32);
        (0..per)
            .map(|mut idx| {
                let mut lo = Vec::with_capacity(d);
                for i in 0..d {
                    lo.push(parent.lo()[i] + e * (idx % 6) as i64);
                    idx /= 6;
                }
                let hi = lo.iter().map(|a| a + e - 1).collect();
                BoxRegion::new(lo, hi).expect("elementary box")
            })
            .collect()
    }

    pub fn elementary_boxes(&self) -> Vec<BoxRegion> {
        (0..self.num_level0())
            .flat_map(|k| self.elementary_boxes_of(k))
            .collect()
    }

    /// Index of the level-`j` box containing `x`, if any.
    pub fn box_containing(&self, j: usize, x: &[i64]) -> Option<usize> {
        let mut k = 0usize;
        if !self.top_box().contains(x) {
            return None;
        }
        let fan = 1usize << self.dim;
        for level in (j..self.num_levels()).rev() {
            let first = k * fan;
            k = (first..first + fan).find(|&c| self.levels[level][c].contains(x))?;
        }
        Some(k)
    }

    /// Membership in the cumulative grid `𝔾_j`, restricted to `Λ_N`.
    pub fn in_grid(&self, j: usize, x: &[i64]) -> bool {
        let top = self.top_box();
        if !top.contains(x) {
            return false;
        }
        if top.on_inner_boundary(x) {
            return true;
        }
        let fan = 1usize << self.dim;
        let mut k = 0usize;
        for level in ((j + 1)..=self.num_levels()).rev() {
            let b = &self.levels[level][k];
            if on_walls(b, x) {
                return true;
            }
            let first = k * fan;
            match (first..first + fan).find(|&c| self.levels[level - 1][c].contains(x)) {
                Some(c) => k = c,
                None => return false,
            }
        }
        false
    }

    /// `𝔾_j ∩ Λ_N` as an explicit site set. Memory grows like `N^{d-1}`.
    pub fn grid(&self, j: usize) -> SiteSet {
        let top = self.top_box();
        let mut sites: Vec<Site> = top.inner_boundary();
        for level in (j + 1)..=self.num_levels() {
            for b in &self.levels[level] {
                sites.extend(b.sites().filter(|x| on_walls(b, x)));
            }
        }
        SiteSet::new(sites)
    }

    /// `G_j`: walls of the level-`j` boxes.
    pub fn level_grid(&self, j: usize) -> SiteSet {
        let mut sites = Vec::new();
        for b in &self.levels[j] {
            sites.extend(b.sites().filter(|x| on_walls(b, x)));
        }
        SiteSet::new(sites)
    }

    /// Fraction of `Λ_N` covered by level-0 boxes, counting each box of edge `n`
    /// as `n^d` cells.
    pub fn coverage_fraction(&self) -> f64 {
        let d = self.dim as i32;
        self.num_level0() as f64 * (self.edge_lengths[0] as f64).powi(d) / (self.n as f64).powi(d)
    }

    /// Lower bound `1 - 2d C_ϰ N_0^{-ϰ}` for the coverage.
    pub fn coverage_bound(&self) -> f64 {
        1.0 - 2.0
            * self.dim as f64
            * spacing_constant(self.varkappa)
            * (self.edge_lengths[0] as f64).powf(-self.varkappa)
    }

    /// Checks the structural invariants and the size bounds; returns the list of
    /// violations (empty when everything holds).
    pub fn check(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let n0 = self.edge_lengths[0];
        let c_k = spacing_constant(self.varkappa);
        for (j, &nj) in self.edge_lengths.iter().enumerate() {
            if nj < (1i64 << j) * n0 {
                bad.push(format!("N_{j} = {nj} < 2^{j} N_0 = {}", (1i64 << j) * n0));
            }
            let upper =
                (1.0 + c_k * (n0 as f64).powf(-self.varkappa)) * (1u64 << j) as f64 * n0 as f64;
            if nj as f64 > upper {
                bad.push(format!("N_{j} = {nj} > {upper:.3}"));
            }
        }
        let c = self.threshold;
        if (n0 as f64) < 7.0 * c {
            bad.push(format!("N_0 = {n0} < 7c = {:.3}", 7.0 * c));
        }
        if (n0 as f64) > 15.0 * c {
            bad.push(format!("N_0 = {n0} > 15c = {:.3}", 15.0 * c));
        }
        let nb = self.elementary_edge as f64;
        if nb < c || nb > 3.0 * c {
            bad.push(format!(
                "elementary edge {nb} outside [{c:.3}, {:.3}]",
                3.0 * c
            ));
        }
        let fan = 1usize << self.dim;
        for j in 0..self.num_levels() {
            if self.levels[j].len() != self.levels[j + 1].len() * fan {
                bad.push(format!("level {j} has {} boxes", self.levels[j].len()));
            }
            for (p, parent) in self.levels[j + 1].iter().enumerate() {
                let kids = &self.levels[j][p * fan..(p + 1) * fan];
                let chs = chambers(parent);
                for (a, kid) in kids.iter().enumerate() {
                    let ch = &chs[a];
                    let inside =
                        (0..self.dim).all(|i| kid.lo()[i] > ch.lo()[i] && kid.hi()[i] < ch.hi()[i]);
                    if !inside {
                        bad.push(format!("level-{j} box {a} of parent {p} touches the grid"));
                    }
                    for other in &kids[a + 1..] {
                        if kid.intersects(other) {
                            bad.push(format!("level-{j} boxes of parent {p} overlap"));
                        }
                    }
                }
            }
        }
        bad
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Smallest top edge `N` whose hierarchy has exactly `levels` levels above level 0.
pub fn minimal_edge_for_levels(h: f64, d: usize, varkappa: f64, levels: usize) -> i64 {
    let c = box_scale(h, d);
    let count = |n: i64| -> Option<usize> {
        if (n as f64) <= 7.0 * c {
            return None;
        }
        let mut j = 0;
        let mut cur = n;
        loop {
            let next = next_edge(cur, varkappa);
            if (next as f64) <= 7.0 * c {
                return Some(j);
            }
            j += 1;
            cur = next;
        }
    };
    let mut n = (7.0 * c).floor() as i64 + 1;
    loop {
        if count(n) == Some(levels) {
            return n;
        }
        n += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recursion_step() {
        assert_eq!(next_edge(1000, 0.5), 438);
    }

    #[test]
    fn spacing_constant_half() {
        assert!((spacing_constant(0.5) - 20.485).abs() < 1e-3);
    }

    #[test]
    fn scale_at_tenth() {
        let c = box_scale(0.1, 3);
        assert!((c - 8.09).abs() < 0.01);
        assert_eq!((7.0 * c).ceil() as i64, 57);
        assert_eq!((15.0 * c).floor() as i64, 121);
    }

    #[test]
    fn too_small_is_rejected() {
        assert!(matches!(
            Hierarchy::build(40, 0.1, 3, 0.5),
            Err(Error::NoLevels { .. })
        ));
    }

    #[test]
    fn degenerate_single_level() {
        let h = Hierarchy::build(60, 0.1, 3, 0.5).unwrap();
        assert_eq!(h.num_levels(), 0);
        assert_eq!(h.coverage_fraction(), 1.0);
        assert_eq!(h.num_level0(), 1);
        assert_eq!(h.num_elementary(), 216);
    }

    #[test]
    fn grid_membership_matches_materialized_grid() {
        let h = Hierarchy::build(24, 0.9, 3, 0.9).unwrap();
        assert_eq!(h.num_levels(), 2);
        assert!(h
            .check()
            .iter()
            .all(|m| m.contains("N_0") || m.contains("elementary")));
        for j in 0..=h.num_levels() {
            let g = h.grid(j);
            for x in h.top_box().sites() {
                assert_eq!(g.contains(&x), h.in_grid(j, &x), "j={j} x={x:?}");
            }
        }
        for j in 0..h.num_levels() {
            assert!(h.grid(j + 1).is_subset(&h.grid(j)));
            let g = h.grid(j);
            for b in h.level_boxes(j) {
                assert!(b.sites().all(|x| !g.contains(&x)));
            }
        }
    }

    #[test]
    fn elementary_boxes_are_disjoint() {
        let h = Hierarchy::build(121, 0.1, 3, 0.5).unwrap();
        let boxes = h.elementary_boxes_of(0);
        assert_eq!(boxes.len(), 216);
        for (a, b) in boxes.iter().enumerate() {
            assert!(h.level0_boxes()[0].contains(b.lo()) && h.level0_boxes()[0].contains(b.hi()));
            for c in &boxes[a + 1..] {
                assert!(!b.intersects(c));
            }
        }
    }

    #[test]
    fn minimal_edges_give_requested_depth() {
        for h in [0.05, 0.1] {
            for levels in 1..=3 {
                let n = minimal_edge_for_levels(h, 3, 0.5, levels);
                let hier = Hierarchy::build(n, h, 3, 0.5).unwrap();
                assert_eq!(hier.num_levels(), levels);
                assert!(hier.check().is_empty(), "{:?}", hier.check());
                assert!(hier.coverage_fraction() >= hier.coverage_bound());
            }
        }
    }
}
