use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A lattice point. Coordinates are stored in a plain vector since geometry
/// code is never the hot path; the samplers work on flat indices.
pub type Site = Vec<i64>;

/// Axis-aligned integer box `⟦lo, hi⟧` with inclusive corners.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoxRegion {
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return invalid("corner dimensions must agree and be positive");
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return invalid(format!("empty box: lo {lo:?} hi {hi:?}"));
        }
        let mut vol: u128 = 1;
        for (a, b) in lo.iter().zip(&hi) {
            vol = vol.saturating_mul((b - a + 1) as u128);
        }
        if vol > usize::MAX as u128 / 16 {
            return invalid("box volume overflows");
        }
        Ok(Self { lo, hi })
    }

    /// The cube `lo + ⟦0, n⟧^d`.
    pub fn cube(lo: &[i64], n: i64) -> Result<Self> {
        Self::new(lo.to_vec(), lo.iter().map(|a| a + n).collect())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi
    }

    /// `hi[i] - lo[i]`; the edge length in the `⟦0, N⟧` convention.
    pub fn edge(&self, i: usize) -> i64 {
        self.hi[i] - self.lo[i]
    }

    pub fn side(&self, i: usize) -> usize {
        (self.edge(i) + 1) as usize
    }

    pub fn volume(&self) -> usize {
        (0..self.dim()).map(|i| self.side(i)).product()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| a <= v && v <= b)
    }

    /// Row-major index with the last coordinate varying fastest.
    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let mut idx = 0usize;
        for i in 0..self.dim() {
            idx = idx * self.side(i) + (x[i] - self.lo[i]) as usize;
        }
        Some(idx)
    }

    pub fn site_at(&self, mut idx: usize) -> Site {
        let d = self.dim();
        let mut x = vec![0; d];
        for i in (0..d).rev() {
            let s = self.side(i);
            x[i] = self.lo[i] + (idx % s) as i64;
            idx /= s;
        }
        x
    }

    /// Sites in row-major order.
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.volume()).map(move |k| self.site_at(k))
    }

    /// `⟦lo+1, hi-1⟧`, or `None` when some edge is below 2.
    pub fn interior(&self) -> Option<BoxRegion> {
        if (0..self.dim()).any(|i| self.edge(i) < 2) {
            return None;
        }
        Some(BoxRegion {
            lo: self.lo.iter().map(|a| a + 1).collect(),
            hi: self.hi.iter().map(|b| b - 1).collect(),
        })
    }

    pub fn on_inner_boundary(&self, x: &[i64]) -> bool {
        self.contains(x)
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .any(|(v, (a, b))| v == a || v == b)
    }

    pub fn inner_boundary(&self) -> Vec<Site> {
        self.sites().filter(|x| self.on_inner_boundary(x)).collect()
    }

    pub fn inner_boundary_len(&self) -> usize {
        self.volume() - self.interior().map_or(0, |b| b.volume())
    }

    /// Center rounded down in every coordinate.
    pub fn center(&self) -> Site {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| a + (b - a).div_euclid(2))
            .collect()
    }

    pub fn translate(&self, shift: &[i64]) -> BoxRegion {
        BoxRegion {
            lo: self.lo.iter().zip(shift).map(|(a, s)| a + s).collect(),
            hi: self.hi.iter().zip(shift).map(|(a, s)| a + s).collect(),
        }
    }

    pub fn intersects(&self, other: &BoxRegion) -> bool {
        (0..self.dim()).all(|i| self.lo[i] <= other.hi[i] && other.lo[i] <= self.hi[i])
    }

    /// Grow by `r` in every direction.
    pub fn pad(&self, r: i64) -> BoxRegion {
        BoxRegion {
            lo: self.lo.iter().map(|a| a - r).collect(),
            hi: self.hi.iter().map(|b| b + r).collect(),
        }
    }
}

/// `Λ_N = ⟦0, N⟧^d`, rejected when the interior `⟦1, N-1⟧^d` is empty.
pub fn build_box(n: i64, d: usize) -> Result<BoxRegion> {
    if d == 0 {
        return invalid("dimension must be positive");
    }
    if n < 2 {
        return invalid(format!("edge length {n} leaves an empty interior"));
    }
    BoxRegion::cube(&vec![0; d], n)
}

/// Sorted, deduplicated set of sites with binary-search membership.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteSet {
    sites: Vec<Site>,
}

impl SiteSet {
    pub fn new(mut sites: Vec<Site>) -> Self {
        sites.sort_unstable();
        sites.dedup();
        Self { sites }
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        self.sites.binary_search_by(|s| s.as_slice().cmp(x)).is_ok()
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Site> {
        self.sites.iter()
    }

    pub fn as_slice(&self) -> &[Site] {
        &self.sites
    }

    pub fn union(&self, other: &SiteSet) -> SiteSet {
        let mut all = self.sites.clone();
        all.extend(other.sites.iter().cloned());
        SiteSet::new(all)
    }

    pub fn is_subset(&self, other: &SiteSet) -> bool {
        self.sites.iter().all(|x| other.contains(x))
    }
}

impl FromIterator<Site> for SiteSet {
    fn from_iter<T: IntoIterator<Item = Site>>(iter: T) -> Self {
        SiteSet::new(iter.into_iter().collect())
    }
}

pub fn l1_norm(x: &[i64], y: &[i64]) -> i64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()
}

/// ℓ1 distance from `x` to the nearest site of `a`.
pub fn l1_distance<'a>(x: &[i64], a: impl IntoIterator<Item = &'a Site>) -> Result<i64> {
    a.into_iter()
        .map(|y| l1_norm(x, y))
        .min()
        .ok_or_else(|| crate::Error::InvalidArgument("distance to an empty set".into()))
}

/// The `2d` unit steps `±e_i`.
pub fn unit_steps(d: usize) -> Vec<Site> {
    let mut out = Vec::with_capacity(2 * d);
    for i in 0..d {
        for s in [-1, 1] {
            let mut e = vec![0; d];
            e[i] = s;
            out.push(e);
        }
    }
    out
}

pub fn add(x: &[i64], y: &[i64]) -> Site {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

pub fn unit(d: usize, i: usize) -> Site {
    let mut e = vec![0; d];
    e[i] = 1;
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_box_has_one_interior_site() {
        let b = build_box(2, 3).unwrap();
        let inner = b.interior().unwrap();
        assert_eq!(inner.volume(), 1);
        assert_eq!(inner.site_at(0), vec![1, 1, 1]);
    }

    #[test]
    fn box_counts() {
        let b = build_box(4, 3).unwrap();
        assert_eq!(b.interior().unwrap().volume(), 27);
        assert_eq!(b.inner_boundary().len(), 98);
        assert_eq!(b.inner_boundary_len(), 98);
        assert!(build_box(1, 3).is_err());
    }

    #[test]
    fn index_roundtrip() {
        let b = BoxRegion::new(vec![-2, 3, 0], vec![1, 5, 4]).unwrap();
        for k in 0..b.volume() {
            assert_eq!(b.index_of(&b.site_at(k)), Some(k));
        }
        assert_eq!(b.index_of(&[2, 3, 0]), None);
    }

    #[test]
    fn distances() {
        let a = vec![vec![1, 2, 0]];
        assert_eq!(l1_distance(&[0, 0, 0], &a).unwrap(), 3);
        assert_eq!(l1_distance(&[1, 2, 0], &a).unwrap(), 0);
        let empty: Vec<Site> = vec![];
        assert!(l1_distance(&[0, 0, 0], &empty).is_err());
        let b = build_box(10, 3).unwrap();
        assert_eq!(l1_distance(&[5, 5, 5], &b.inner_boundary()).unwrap(), 5);
    }

    #[test]
    fn interior_and_boundary_partition_the_box() {
        let b = BoxRegion::new(vec![0, 0, 0], vec![3, 5, 4]).unwrap();
        let inner = b.interior().unwrap();
        for x in b.sites() {
            assert_ne!(inner.contains(&x), b.on_inner_boundary(&x));
        }
    }

    #[test]
    fn site_set_membership() {
        let s = SiteSet::new(vec![vec![2, 1], vec![0, 0], vec![2, 1]]);
        assert_eq!(s.len(), 2);
        assert!(s.contains(&[2, 1]));
        assert!(!s.contains(&[1, 2]));
    }
}
