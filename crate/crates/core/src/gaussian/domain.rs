use crate::error::{invalid, Error, Result};
use crate::lattice::{BoxRegion, Site};

pub(crate) const NONE: u32 = u32::MAX;

/// A finite set of interior lattice sites. Every neighbour outside the set is
/// exterior: it carries fixed boundary data and does not enter the precision
/// matrix. Sites are kept in lexicographic order, which is row-major order
/// for boxes.
#[derive(Clone, Debug)]
pub struct Domain {
    dim: usize,
    sites: Vec<Site>,
    bbox: BoxRegion,
    lookup: Vec<u32>,
    nbrs: Vec<u32>,
    exterior: Vec<u8>,
}

impl Domain {
    pub fn from_sites(dim: usize, mut sites: Vec<Site>) -> Result<Self> {
        if sites.is_empty() {
            return invalid("domain needs at least one site");
        }
        if sites.iter().any(|x| x.len() != dim) {
            return invalid("site dimension mismatch");
        }
        sites.sort_unstable();
        sites.dedup();
        if sites.len() >= NONE as usize {
            return Err(Error::TooLarge {
                sites: sites.len(),
                limit: NONE as usize - 1,
            });
        }
        let mut lo = sites[0].clone();
        let mut hi = sites[0].clone();
        for x in &sites {
            for i in 0..dim {
                lo[i] = lo[i].min(x[i]);
                hi[i] = hi[i].max(x[i]);
            }
        }
        let bbox = BoxRegion::new(lo, hi)?.pad(1);
        let mut lookup = vec![NONE; bbox.volume()];
        for (k, x) in sites.iter().enumerate() {
            lookup[bbox.index_of(x).unwrap()] = k as u32;
        }
        let two_d = 2 * dim;
        let mut nbrs = vec![NONE; sites.len() * two_d];
        let mut exterior = vec![0u8; sites.len()];
        let mut y = vec![0i64; dim];
        for (k, x) in sites.iter().enumerate() {
            for i in 0..dim {
                for (s, step) in [-1i64, 1].into_iter().enumerate() {
                    y.copy_from_slice(x);
                    y[i] += step;
                    let j = lookup[bbox.index_of(&y).unwrap()];
                    nbrs[k * two_d + 2 * i + s] = j;
                    if j == NONE {
                        exterior[k] += 1;
                    }
                }
            }
        }
        Ok(Self {
            dim,
            sites,
            bbox,
            lookup,
            nbrs,
            exterior,
        })
    }

    /// All sites of `b` are interior.
    pub fn from_box(b: &BoxRegion) -> Result<Self> {
        Self::from_sites(b.dim(), b.sites().collect())
    }

    /// The interior `⟦lo+1, hi-1⟧` of `b`; the inner boundary is exterior.
    pub fn box_interior(b: &BoxRegion) -> Result<Self> {
        let inner = b
            .interior()
            .ok_or_else(|| Error::InvalidArgument("box has an empty interior".into()))?;
        Self::from_box(&inner)
    }

    /// Sites of `self` not selected by `removed`.
    pub fn without(&self, removed: impl Fn(&[i64]) -> bool) -> Result<Self> {
        Self::from_sites(
            self.dim,
            self.sites.iter().filter(|x| !removed(x)).cloned().collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, k: usize) -> &[i64] {
        &self.sites[k]
    }

    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        let k = *self.lookup.get(self.bbox.index_of(x)?)?;
        (k != NONE).then_some(k as usize)
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        self.index_of(x).is_some()
    }

    /// Neighbour slots of site `k`, `NONE` marking exterior neighbours; slot
    /// `2i` is `-e_i` and slot `2i+1` is `+e_i`.
    pub(crate) fn neighbor_slots(&self, k: usize) -> &[u32] {
        let two_d = 2 * self.dim;
        &self.nbrs[k * two_d..(k + 1) * two_d]
    }

    pub(crate) fn neighbor_table(&self) -> &[u32] {
        &self.nbrs
    }

    pub fn neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbor_slots(k)
            .iter()
            .filter(|&&j| j != NONE)
            .map(|&j| j as usize)
    }

    /// Number of exterior neighbours of site `k`.
    pub fn exterior_count(&self, k: usize) -> usize {
        self.exterior[k] as usize
    }

    /// `y = Q x` with `Q = -Δ` under zero exterior data.
    pub fn apply_precision(&self, x: &[f64], y: &mut [f64]) {
        let diag = 2.0 * self.dim as f64;
        let two_d = 2 * self.dim;
        for k in 0..self.len() {
            let mut acc = diag * x[k];
            for &j in &self.nbrs[k * two_d..(k + 1) * two_d] {
                if j != NONE {
                    acc -= x[j as usize];
                }
            }
            y[k] = acc;
        }
    }

    /// Connected components (nearest-neighbour adjacency), as a label per site.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let mut label = vec![usize::MAX; self.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.len() {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            stack.push(start);
            while let Some(k) = stack.pop() {
                for j in self.neighbors(k).collect::<Vec<_>>() {
                    if label[j] == usize::MAX {
                        label[j] = count;
                        stack.push(j);
                    }
                }
            }
            count += 1;
        }
        (count, label)
    }

    /// Sites outside the domain that neighbour it.
    pub fn outer_boundary(&self) -> Vec<Site> {
        let mut out = Vec::new();
        for (k, x) in self.sites.iter().enumerate() {
            for (slot, &j) in self.neighbor_slots(k).iter().enumerate() {
                if j == NONE {
                    let mut y = x.clone();
                    y[slot / 2] += if slot % 2 == 0 { -1 } else { 1 };
                    out.push(y);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_box;

    #[test]
    fn neighbours_of_a_box_interior() {
        let dom = Domain::box_interior(&build_box(4, 3).unwrap()).unwrap();
        assert_eq!(dom.len(), 27);
        let c = dom.index_of(&[2, 2, 2]).unwrap();
        assert_eq!(dom.neighbors(c).count(), 6);
        assert_eq!(dom.exterior_count(c), 0);
        let corner = dom.index_of(&[1, 1, 1]).unwrap();
        assert_eq!(dom.exterior_count(corner), 3);
        assert_eq!(dom.outer_boundary().len(), 54);
    }

    #[test]
    fn precision_row_sums() {
        let dom = Domain::from_sites(3, vec![vec![0, 0, 0], vec![1, 0, 0]]).unwrap();
        let mut y = vec![0.0; 2];
        dom.apply_precision(&[1.0, 1.0], &mut y);
        assert_eq!(y, vec![5.0, 5.0]);
    }

    #[test]
    fn components_split() {
        let dom = Domain::from_sites(3, vec![vec![0, 0, 0], vec![2, 0, 0]]).unwrap();
        assert_eq!(dom.components().0, 2);
    }
}
