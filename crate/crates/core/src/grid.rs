//! Rectangular grids on `[0,1]^d`.

use crate::context::Context;
use crate::error::{Error, Result};

/// Cartesian product of per-dimension knot lists. Every dimension holds `0` and `1`
/// and its knots are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct RectangularGrid {
    knots: Vec<Vec<f64>>,
}

impl RectangularGrid {
    pub fn new(knots: Vec<Vec<f64>>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidInput("grid needs at least one dimension".into()));
        }
        for (l, k) in knots.iter().enumerate() {
            if k.first() != Some(&0.0) || k.last() != Some(&1.0) {
                return Err(Error::InvalidInput(format!("grid dimension {l} must start at 0 and end at 1")));
            }
            if k.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInput(format!("grid knots in dimension {l} are not strictly increasing")));
            }
        }
        Ok(Self { knots })
    }

    /// The corner grid `{0,1}^d`.
    pub fn corners(dim: usize) -> Self {
        Self { knots: vec![vec![0.0, 1.0]; dim] }
    }

    pub fn dim(&self) -> usize {
        self.knots.len()
    }

    pub fn knots(&self, dim: usize) -> &[f64] {
        &self.knots[dim]
    }

    pub fn len(&self) -> usize {
        self.knots.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All grid points, last dimension varying fastest.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len());
        let mut idx = vec![0usize; self.dim()];
        loop {
            out.push(idx.iter().enumerate().map(|(l, &i)| self.knots[l][i]).collect());
            if !advance(&mut idx, |l| self.knots[l].len()) {
                return out;
            }
        }
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point.iter().zip(&self.knots).all(|(x, k)| k.iter().any(|y| y == x))
    }

    /// Smallest grid containing the knots of both grids.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        let knots = self
            .knots
            .iter()
            .zip(&other.knots)
            .map(|(a, b)| sorted_unique(a.iter().chain(b).copied()))
            .collect();
        Ok(Self { knots })
    }

    /// Closed rectangles of the split induced by this grid, as (lower, upper) corner pairs.
    pub fn cells(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        let sizes: Vec<usize> = self.knots.iter().map(|k| k.len() - 1).collect();
        if sizes.contains(&0) {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut idx = vec![0usize; self.dim()];
        loop {
            let lo = idx.iter().enumerate().map(|(l, &i)| self.knots[l][i]).collect();
            let hi = idx.iter().enumerate().map(|(l, &i)| self.knots[l][i + 1]).collect();
            out.push((lo, hi));
            if !advance(&mut idx, |l| sizes[l]) {
                return out;
            }
        }
    }
}

/// Odometer increment; returns false once every index has wrapped.
pub(crate) fn advance(idx: &mut [usize], len: impl Fn(usize) -> usize) -> bool {
    for l in (0..idx.len()).rev() {
        idx[l] += 1;
        if idx[l] < len(l) {
            return true;
        }
        idx[l] = 0;
    }
    false
}

fn sorted_unique(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Minimal rectangular grid containing `points`, with `0` and `1` added in every dimension.
pub fn minimal_grid(dim: usize, points: &[Context]) -> Result<RectangularGrid> {
    if dim == 0 {
        return Err(Error::InvalidInput("grid needs at least one dimension".into()));
    }
    let mut knots = Vec::with_capacity(dim);
    for l in 0..dim {
        let mut coords = vec![0.0, 1.0];
        for p in points {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.dim() });
            }
            coords.push(p.coords()[l]);
        }
        knots.push(sorted_unique(coords.into_iter()));
    }
    Ok(RectangularGrid { knots })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(c: &[f64]) -> Context {
        Context::new(c.to_vec()).unwrap()
    }

    #[test]
    fn one_dimensional_union_with_endpoints() {
        let g = minimal_grid(1, &[ctx(&[0.3]), ctx(&[0.7])]).unwrap();
        assert_eq!(g.knots(0), &[0.0, 0.3, 0.7, 1.0]);
    }

    #[test]
    fn two_dimensional_product() {
        let g = minimal_grid(2, &[ctx(&[0.2, 0.7]), ctx(&[0.5, 0.3])]).unwrap();
        assert_eq!(g.knots(0), &[0.0, 0.2, 0.5, 1.0]);
        assert_eq!(g.knots(1), &[0.0, 0.3, 0.7, 1.0]);
        assert_eq!(g.len(), 16);
        assert_eq!(g.points().len(), 16);
        assert!(g.contains(&[0.2, 0.7]) && g.contains(&[0.5, 0.3]));
    }

    #[test]
    fn duplicates_collapse() {
        let g = minimal_grid(1, &[ctx(&[0.5]), ctx(&[0.5])]).unwrap();
        assert_eq!(g.knots(0), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn empty_input_gives_corner_grid() {
        let g = minimal_grid(3, &[]).unwrap();
        assert_eq!(g, RectangularGrid::corners(3));
        assert_eq!(g.len(), 8);
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(RectangularGrid::new(vec![vec![0.0, 0.5, 0.5, 1.0]]).is_err());
        assert!(RectangularGrid::new(vec![vec![0.1, 1.0]]).is_err());
    }

    #[test]
    fn cells_cover_split() {
        let g = RectangularGrid::new(vec![vec![0.0, 0.5, 1.0], vec![0.0, 1.0]]).unwrap();
        let cells = g.cells();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[1], (vec![0.5, 0.0], vec![1.0, 1.0]));
    }

    #[test]
    fn merge_unions_knots() {
        let a = RectangularGrid::new(vec![vec![0.0, 0.25, 1.0]]).unwrap();
        let b = RectangularGrid::new(vec![vec![0.0, 0.5, 1.0]]).unwrap();
        assert_eq!(a.merge(&b).unwrap().knots(0), &[0.0, 0.25, 0.5, 1.0]);
    }
}
