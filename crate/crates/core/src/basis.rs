//! Indicator-basis functions `f(w) = sum_j beta_j 1{w >= x_j}` and their variation norms.
//!
//! These step functions are right-continuous and piecewise constant on the grid generated by
//! their anchors. Every policy and regressor in the crate is a tuple of them.

use crate::context::{dominates, Context};
use crate::error::{Error, Result};
use crate::grid::{advance, RectangularGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorBasisFunction {
    dim: usize,
    anchors: Vec<Vec<f64>>,
    coefficients: Vec<f64>,
}

impl IndicatorBasisFunction {
    pub fn new(dim: usize, anchors: Vec<Vec<f64>>, coefficients: Vec<f64>) -> Result<Self> {
        if anchors.len() != coefficients.len() {
            return Err(Error::InvalidInput(format!(
                "{} anchors but {} coefficients",
                anchors.len(),
                coefficients.len()
            )));
        }
        for (j, a) in anchors.iter().enumerate() {
            if a.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: a.len() });
            }
            if a.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::InvalidInput(format!("anchor {j} outside [0,1]^{dim}")));
            }
            if anchors[..j].contains(a) {
                return Err(Error::InvalidInput(format!("anchor {j} is duplicated")));
            }
        }
        if coefficients.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        Ok(Self { dim, anchors, coefficients })
    }

    /// Constant function, represented by a single anchor at the origin.
    pub fn constant(dim: usize, value: f64) -> Self {
        Self { dim, anchors: vec![vec![0.0; dim]], coefficients: vec![value] }
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, anchors: Vec::new(), coefficients: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn eval(&self, w: &Context) -> Result<f64> {
        if w.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: w.dim() });
        }
        Ok(self.eval_point(w.coords()))
    }

    /// Evaluation without the dimension check; `w` must have length `dim`.
    pub fn eval_point(&self, w: &[f64]) -> f64 {
        self.anchors
            .iter()
            .zip(&self.coefficients)
            .filter(|(a, _)| dominates(w, a))
            .map(|(_, b)| b)
            .sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            anchors: self.anchors.clone(),
            coefficients: self.coefficients.iter().map(|b| c * b).collect(),
        }
    }

    /// Closed-form sectional variation norm `|f(0)| + sum_{x_j != 0} |beta_j|`, which for
    /// distinct anchors is the plain l1 norm of the coefficients.
    pub fn sectional_variation_norm(&self) -> f64 {
        let origin = vec![0.0; self.dim];
        let at_origin = self.eval_point(&origin).abs();
        let rest: f64 = self
            .anchors
            .iter()
            .zip(&self.coefficients)
            .filter(|(a, _)| a.iter().any(|&x| x != 0.0))
            .map(|(_, b)| b.abs())
            .sum();
        at_origin + rest
    }

    /// The piecewise-constant function equal to `values` at every point of `grid` and constant
    /// on each half-open cell above a grid point (coefficients by Möbius inversion).
    pub fn from_grid_values(grid: &RectangularGrid, mut values: impl FnMut(&[f64]) -> f64) -> Self {
        let d = grid.dim();
        let sizes: Vec<usize> = (0..d).map(|l| grid.knots(l).len()).collect();
        let at = |idx: &[usize]| -> Vec<f64> { idx.iter().enumerate().map(|(l, &i)| grid.knots(l)[i]).collect() };
        let mut cache = std::collections::HashMap::new();
        let mut anchors = Vec::new();
        let mut coefficients = Vec::new();
        let mut idx = vec![0usize; d];
        loop {
            let mut beta = 0.0;
            for mask in 0u64..(1u64 << d) {
                if (0..d).any(|l| mask >> l & 1 == 1 && idx[l] == 0) {
                    continue;
                }
                let lower: Vec<usize> = (0..d).map(|l| idx[l] - (mask >> l & 1) as usize).collect();
                let v = *cache.entry(lower.clone()).or_insert_with(|| values(&at(&lower)));
                beta += if mask.count_ones() % 2 == 0 { v } else { -v };
            }
            if beta != 0.0 || idx.iter().all(|&i| i == 0) {
                anchors.push(at(&idx));
                coefficients.push(beta);
            }
            if !advance(&mut idx, |l| sizes[l]) {
                break;
            }
        }
        Self { dim: d, anchors, coefficients }
    }

    /// Minimal split on which the function is piecewise constant.
    pub fn minimal_split(&self) -> RectangularGrid {
        let pts: Vec<Context> = self
            .anchors
            .iter()
            .map(|a| Context::new(a.clone()).expect("anchors validated at construction"))
            .collect();
        crate::grid::minimal_grid(self.dim, &pts).expect("dimension is positive")
    }
}

/// Quasi-volume of `f` over the closed box `[lo, hi]` (alternating corner sum). Coordinates
/// with `lo == hi` contribute a single corner.
pub fn quasi_volume(mut f: impl FnMut(&[f64]) -> f64, lo: &[f64], hi: &[f64]) -> f64 {
    let d = lo.len();
    let mut total = 0.0;
    let mut corner = vec![0.0; d];
    for mask in 0u64..(1u64 << d) {
        let mut sign = 1.0;
        let mut skip = false;
        for l in 0..d {
            let take_lower = mask >> l & 1 == 1;
            if take_lower {
                if lo[l] == hi[l] {
                    skip = true;
                    break;
                }
                corner[l] = lo[l];
                sign = -sign;
            } else {
                corner[l] = hi[l];
            }
        }
        if !skip {
            total += sign * f(&corner);
        }
    }
    total
}

/// Sum over the rectangles of `split` of the absolute quasi-volume of `f`.
pub fn vitali_variation_bruteforce(f: &IndicatorBasisFunction, split: &RectangularGrid) -> f64 {
    split
        .cells()
        .iter()
        .map(|(lo, hi)| quasi_volume(|w| f.eval_point(w), lo, hi).abs())
        .sum()
}

/// Hardy–Krause variation anchored at the origin, by brute force: the Vitali sums of every
/// section of `f` (coordinates outside the section pinned to 0) over the corresponding
/// sub-split of `split`.
pub fn hardy_krause_bruteforce(f: &IndicatorBasisFunction, split: &RectangularGrid) -> f64 {
    let d = f.dim();
    let mut total = 0.0;
    for section in 1u64..(1u64 << d) {
        let dims: Vec<usize> = (0..d).filter(|l| section >> l & 1 == 1).collect();
        let sizes: Vec<usize> = dims.iter().map(|&l| split.knots(l).len() - 1).collect();
        let mut idx = vec![0usize; dims.len()];
        let mut point = vec![0.0; d];
        loop {
            let lo: Vec<f64> = dims.iter().zip(&idx).map(|(&l, &i)| split.knots(l)[i]).collect();
            let hi: Vec<f64> = dims.iter().zip(&idx).map(|(&l, &i)| split.knots(l)[i + 1]).collect();
            let qv = quasi_volume(
                |sub| {
                    point.iter_mut().for_each(|x| *x = 0.0);
                    for (&l, &x) in dims.iter().zip(sub) {
                        point[l] = x;
                    }
                    f.eval_point(&point)
                },
                &lo,
                &hi,
            );
            total += qv.abs();
            if !advance(&mut idx, |k| sizes[k]) {
                break;
            }
        }
    }
    total
}

/// `|f(0)|` plus the brute-force Hardy–Krause variation over `split`.
pub fn sectional_variation_bruteforce(f: &IndicatorBasisFunction, split: &RectangularGrid) -> f64 {
    f.eval_point(&vec![0.0; f.dim()]).abs() + hardy_krause_bruteforce(f, split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f1(anchors: &[f64], betas: &[f64]) -> IndicatorBasisFunction {
        IndicatorBasisFunction::new(1, anchors.iter().map(|&a| vec![a]).collect(), betas.to_vec()).unwrap()
    }

    #[test]
    fn eval_examples() {
        let f = f1(&[0.0, 0.5], &[0.2, 0.3]);
        assert!((f.eval(&Context::scalar(0.7).unwrap()).unwrap() - 0.5).abs() < 1e-15);
        assert!((f.eval(&Context::scalar(0.4).unwrap()).unwrap() - 0.2).abs() < 1e-15);
        assert!((f.eval(&Context::scalar(0.5).unwrap()).unwrap() - 0.5).abs() < 1e-15);

        let g = IndicatorBasisFunction::new(2, vec![vec![0.0, 0.0], vec![0.5, 0.5]], vec![1.0, -1.0]).unwrap();
        assert_eq!(g.eval(&Context::new(vec![0.6, 0.4]).unwrap()).unwrap(), 1.0);
        assert!(matches!(
            g.eval(&Context::scalar(0.3).unwrap()),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn rejects_duplicate_anchors() {
        assert!(IndicatorBasisFunction::new(1, vec![vec![0.5], vec![0.5]], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn svn_examples() {
        assert!((f1(&[0.0, 0.5], &[0.2, 0.3]).sectional_variation_norm() - 0.5).abs() < 1e-15);
        assert_eq!(IndicatorBasisFunction::zero(1).sectional_variation_norm(), 0.0);
        assert_eq!(f1(&[0.0, 0.3, 0.6], &[-1.0, 1.0, -1.0]).sectional_variation_norm(), 3.0);
        // no origin anchor: f(0) = 0
        assert_eq!(f1(&[0.3, 0.6], &[-1.0, 2.0]).sectional_variation_norm(), 3.0);
    }

    #[test]
    fn vitali_single_step() {
        // hand corner sums: [0,0.5] -> f(0.5)-f(0) = 1, [0.5,1] -> f(1)-f(0.5) = 0
        let f = f1(&[0.5], &[1.0]);
        let split = RectangularGrid::new(vec![vec![0.0, 0.5, 1.0]]).unwrap();
        assert_eq!(vitali_variation_bruteforce(&f, &split), 1.0);
    }

    #[test]
    fn vitali_of_constant_vanishes() {
        let f = IndicatorBasisFunction::constant(2, 3.5);
        let split = RectangularGrid::new(vec![vec![0.0, 0.2, 0.9, 1.0], vec![0.0, 0.4, 1.0]]).unwrap();
        assert_eq!(vitali_variation_bruteforce(&f, &split), 0.0);
        assert_eq!(hardy_krause_bruteforce(&f, &split), 0.0);
    }

    #[test]
    fn quasi_volume_two_dims() {
        // f = 1{w >= (0.5,0.5)}: only the cell with upper corner (0.5,0.5) sees it
        let f = IndicatorBasisFunction::new(2, vec![vec![0.5, 0.5]], vec![2.0]).unwrap();
        let split = f.minimal_split();
        assert_eq!(vitali_variation_bruteforce(&f, &split), 2.0);
        assert_eq!(sectional_variation_bruteforce(&f, &split), 2.0);
    }

    #[test]
    fn face_anchor_lives_in_a_section() {
        // 1{w_2 >= 0.5} has zero full-dimensional Vitali variation but unit section variation.
        let f = IndicatorBasisFunction::new(2, vec![vec![0.0, 0.5]], vec![1.0]).unwrap();
        let split = f.minimal_split();
        assert_eq!(vitali_variation_bruteforce(&f, &split), 0.0);
        assert_eq!(sectional_variation_bruteforce(&f, &split), 1.0);
        assert_eq!(f.sectional_variation_norm(), 1.0);
    }
}
