//! Policy classes as finite indicator bases with an l1 budget, and their LP encoding.
//!
//! A class member is `f_a(w) = sum_j (beta+_{a,j} - beta-_{a,j}) 1{w >= x_j}` with
//! `beta+- >= 0`. Kind constraints are imposed at grid points only; piecewise constancy makes
//! that sufficient everywhere.

use nalgebra::DMatrix;

use crate::basis::IndicatorBasisFunction;
use crate::context::{dominates, Context};
use crate::error::{Error, Result};
use crate::grid::{minimal_grid, RectangularGrid};
use crate::optim::Constraint;
use crate::policy::{Regressor, RegressorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    /// One basis function per grid point and arm.
    Full,
    /// Sums of univariate step functions: anchors on the coordinate axes only.
    Additive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    pub grid: RectangularGrid,
    /// Sectional variation budget `M` per arm.
    pub budget: f64,
    /// Coefficient bound `C` of the additive model; the per-arm l1 budget becomes `C * M`.
    pub coef_bound: f64,
    pub kind: RegressorKind,
    pub structure: Structure,
    pub k: usize,
}

impl ClassSpec {
    pub fn new(k: usize, grid: RectangularGrid, budget: f64, kind: RegressorKind) -> Result<Self> {
        let spec = Self { grid, budget, coef_bound: 1.0, kind, structure: Structure::Full, k };
        spec.check()?;
        Ok(spec)
    }

    pub fn additive(k: usize, grid: RectangularGrid, budget: f64, coef_bound: f64, kind: RegressorKind) -> Result<Self> {
        let spec = Self { grid, budget, coef_bound, kind, structure: Structure::Additive, k };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidInput("K must be positive".into()));
        }
        if !(self.budget >= 0.0) || !self.budget.is_finite() {
            return Err(Error::InvalidInput(format!("svn budget {} must be finite and >= 0", self.budget)));
        }
        if !(self.coef_bound > 0.0) || !self.coef_bound.is_finite() {
            return Err(Error::InvalidInput(format!("coefficient bound {} must be positive", self.coef_bound)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn l1_budget(&self) -> f64 {
        match self.structure {
            Structure::Full => self.budget,
            Structure::Additive => self.coef_bound * self.budget,
        }
    }

    pub fn with_budget(&self, budget: f64) -> Self {
        Self { budget, ..self.clone() }
    }

    /// The basis used for data at `contexts`: the spec grid refined by the contexts and 0.
    pub fn basis_for(&self, contexts: &[Context]) -> Result<ClassBasis> {
        self.check()?;
        let grid = self.grid.merge(&minimal_grid(self.dim(), contexts)?)?;
        let anchors = match self.structure {
            Structure::Full => grid.points(),
            Structure::Additive => {
                let d = self.dim();
                let mut a = vec![vec![0.0; d]];
                for l in 0..d {
                    for &x in grid.knots(l).iter().filter(|&&x| x > 0.0) {
                        let mut p = vec![0.0; d];
                        p[l] = x;
                        a.push(p);
                    }
                }
                a
            }
        };
        Ok(ClassBasis { spec: self.clone(), grid, anchors })
    }
}

/// A class restricted to a concrete anchor set, with its variable layout.
#[derive(Debug, Clone)]
pub struct ClassBasis {
    pub spec: ClassSpec,
    pub grid: RectangularGrid,
    pub anchors: Vec<Vec<f64>>,
}

impl ClassBasis {
    pub fn n_anchors(&self) -> usize {
        self.anchors.len()
    }

    /// Number of LP variables: `beta+` then `beta-`, each arm-major.
    pub fn n_vars(&self) -> usize {
        2 * self.spec.k * self.n_anchors()
    }

    pub fn plus(&self, a: usize, j: usize) -> usize {
        a * self.n_anchors() + j
    }

    pub fn minus(&self, a: usize, j: usize) -> usize {
        (self.spec.k + a) * self.n_anchors() + j
    }

    /// Adds the coefficients of `scale * f_a(w)` to `row`.
    pub fn add_eval(&self, row: &mut [f64], a: usize, w: &[f64], scale: f64) {
        for (j, x) in self.anchors.iter().enumerate() {
            if dominates(w, x) {
                row[self.plus(a, j)] += scale;
                row[self.minus(a, j)] -= scale;
            }
        }
    }

    /// Evaluation map onto slots `j * K + a` of the given contexts.
    pub fn design(&self, contexts: &[Context]) -> DMatrix<f64> {
        let k = self.spec.k;
        let mut d = DMatrix::zeros(k * contexts.len(), self.n_vars());
        let mut row = vec![0.0; self.n_vars()];
        for (j, w) in contexts.iter().enumerate() {
            for a in 0..k {
                row.iter_mut().for_each(|x| *x = 0.0);
                self.add_eval(&mut row, a, w.coords(), 1.0);
                for (c, &v) in row.iter().enumerate() {
                    d[(j * k + a, c)] = v;
                }
            }
        }
        d
    }

    /// Kind constraints at every grid point plus the per-arm l1 budgets.
    pub fn base_constraints(&self) -> Vec<Constraint> {
        let k = self.spec.k;
        let n = self.n_vars();
        let mut out = Vec::new();
        for w in self.grid.points() {
            let mut sum = vec![0.0; n];
            for a in 0..k {
                self.add_eval(&mut sum, a, &w, 1.0);
                if self.spec.kind == RegressorKind::SumToOne {
                    let mut row = vec![0.0; n];
                    self.add_eval(&mut row, a, &w, 1.0);
                    out.push(Constraint::ge(row, 0.0));
                }
            }
            let rhs = match self.spec.kind {
                RegressorKind::SumToOne => 1.0,
                RegressorKind::SumToZero => 0.0,
            };
            out.push(Constraint::eq(sum, rhs));
        }
        for a in 0..k {
            let mut row = vec![0.0; n];
            for j in 0..self.n_anchors() {
                row[self.plus(a, j)] = 1.0;
                row[self.minus(a, j)] = 1.0;
            }
            out.push(Constraint::le(row, self.spec.l1_budget()));
        }
        out
    }

    pub fn regressor(&self, x: &[f64]) -> Regressor {
        let arms = (0..self.spec.k)
            .map(|a| {
                let (mut anchors, mut betas) = (Vec::new(), Vec::new());
                for (j, anchor) in self.anchors.iter().enumerate() {
                    let b = x[self.plus(a, j)] - x[self.minus(a, j)];
                    if b != 0.0 {
                        anchors.push(anchor.clone());
                        betas.push(b);
                    }
                }
                IndicatorBasisFunction::new(self.spec.dim(), anchors, betas).expect("grid anchors are valid")
            })
            .collect();
        Regressor::new(self.spec.kind, arms).expect("K >= 1")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_includes_origin_and_contexts() {
        let spec = ClassSpec::new(2, RectangularGrid::corners(1), 2.0, RegressorKind::SumToOne).unwrap();
        let b = spec.basis_for(&[Context::scalar(0.4).unwrap()]).unwrap();
        assert_eq!(b.anchors, vec![vec![0.0], vec![0.4], vec![1.0]]);
        assert_eq!(b.n_vars(), 12);
    }

    #[test]
    fn additive_anchors_lie_on_axes() {
        let spec = ClassSpec::additive(2, RectangularGrid::corners(2), 1.0, 2.0, RegressorKind::SumToZero).unwrap();
        let b = spec.basis_for(&[Context::new(vec![0.5, 0.25]).unwrap()]).unwrap();
        assert_eq!(b.anchors.len(), 1 + 2 + 2);
        assert!(b.anchors.iter().all(|a| a.iter().filter(|&&x| x > 0.0).count() <= 1));
        assert_eq!(spec.l1_budget(), 2.0);
    }

    #[test]
    fn design_rows_evaluate_members() {
        let spec = ClassSpec::new(2, RectangularGrid::corners(1), 2.0, RegressorKind::SumToOne).unwrap();
        let ctx = [Context::scalar(0.4).unwrap(), Context::scalar(0.9).unwrap()];
        let b = spec.basis_for(&ctx).unwrap();
        let mut x = vec![0.0; b.n_vars()];
        x[b.plus(0, 0)] = 1.0;
        x[b.minus(0, 2)] = 1.0;
        x[b.plus(1, 2)] = 1.0;
        let f = b.regressor(&x);
        let d = b.design(&ctx);
        let v = d * nalgebra::DVector::from_vec(x);
        assert_eq!(v.as_slice(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(f.values(&[0.9]), vec![0.0, 1.0]);
        f.validate(1e-12).unwrap();
    }
}
