//! Least-squares (LCLSO) and cost-sensitive (LCCSCO) oracles over indicator-basis classes,
//! and the empirical-risk LPs used by epsilon-greedy.
//!
//! Evaluation vectors are laid out context-major: slot `j * K + a` holds `f(a, W_j)`.

pub mod class;
pub mod erm;

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::context::Context;
use crate::error::{Error, Result};
use crate::optim::{solve_constrained_ls, solve_lp, Constraint, LinearProgram, QuadraticProgram, Sense};
use crate::policy::Regressor;
use crate::settings::NumericalSettings;

pub use class::{ClassBasis, ClassSpec, Structure};
pub use erm::{erm_direct, erm_hinge, ErmFit};

/// Constraints `u_m . w_f <= b_m` on the evaluation vector of a class member.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearConstraintSet {
    pub rows: Vec<(Vec<f64>, f64)>,
}

impl LinearConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, u: Vec<f64>, b: f64) {
        self.rows.push((u, b));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Largest violation at the evaluation vector `w`.
    pub fn violation(&self, w: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|(u, b)| u.iter().zip(w).map(|(x, y)| x * y).sum::<f64>() - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LclsoSolution {
    pub regressor: Regressor,
    /// Evaluation vector of the fit at the contexts.
    pub values: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LccscoSolution {
    pub regressor: Regressor,
    pub values: Vec<f64>,
    pub value: f64,
}

/// A class restricted by extra linear constraints at fixed contexts, ready for repeated
/// oracle calls.
#[derive(Debug, Clone)]
pub struct ConstrainedClass {
    pub basis: ClassBasis,
    pub contexts: Vec<Context>,
    design: DMatrix<f64>,
    constraints: Vec<Constraint>,
}

impl ConstrainedClass {
    pub fn new(spec: &ClassSpec, contexts: &[Context], extra: &LinearConstraintSet) -> Result<Self> {
        let basis = spec.basis_for(contexts)?;
        let design = basis.design(contexts);
        let slots = spec.k * contexts.len();
        let mut constraints = basis.base_constraints();
        for (u, b) in &extra.rows {
            if u.len() != slots {
                return Err(Error::DimensionMismatch { expected: slots, got: u.len() });
            }
            if *b == f64::INFINITY {
                continue;
            }
            let uv = DVector::from_column_slice(u);
            let coeffs = design.tr_mul(&uv);
            constraints.push(Constraint::le(coeffs.iter().copied().collect(), *b));
        }
        Ok(Self { basis, contexts: contexts.to_vec(), design, constraints })
    }

    pub fn slots(&self) -> usize {
        self.design.nrows()
    }

    fn values(&self, x: &DVector<f64>) -> Vec<f64> {
        (&self.design * x).iter().copied().collect()
    }

    /// Weighted least-squares fit; `weights` has one entry per context.
    pub fn fit(&self, target: &[f64], weights: &[f64], s: &NumericalSettings) -> Result<LclsoSolution> {
        if target.len() != self.slots() {
            return Err(Error::DimensionMismatch { expected: self.slots(), got: target.len() });
        }
        if weights.len() != self.contexts.len() {
            return Err(Error::DimensionMismatch { expected: self.contexts.len(), got: weights.len() });
        }
        let k = self.basis.spec.k;
        let mut qp = QuadraticProgram::new(self.design.clone(), DVector::from_column_slice(target));
        qp.weights = DVector::from_fn(self.slots(), |i, _| weights[i / k]);
        qp.constraints = self.constraints.clone();
        qp.bounds = vec![(0.0, f64::INFINITY); self.basis.n_vars()];
        let sol = solve_constrained_ls(&qp, s)?.optimal()?;
        let values = self.values(&sol.x);
        let residual = values
            .iter()
            .zip(target)
            .enumerate()
            .map(|(i, (v, t))| weights[i / k] * (v - t) * (v - t))
            .sum();
        Ok(LclsoSolution { regressor: self.basis.regressor(sol.x.as_slice()), values, residual })
    }

    pub fn optimize(&self, costs: &[f64], sense: Sense, s: &NumericalSettings) -> Result<LccscoSolution> {
        if costs.len() != self.slots() {
            return Err(Error::DimensionMismatch { expected: self.slots(), got: costs.len() });
        }
        let c = self.design.tr_mul(&DVector::from_column_slice(costs));
        let mut lp = LinearProgram::new(c.iter().copied().collect(), sense);
        lp.constraints = self.constraints.clone();
        let sol = solve_lp(&lp, s)?.optimal()?;
        let x = DVector::from_vec(sol.x);
        let values = self.values(&x);
        let value = values.iter().zip(costs).map(|(v, c)| v * c).sum();
        Ok(LccscoSolution { regressor: self.basis.regressor(x.as_slice()), values, value })
    }
}

/// Linearly constrained least squares over the class: minimizes the squared distance between
/// `target` and the evaluation vector. Fails with [`Error::Infeasible`] when the constraints
/// exclude the whole class.
pub fn lclso(
    contexts: &[Context],
    target: &[f64],
    constraints: &LinearConstraintSet,
    spec: &ClassSpec,
    s: &NumericalSettings,
) -> Result<LclsoSolution> {
    ConstrainedClass::new(spec, contexts, constraints)?.fit(target, &vec![1.0; contexts.len()], s)
}

/// Linearly constrained cost-sensitive optimization of `sum costs(a,j) f(a, W_j)`.
pub fn lccsco(
    contexts: &[Context],
    costs: &[f64],
    constraints: &LinearConstraintSet,
    spec: &ClassSpec,
    sense: Sense,
    s: &NumericalSettings,
) -> Result<LccscoSolution> {
    if sense == Sense::Min && costs.iter().any(|&c| c < 0.0) {
        return Err(Error::InvalidInput("minimization costs must be nonnegative".into()));
    }
    ConstrainedClass::new(spec, contexts, constraints)?.optimize(costs, sense, s)
}

/// Distinct contexts in first-appearance order, and the index of each input among them.
pub fn distinct_contexts(contexts: &[Context]) -> (Vec<Context>, Vec<usize>) {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut out = Vec::new();
    let index = contexts
        .iter()
        .map(|w| {
            let key: Vec<u64> = w.coords().iter().map(|x| x.to_bits()).collect();
            *seen.entry(key).or_insert_with(|| {
                out.push(w.clone());
                out.len() - 1
            })
        })
        .collect();
    (out, index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RectangularGrid;
    use crate::policy::RegressorKind;

    fn s() -> NumericalSettings {
        NumericalSettings::default()
    }

    fn spec(k: usize, m: f64) -> ClassSpec {
        ClassSpec::new(k, RectangularGrid::corners(1), m, RegressorKind::SumToOne).unwrap()
    }

    #[test]
    fn lclso_projects_onto_simplex() {
        let ctx = [Context::scalar(0.5).unwrap()];
        let sol = lclso(&ctx, &[2.0, -1.0], &LinearConstraintSet::new(), &spec(2, 10.0), &s()).unwrap();
        assert!((sol.values[0] - 1.0).abs() < 1e-8 && sol.values[1].abs() < 1e-8, "{:?}", sol.values);
        sol.regressor.validate(1e-9).unwrap();
    }

    #[test]
    fn lclso_respects_extra_constraint() {
        let ctx = [Context::scalar(0.5).unwrap()];
        let mut cs = LinearConstraintSet::new();
        cs.push(vec![1.0, 0.0], 0.0);
        let sol = lclso(&ctx, &[5.0, 0.0], &cs, &spec(2, 10.0), &s()).unwrap();
        assert!(sol.values[0].abs() < 1e-8 && (sol.values[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn lclso_realizable_target() {
        let ctx = [Context::scalar(0.2).unwrap(), Context::scalar(0.7).unwrap()];
        let target = [1.0, 0.0, 0.0, 1.0];
        let sol = lclso(&ctx, &target, &LinearConstraintSet::new(), &spec(2, 2.0), &s()).unwrap();
        assert!(sol.residual < 1e-10);
    }

    #[test]
    fn lccsco_examples() {
        let ctx = [Context::scalar(0.5).unwrap()];
        let none = LinearConstraintSet::new();
        let flat = lccsco(&ctx, &[0.3, 0.3], &none, &spec(2, 10.0), Sense::Min, &s()).unwrap();
        assert!((flat.value - 0.3).abs() < 1e-12);
        let sol = lccsco(&ctx, &[1.0, 0.0], &none, &spec(2, 10.0), Sense::Min, &s()).unwrap();
        assert!(sol.value.abs() < 1e-12 && sol.values[0].abs() < 1e-12);
        let mut cs = LinearConstraintSet::new();
        cs.push(vec![0.0, 1.0], 0.3);
        let sol = lccsco(&ctx, &[1.0, 0.0], &cs, &spec(2, 10.0), Sense::Min, &s()).unwrap();
        assert!((sol.value - 0.7).abs() < 1e-12);
    }

    #[test]
    fn infeasible_constraints_are_reported() {
        let ctx = [Context::scalar(0.5).unwrap()];
        let mut cs = LinearConstraintSet::new();
        cs.push(vec![1.0, 1.0], 0.5);
        assert!(matches!(lclso(&ctx, &[0.5, 0.5], &cs, &spec(2, 10.0), &s()), Err(Error::Infeasible)));
        assert!(matches!(
            lccsco(&ctx, &[1.0, 1.0], &cs, &spec(2, 10.0), Sense::Min, &s()),
            Err(Error::Infeasible)
        ));
    }

    #[test]
    fn distinct_context_index() {
        let c = |x| Context::scalar(x).unwrap();
        let (d, idx) = distinct_contexts(&[c(0.5), c(0.25), c(0.5)]);
        assert_eq!(d, vec![c(0.5), c(0.25)]);
        assert_eq!(idx, vec![0, 1, 0]);
    }
}
