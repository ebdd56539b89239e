//! Regressors (tuples of indicator-basis functions) and the policies built from them.

use crate::basis::IndicatorBasisFunction;
use crate::context::Context;
use crate::error::{Error, Result};
use crate::grid::{minimal_grid, RectangularGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressorKind {
    /// Arm values form a probability vector at every context.
    SumToOne,
    /// Arm values sum to zero at every context.
    SumToZero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    kind: RegressorKind,
    arms: Vec<IndicatorBasisFunction>,
}

impl Regressor {
    /// Builds the regressor without checking the kind constraints; see [`Regressor::validate`].
    pub fn new(kind: RegressorKind, arms: Vec<IndicatorBasisFunction>) -> Result<Self> {
        let Some(first) = arms.first() else {
            return Err(Error::InvalidInput("regressor needs at least one arm".into()));
        };
        let dim = first.dim();
        if let Some(bad) = arms.iter().find(|f| f.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.dim() });
        }
        Ok(Self { kind, arms })
    }

    /// The constant `1/K` regressor, whose policy is uniform.
    pub fn uniform(dim: usize, k: usize) -> Self {
        let arms = (0..k).map(|_| IndicatorBasisFunction::constant(dim, 1.0 / k as f64)).collect();
        Self { kind: RegressorKind::SumToOne, arms }
    }

    pub fn zero(dim: usize, k: usize) -> Self {
        Self { kind: RegressorKind::SumToZero, arms: vec![IndicatorBasisFunction::zero(dim); k] }
    }

    pub fn kind(&self) -> RegressorKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.arms.len()
    }

    pub fn dim(&self) -> usize {
        self.arms[0].dim()
    }

    pub fn arm(&self, a: usize) -> &IndicatorBasisFunction {
        &self.arms[a]
    }

    pub fn arms(&self) -> &[IndicatorBasisFunction] {
        &self.arms
    }

    pub fn eval(&self, a: usize, w: &Context) -> Result<f64> {
        self.arms.get(a).ok_or_else(|| Error::InvalidInput(format!("arm {a} out of range")))?.eval(w)
    }

    pub fn values(&self, w: &[f64]) -> Vec<f64> {
        self.arms.iter().map(|f| f.eval_point(w)).collect()
    }

    /// Max over arms of the per-arm sectional variation norm.
    pub fn svn(&self) -> f64 {
        self.arms.iter().map(IndicatorBasisFunction::sectional_variation_norm).fold(0.0, f64::max)
    }

    /// Smallest grid on which every arm is piecewise constant.
    pub fn grid(&self) -> RectangularGrid {
        let pts: Vec<Context> = self
            .arms
            .iter()
            .flat_map(|f| f.anchors().iter())
            .map(|a| Context::new(a.clone()).expect("validated anchors"))
            .collect();
        minimal_grid(self.dim(), &pts).expect("positive dimension")
    }

    /// Checks the kind constraints at every point of [`Regressor::grid`], which by piecewise
    /// constancy covers the whole cube.
    pub fn validate(&self, tol: f64) -> Result<()> {
        for w in self.grid().points() {
            let v = self.values(&w);
            let sum: f64 = v.iter().sum();
            match self.kind {
                RegressorKind::SumToOne => {
                    if let Some(a) = v.iter().position(|&x| x < -tol) {
                        return Err(Error::Invariant(format!("arm {a} negative ({}) at {w:?}", v[a])));
                    }
                    if (sum - 1.0).abs() > tol {
                        return Err(Error::Invariant(format!("arm values sum to {sum} at {w:?}")));
                    }
                }
                RegressorKind::SumToZero => {
                    if sum.abs() > tol {
                        return Err(Error::Invariant(format!("arm values sum to {sum} at {w:?}")));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Uniform { k: usize },
    /// Arm probabilities given directly by a sum-to-one regressor.
    PerArm(Regressor),
    /// `delta / K + (1 - delta) * tilt(a, w)`.
    Mixture { delta: f64, tilt: Box<Policy> },
    /// Deterministic argmax of a regressor; ties go to the lowest arm.
    Argmax(Regressor),
}

impl Policy {
    pub fn mixture(delta: f64, tilt: Policy) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::InvalidInput(format!("mixture weight {delta} outside [0,1]")));
        }
        Ok(Policy::Mixture { delta, tilt: Box::new(tilt) })
    }

    pub fn k(&self) -> usize {
        match self {
            Policy::Uniform { k } => *k,
            Policy::PerArm(f) | Policy::Argmax(f) => f.k(),
            Policy::Mixture { tilt, .. } => tilt.k(),
        }
    }

    /// All arm probabilities at `w`.
    pub fn probs(&self, w: &[f64]) -> Vec<f64> {
        match self {
            Policy::Uniform { k } => vec![1.0 / *k as f64; *k],
            Policy::PerArm(f) => f.values(w),
            Policy::Mixture { delta, tilt } => {
                let k = tilt.k() as f64;
                tilt.probs(w).into_iter().map(|p| delta / k + (1.0 - delta) * p).collect()
            }
            Policy::Argmax(f) => {
                let v = f.values(w);
                let best = argmax(&v);
                (0..v.len()).map(|a| if a == best { 1.0 } else { 0.0 }).collect()
            }
        }
    }

    pub fn prob(&self, a: usize, w: &[f64]) -> f64 {
        match self {
            Policy::Uniform { k } => 1.0 / *k as f64,
            Policy::PerArm(f) => f.arm(a).eval_point(w),
            Policy::Mixture { delta, tilt } => delta / tilt.k() as f64 + (1.0 - delta) * tilt.prob(a, w),
            Policy::Argmax(_) => self.probs(w)[a],
        }
    }

    /// Sum-to-one and nonnegativity of the underlying regressor, where applicable.
    pub fn validate(&self, tol: f64) -> Result<()> {
        match self {
            Policy::Uniform { k } if *k == 0 => Err(Error::InvalidInput("K must be positive".into())),
            Policy::Uniform { .. } | Policy::Argmax(_) => Ok(()),
            Policy::PerArm(f) => {
                if f.kind() != RegressorKind::SumToOne {
                    return Err(Error::InvalidInput("per-arm policy needs a sum-to-one regressor".into()));
                }
                f.validate(tol)
            }
            Policy::Mixture { tilt, .. } => tilt.validate(tol),
        }
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (a, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = a;
        }
    }
    best
}

pub fn policy_prob(pi: &Policy, a: usize, w: &Context) -> Result<f64> {
    if a >= pi.k() {
        return Err(Error::InvalidInput(format!("arm {a} out of range for K={}", pi.k())));
    }
    Ok(pi.prob(a, w.coords()))
}

/// `(1/n) sum_tau sum_a f(a, W_tau) / g(a, W_tau)`.
pub fn empirical_is_ratio(f: &Policy, g: &Policy, contexts: &[Context]) -> Result<f64> {
    if f.k() != g.k() {
        return Err(Error::DimensionMismatch { expected: f.k(), got: g.k() });
    }
    if contexts.is_empty() {
        return Err(Error::InvalidInput("empty context list".into()));
    }
    let mut total = 0.0;
    for (i, w) in contexts.iter().enumerate() {
        let pf = f.probs(w.coords());
        let pg = g.probs(w.coords());
        for a in 0..f.k() {
            if pg[a] <= 0.0 {
                return Err(Error::ZeroPropensity { arm: a, context: i });
            }
            total += pf[a] / pg[a];
        }
    }
    Ok(total / contexts.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_policy() -> Regressor {
        // arm 0 below 0.5, arm 1 from 0.5 on
        let f0 = IndicatorBasisFunction::new(1, vec![vec![0.0], vec![0.5]], vec![1.0, -1.0]).unwrap();
        let f1 = IndicatorBasisFunction::new(1, vec![vec![0.5]], vec![1.0]).unwrap();
        Regressor::new(RegressorKind::SumToOne, vec![f0, f1]).unwrap()
    }

    #[test]
    fn uniform_and_mixture_probs() {
        let w = Context::scalar(0.3).unwrap();
        assert_eq!(policy_prob(&Policy::Uniform { k: 4 }, 2, &w).unwrap(), 0.25);
        let m = Policy::mixture(0.5, Policy::Uniform { k: 2 }).unwrap();
        assert_eq!(policy_prob(&m, 0, &w).unwrap(), 0.5);
        assert!(policy_prob(&m, 2, &w).is_err());
    }

    #[test]
    fn argmax_tie_goes_to_first_arm() {
        let f = Regressor::zero(1, 3);
        let p = Policy::Argmax(f);
        assert_eq!(p.probs(&[0.4]), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn per_arm_validates() {
        let r = step_policy();
        r.validate(1e-9).unwrap();
        assert_eq!(Policy::PerArm(r.clone()).probs(&[0.7]), vec![0.0, 1.0]);
        assert_eq!(r.svn(), 2.0);
        let bad = Regressor::new(RegressorKind::SumToOne, vec![r.arm(0).clone(), r.arm(0).clone()]).unwrap();
        assert!(bad.validate(1e-9).is_err());
    }

    #[test]
    fn is_ratio_examples() {
        let ctx = vec![Context::scalar(0.1).unwrap(), Context::scalar(0.9).unwrap()];
        let f = Policy::PerArm(step_policy());
        assert_eq!(empirical_is_ratio(&f, &Policy::Uniform { k: 2 }, &ctx).unwrap(), 2.0);
        assert!(empirical_is_ratio(&f, &f.clone(), &ctx[..1]).is_err());

        let point = Policy::PerArm(Regressor::new(
            RegressorKind::SumToOne,
            vec![IndicatorBasisFunction::constant(1, 1.0), IndicatorBasisFunction::zero(1)],
        ).unwrap());
        let g = Policy::mixture(0.5, point.clone()).unwrap();
        let r = empirical_is_ratio(&point, &g, &ctx[..1]).unwrap();
        assert!((r - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_design_probability_is_an_error() {
        let ctx = vec![Context::scalar(0.2).unwrap()];
        let g = Policy::PerArm(step_policy());
        assert!(matches!(
            empirical_is_ratio(&Policy::Uniform { k: 2 }, &g, &ctx),
            Err(Error::ZeroPropensity { arm: 1, context: 0 })
        ));
    }
}
