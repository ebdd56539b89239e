//! Inverse-propensity-weighted empirical risk minimization as linear programs.
//!
//! Observations sharing a context and arm are aggregated into one weight, which leaves both
//! objectives unchanged and keeps the hinge LP at one slack per distinct (context, arm).

use super::class::ClassSpec;
use super::{distinct_contexts, ConstrainedClass, LinearConstraintSet};
use crate::context::{Context, Observation};
use crate::error::{Error, Result};
use crate::optim::{solve_lp, Constraint, LinearProgram, Sense};
use crate::policy::{Regressor, RegressorKind};
use crate::settings::NumericalSettings;

#[derive(Debug, Clone, PartialEq)]
pub struct ErmFit {
    pub regressor: Regressor,
    /// `sum_tau (1 - Y_tau) / g_tau * phi(f(A_tau, W_tau))` at the returned regressor.
    pub objective: f64,
}

/// Distinct contexts and the aggregated weights `sum (1 - Y) / g` per slot `j * K + a`.
fn weighted_slots(history: &[Observation], k: usize) -> Result<(Vec<Context>, Vec<f64>)> {
    let contexts: Vec<Context> = history.iter().map(|o| o.context.clone()).collect();
    let (distinct, index) = distinct_contexts(&contexts);
    let mut weights = vec![0.0; k * distinct.len()];
    for (o, &j) in history.iter().zip(&index) {
        if o.action >= k {
            return Err(Error::InvalidInput(format!("action {} out of range for K={k}", o.action)));
        }
        if !(o.propensity > 0.0) {
            return Err(Error::ZeroPropensity { arm: o.action, context: j });
        }
        weights[j * k + o.action] += o.loss() / o.propensity;
    }
    Ok((distinct, weights))
}

/// Direct policy ERM over a sum-to-one class.
pub fn erm_direct(history: &[Observation], spec: &ClassSpec, s: &NumericalSettings) -> Result<ErmFit> {
    if spec.kind != RegressorKind::SumToOne {
        return Err(Error::InvalidInput("direct ERM needs a sum-to-one class".into()));
    }
    let (contexts, weights) = weighted_slots(history, spec.k)?;
    let class = ConstrainedClass::new(spec, &contexts, &LinearConstraintSet::new())?;
    let sol = class.optimize(&weights, Sense::Min, s).map_err(|e| match e {
        Error::Infeasible => Error::Invariant("direct ERM class is empty".into()),
        e => e,
    })?;
    Ok(ErmFit { regressor: sol.regressor, objective: sol.value })
}

/// Hinge-risk ERM over a sum-to-zero class, with slacks `s >= 0, s >= 1 + f(a, w)`.
pub fn erm_hinge(history: &[Observation], spec: &ClassSpec, s: &NumericalSettings) -> Result<ErmFit> {
    if spec.kind != RegressorKind::SumToZero {
        return Err(Error::InvalidInput("hinge ERM needs a sum-to-zero class".into()));
    }
    let k = spec.k;
    let (contexts, weights) = weighted_slots(history, k)?;
    let basis = spec.basis_for(&contexts)?;
    let nb = basis.n_vars();
    let active: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    let n = nb + active.len();

    let mut objective = vec![0.0; n];
    for (q, &i) in active.iter().enumerate() {
        objective[nb + q] = weights[i];
    }
    let mut lp = LinearProgram::new(objective, Sense::Min);
    for mut c in basis.base_constraints() {
        c.coeffs.resize(n, 0.0);
        lp.push(c);
    }
    for (q, &i) in active.iter().enumerate() {
        let mut row = vec![0.0; n];
        row[nb + q] = 1.0;
        basis.add_eval(&mut row, i % k, contexts[i / k].coords(), -1.0);
        lp.push(Constraint::ge(row, 1.0));
    }
    let sol = solve_lp(&lp, s)?.optimal().map_err(|e| match e {
        Error::Infeasible => Error::Invariant("hinge ERM class is empty".into()),
        e => e,
    })?;
    let regressor = basis.regressor(&sol.x[..nb]);
    let objective = active
        .iter()
        .map(|&i| {
            let f = regressor.arm(i % k).eval_point(contexts[i / k].coords());
            weights[i] * (1.0 + f).max(0.0)
        })
        .sum();
    Ok(ErmFit { regressor, objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RectangularGrid;

    fn s() -> NumericalSettings {
        NumericalSettings::default()
    }

    fn obs(w: f64, a: usize, y: u8, g: f64) -> Observation {
        Observation::new(Context::scalar(w).unwrap(), a, y, g).unwrap()
    }

    fn spec(kind: RegressorKind, m: f64) -> ClassSpec {
        ClassSpec::new(2, RectangularGrid::corners(1), m, kind).unwrap()
    }

    #[test]
    fn direct_single_failure_moves_mass_away() {
        let fit = erm_direct(&[obs(0.5, 0, 0, 0.5)], &spec(RegressorKind::SumToOne, 1.0), &s()).unwrap();
        assert!(fit.objective.abs() < 1e-12);
        assert!(fit.regressor.values(&[0.5])[0].abs() < 1e-9);
        fit.regressor.validate(1e-9).unwrap();
    }

    #[test]
    fn direct_two_cells() {
        let h = [obs(0.25, 0, 0, 0.5), obs(0.75, 1, 0, 0.5)];
        let fit = erm_direct(&h, &spec(RegressorKind::SumToOne, 5.0), &s()).unwrap();
        assert!(fit.objective.abs() < 1e-12);
        let v1 = fit.regressor.values(&[0.25]);
        let v2 = fit.regressor.values(&[0.75]);
        assert!((v1[1] - 1.0).abs() < 1e-9 && (v2[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn direct_zero_loss_history() {
        let h = [obs(0.25, 0, 1, 0.5), obs(0.75, 1, 1, 0.5)];
        let fit = erm_direct(&h, &spec(RegressorKind::SumToOne, 2.0), &s()).unwrap();
        assert_eq!(fit.objective, 0.0);
        fit.regressor.validate(1e-9).unwrap();
    }

    #[test]
    fn hinge_single_failure() {
        let fit = erm_hinge(&[obs(0.5, 0, 0, 0.5)], &spec(RegressorKind::SumToZero, 2.0), &s()).unwrap();
        assert!(fit.objective.abs() < 1e-9);
        assert!(fit.regressor.values(&[0.5])[0] <= -1.0 + 1e-9);
        fit.regressor.validate(1e-9).unwrap();
    }

    #[test]
    fn hinge_zero_budget() {
        let h = [obs(0.5, 0, 0, 0.5), obs(0.2, 1, 0, 0.25), obs(0.9, 1, 1, 0.5)];
        let fit = erm_hinge(&h, &spec(RegressorKind::SumToZero, 0.0), &s()).unwrap();
        assert!((fit.objective - 6.0).abs() < 1e-12);
        assert_eq!(fit.regressor.svn(), 0.0);
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        assert!(erm_direct(&[], &spec(RegressorKind::SumToZero, 1.0), &s()).is_err());
        assert!(erm_hinge(&[], &spec(RegressorKind::SumToOne, 1.0), &s()).is_err());
    }
}
