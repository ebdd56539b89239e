//! The ellipsoid method for convex feasibility, driven by a separation oracle.
//!
//! The ellipsoid is `{x : (x - c)^T P^{-1} (x - c) <= 1}`. Cuts are deep when the oracle's
//! offset lies between the centre and the boundary and central otherwise.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum SeparationResult {
    Inside,
    /// Every target point `z` satisfies `normal . z <= offset`, and the query does not.
    Hyperplane { normal: DVector<f64>, offset: f64 },
}

pub trait SeparationOracle {
    fn separate(&mut self, w: &DVector<f64>) -> Result<SeparationResult>;
}

impl<F> SeparationOracle for F
where
    F: FnMut(&DVector<f64>) -> Result<SeparationResult>,
{
    fn separate(&mut self, w: &DVector<f64>) -> Result<SeparationResult> {
        self(w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidState {
    pub center: DVector<f64>,
    pub shape: DMatrix<f64>,
    pub iteration: usize,
}

impl EllipsoidState {
    pub fn ball(center: DVector<f64>, radius: f64) -> Self {
        let n = center.len();
        Self { center, shape: DMatrix::identity(n, n) * (radius * radius), iteration: 0 }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `ln det(shape)`, or `None` if the shape is no longer positive definite.
    pub fn log_det(&self) -> Option<f64> {
        let chol = self.shape.clone().cholesky()?;
        Some(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
    }

    /// Shrinks the ellipsoid onto `{x : a.x <= beta}`.
    pub fn cut(&mut self, a: &DVector<f64>, beta: f64) {
        let n = self.dim();
        let pa = &self.shape * a;
        let apa = a.dot(&pa);
        let mut alpha = (a.dot(&self.center) - beta) / apa.sqrt();
        if !(0.0..1.0).contains(&alpha) {
            alpha = 0.0;
        }
        let b = pa / apa.sqrt();
        if n == 1 {
            // interval bisection, kept exact
            let r = self.shape[(0, 0)].sqrt();
            let sign = a[0].signum();
            let keep_far = self.center[0] - sign * r;
            let cut_at = self.center[0] - sign * alpha * r;
            self.center[0] = 0.5 * (keep_far + cut_at);
            self.shape[(0, 0)] = (0.5 * (cut_at - keep_far)).powi(2);
        } else {
            let nf = n as f64;
            self.center.axpy(-(1.0 + nf * alpha) / (nf + 1.0), &b, 1.0);
            let factor = nf * nf * (1.0 - alpha * alpha) / (nf * nf - 1.0);
            let tau = 2.0 * (1.0 + nf * alpha) / ((nf + 1.0) * (1.0 + alpha));
            let bbt = &b * b.transpose();
            self.shape = (&self.shape - bbt * tau) * factor;
            let sym = (&self.shape + self.shape.transpose()) * 0.5;
            self.shape = sym;
        }
        self.iteration += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EllipsoidOutcome {
    Found { point: DVector<f64>, calls: usize },
    NotFound { calls: usize },
}

/// `ceil(2 n (n+1) ln(R / Delta)) + n` oracle calls.
pub fn iteration_cap(n: usize, radius: f64, inner: f64) -> usize {
    let n_f = n as f64;
    (2.0 * n_f * (n_f + 1.0) * (radius / inner).ln().max(0.0)).ceil() as usize + n
}

/// Searches `ball(0, radius)` for a point the oracle accepts.
pub fn ellipsoid_find(
    oracle: &mut dyn SeparationOracle,
    n: usize,
    radius: f64,
    inner: f64,
) -> Result<EllipsoidOutcome> {
    ellipsoid_find_from(oracle, DVector::zeros(n), radius, inner)
}

/// Searches `ball(center, radius)` for a point the oracle accepts.
pub fn ellipsoid_find_from(
    oracle: &mut dyn SeparationOracle,
    center: DVector<f64>,
    radius: f64,
    inner: f64,
) -> Result<EllipsoidOutcome> {
    let n = center.len();
    if n == 0 || !(radius > 0.0) || !(inner > 0.0) {
        return Err(Error::InvalidInput(format!("ellipsoid needs n >= 1 and radii > 0 (n={n}, R={radius}, Delta={inner})")));
    }
    let cap = iteration_cap(n, radius, inner);
    let max_ratio = (-1.0 / (2.0 * (n as f64 + 1.0))).exp();
    let mut state = EllipsoidState::ball(center, radius);
    let mut log_det = state.log_det().expect("ball is positive definite");
    let mut trace = vec![log_det];
    for call in 1..=cap {
        match oracle.separate(&state.center)? {
            SeparationResult::Inside => return Ok(EllipsoidOutcome::Found { point: state.center, calls: call }),
            SeparationResult::Hyperplane { normal, offset } => {
                if normal.iter().all(|&x| x == 0.0) || !normal.iter().all(|x| x.is_finite()) {
                    return Err(Error::Invariant("separation oracle returned a degenerate normal".into()));
                }
                state.cut(&normal, offset);
                let Some(next) = state.log_det() else {
                    return Err(Error::Degenerate { iteration: call, trace: tail(&trace) });
                };
                let ratio = (0.5 * (next - log_det)).exp();
                trace.push(next);
                if ratio > max_ratio * (1.0 + 1e-9) {
                    return Err(Error::Invariant(format!(
                        "ellipsoid volume ratio {ratio} exceeds {max_ratio} at iteration {call}"
                    )));
                }
                log_det = next;
            }
        }
    }
    Ok(EllipsoidOutcome::NotFound { calls: cap })
}

fn tail(trace: &[f64]) -> Vec<f64> {
    trace[trace.len().saturating_sub(10)..].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball_oracle(c: DVector<f64>, r: f64) -> impl FnMut(&DVector<f64>) -> Result<SeparationResult> {
        move |w| {
            let d = w - &c;
            let dist = d.norm();
            if dist <= r {
                Ok(SeparationResult::Inside)
            } else {
                let a = d / dist;
                let offset = a.dot(&c) + r;
                Ok(SeparationResult::Hyperplane { normal: a, offset })
            }
        }
    }

    #[test]
    fn centre_already_inside() {
        let mut o = ball_oracle(DVector::zeros(2), 0.5);
        let out = ellipsoid_find(&mut o, 2, 1.0, 0.5).unwrap();
        assert_eq!(out, EllipsoidOutcome::Found { point: DVector::zeros(2), calls: 1 });
    }

    #[test]
    fn empty_target_exhausts_cap() {
        let mut o = |_: &DVector<f64>| {
            Ok(SeparationResult::Hyperplane { normal: DVector::from_vec(vec![1.0, 0.0]), offset: -10.0 })
        };
        let cap = iteration_cap(2, 1.0, 0.01);
        assert_eq!(ellipsoid_find(&mut o, 2, 1.0, 0.01).unwrap(), EllipsoidOutcome::NotFound { calls: cap });
    }

    #[test]
    fn one_dimensional_bisection() {
        let mut o = ball_oracle(DVector::from_vec(vec![0.73]), 0.01);
        match ellipsoid_find(&mut o, 1, 1.0, 0.01).unwrap() {
            EllipsoidOutcome::Found { point, calls } => {
                assert!((point[0] - 0.73).abs() <= 0.01);
                assert!(calls <= iteration_cap(1, 1.0, 0.01));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hidden_ball_in_five_dims() {
        let c = DVector::from_vec(vec![0.3, -0.2, 0.4, 0.1, -0.5]);
        let mut o = ball_oracle(c.clone(), 0.1);
        match ellipsoid_find(&mut o, 5, 1.0, 0.1).unwrap() {
            EllipsoidOutcome::Found { point, .. } => assert!((point - c).norm() <= 0.1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cap_formula() {
        // 2*2*3*ln(10) = 27.63 -> 28, plus n
        assert_eq!(iteration_cap(2, 1.0, 0.1), 30);
    }
}
