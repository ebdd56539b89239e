//! Exploration-policy search: find a tilt in `F_t` whose mixture with uniform keeps every
//! candidate's empirical IS ratio at most `2K`.
//!
//! The search runs the ellipsoid method on evaluation vectors at the distinct past contexts.
//! With counts `c_j`, the coordinates `y_{a,j} = sqrt(c_j) w_{a,j}` are an isometric image of
//! the full `K (t-1)` slot vector restricted to vectors that agree on repeated contexts, which
//! is where every class member lives. The target set is the `Delta`-enlargement of `C_t`
//! intersected with `{w : max_z h(w, z) <= 5K/3}`, separated by a box cut, a projection (C)
//! cut and a gradient (L) cut.

use log::{debug, warn};
use nalgebra::DVector;

use super::state::PolicyClassState;
use crate::error::{Error, Result};
use crate::optim::{ellipsoid_find_from, EllipsoidOutcome, SeparationResult, Sense};
use crate::oracles::ConstrainedClass;
use crate::policy::{Policy, Regressor};
use crate::settings::NumericalSettings;

/// `h(w, z) = (1/n) sum c_j z_{a,j} / (delta/K + (1-delta) w_{a,j})` with `n = sum c_j`, and
/// its gradient in `w`. Slots are `j * K + a`.
pub fn h_weighted(w: &[f64], z: &[f64], counts: &[usize], delta: f64, k: usize) -> Result<(f64, Vec<f64>)> {
    if w.len() != z.len() || w.len() != k * counts.len() {
        return Err(Error::DimensionMismatch { expected: k * counts.len(), got: w.len().min(z.len()) });
    }
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::InvalidInput("IS ratio over an empty history".into()));
    }
    let kf = k as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; w.len()];
    for i in 0..w.len() {
        let den = delta / kf + (1.0 - delta) * w[i];
        if !(den > 0.0) {
            return Err(Error::InvalidInput(format!("nonpositive design probability {den} in slot {i}")));
        }
        let c = counts[i / k] as f64 / n as f64;
        value += c * z[i] / den;
        grad[i] = -c * z[i] * (1.0 - delta) / (den * den);
    }
    Ok((value, grad))
}

/// Unweighted form over `K (t-1)` slots: every slot is its own round.
pub fn h_value_and_grad(w: &[f64], z: &[f64], delta: f64, k: usize, t: usize) -> Result<(f64, Vec<f64>)> {
    if t < 2 || w.len() != k * (t - 1) {
        return Err(Error::DimensionMismatch { expected: k * t.saturating_sub(1), got: w.len() });
    }
    h_weighted(w, z, &vec![1; t - 1], delta, k)
}

/// Lipschitz modulus `2 Delta delta^{-2} sqrt(K / t)` of `h` in `w`.
pub fn xi(big_delta: f64, delta: f64, k: usize, t: usize) -> f64 {
    if big_delta >= delta / 2.0 {
        warn!("xi: Delta = {big_delta} is outside the Lipschitz lemma's range (0, delta/2 = {})", delta / 2.0);
    }
    2.0 * big_delta / (delta * delta) * (k as f64 / t as f64).sqrt()
}

/// Enlargement radius at round `t`: the solution of `xi_{t-1,delta}(Delta) = K/3`, capped at
/// `delta / (2K)` so that every design probability in the enlarged set stays positive.
pub fn search_radius(delta: f64, k: usize, t: usize) -> f64 {
    let kf = k as f64;
    let solved = kf / 6.0 * delta * delta * ((t - 1) as f64 / kf).sqrt();
    solved.min(delta / (2.0 * kf))
}

/// Everything the two separation oracles need at one round.
pub struct SearchProblem<'a> {
    pub class: &'a ConstrainedClass,
    pub counts: &'a [usize],
    pub delta: f64,
    pub big_delta: f64,
    pub settings: &'a NumericalSettings,
}

impl SearchProblem<'_> {
    fn k(&self) -> usize {
        self.class.basis.spec.k
    }

    fn n(&self) -> f64 {
        self.counts.iter().sum::<usize>() as f64
    }

    fn sqrt_count(&self, slot: usize) -> f64 {
        (self.counts[slot / self.k()] as f64).sqrt()
    }

    pub fn to_y(&self, w: &[f64]) -> DVector<f64> {
        DVector::from_fn(w.len(), |i, _| w[i] * self.sqrt_count(i))
    }

    pub fn to_w(&self, y: &DVector<f64>) -> Vec<f64> {
        y.iter().enumerate().map(|(i, v)| v / self.sqrt_count(i)).collect()
    }

    /// `max_{z in C_t} h(w, z)` by one cost-sensitive LP, with the maximizer.
    pub fn max_ratio(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        let k = self.k();
        let kf = k as f64;
        let n = self.n();
        let costs: Vec<f64> = w
            .iter()
            .enumerate()
            .map(|(i, &wi)| self.counts[i / k] as f64 / (n * (self.delta / kf + (1.0 - self.delta) * wi)))
            .collect();
        if let Some(i) = costs.iter().position(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::InvalidInput(format!("nonpositive design probability in slot {i}")));
        }
        let sol = self.class.optimize(&costs, Sense::Max, self.settings).map_err(empty_class)?;
        Ok((sol.value, sol.values))
    }

    /// Cuts `y` back into the box `[-Delta, sqrt(c_j) + Delta]` that contains the target set.
    pub fn box_cut(&self, y: &DVector<f64>) -> Option<SeparationResult> {
        let mut worst: Option<(usize, f64, bool)> = None;
        for i in 0..y.len() {
            let hi = self.sqrt_count(i) + self.big_delta;
            let (excess, upper) = if y[i] > hi { (y[i] - hi, true) } else { (-self.big_delta - y[i], false) };
            if excess > 0.0 && worst.is_none_or(|(_, e, _)| excess > e) {
                worst = Some((i, excess, upper));
            }
        }
        worst.map(|(i, _, upper)| {
            let mut normal = DVector::zeros(y.len());
            normal[i] = if upper { 1.0 } else { -1.0 };
            let offset = if upper { self.sqrt_count(i) + self.big_delta } else { self.big_delta };
            SeparationResult::Hyperplane { normal, offset }
        })
    }

    /// Separation from the `Delta`-enlargement of `C_t` via one weighted projection.
    pub fn sep_oracle_c(&self, y: &DVector<f64>) -> Result<SeparationResult> {
        let w = self.to_w(y);
        let weights: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        let fit = self.class.fit(&w, &weights, self.settings).map_err(empty_class)?;
        let y_proj = self.to_y(&fit.values);
        let normal = y - &y_proj;
        let dist = normal.norm();
        if dist <= self.big_delta {
            return Ok(SeparationResult::Inside);
        }
        // C_t lies below normal . y_proj; its enlargement below that plus Delta |normal|
        let offset = normal.dot(&y_proj) + self.big_delta * dist;
        Ok(SeparationResult::Hyperplane { normal, offset })
    }

    /// Separation from `{w : max_z h(w, z) <= 5K/3}` via one cost-sensitive LP and a gradient cut.
    pub fn sep_oracle_l(&self, y: &DVector<f64>) -> Result<SeparationResult> {
        let k = self.k();
        let w = self.to_w(y);
        let (value, z) = self.max_ratio(&w)?;
        let threshold = 5.0 * k as f64 / 3.0;
        if value <= threshold {
            return Ok(SeparationResult::Inside);
        }
        let (h, grad_w) = h_weighted(&w, &z, self.counts, self.delta, k)?;
        let normal = DVector::from_fn(w.len(), |i, _| grad_w[i] / self.sqrt_count(i));
        let offset = normal.dot(y) - (h - threshold);
        Ok(SeparationResult::Hyperplane { normal, offset })
    }
}

fn empty_class(e: Error) -> Error {
    match e {
        Error::Infeasible => Error::Invariant("candidate policy set is empty".into()),
        e => e,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub tilt: Policy,
    /// The tilt's regressor, `None` for the uniform tilt of the first round.
    pub regressor: Option<Regressor>,
    /// Certified `max_{f in F_t}` empirical IS ratio of the mixture design.
    pub certified_ratio: Option<f64>,
    pub oracle_calls: usize,
}

/// Finds the tilt for round `t` (`state` holds rounds `1..t`). `warm` is evaluated at the
/// current contexts to centre the first ellipsoid.
pub fn exploration_policy_search(
    state: &PolicyClassState,
    t: usize,
    delta_t: f64,
    warm: Option<&Regressor>,
    s: &NumericalSettings,
) -> Result<SearchOutcome> {
    let k = state.k();
    if t <= 1 || state.rounds() == 0 {
        return Ok(SearchOutcome { tilt: Policy::Uniform { k }, regressor: None, certified_ratio: None, oracle_calls: 0 });
    }
    if state.rounds() != t - 1 {
        return Err(Error::InvalidInput(format!("state holds {} rounds, expected {}", state.rounds(), t - 1)));
    }
    if !(delta_t > 0.0 && delta_t <= 1.0) {
        return Err(Error::InvalidInput(format!("exploration rate {delta_t} outside (0,1]")));
    }
    let class = state.class()?;
    let big_delta = search_radius(delta_t, k, t);
    let problem = SearchProblem { class: &class, counts: &state.counts, delta: delta_t, big_delta, settings: s };

    let m = state.contexts.len();
    let start: Vec<f64> = match warm {
        Some(f) => state.contexts.iter().flat_map(|w| f.values(w.coords())).collect(),
        None => vec![1.0 / k as f64; k * m],
    };
    let center = problem.to_y(&start);
    let n = k * m;
    let radius = ((k * (t - 1)) as f64).sqrt() + big_delta * (n as f64).sqrt();

    let mut oracle = |y: &DVector<f64>| -> Result<SeparationResult> {
        if let Some(cut) = problem.box_cut(y) {
            return Ok(cut);
        }
        match problem.sep_oracle_c(y)? {
            SeparationResult::Inside => problem.sep_oracle_l(y),
            cut => Ok(cut),
        }
    };
    let (y, calls) = match ellipsoid_find_from(&mut oracle, center, radius, big_delta)? {
        EllipsoidOutcome::Found { point, calls } => (point, calls),
        EllipsoidOutcome::NotFound { calls } => {
            return Err(Error::Invariant(format!(
                "exploration search failed at round {t} after {calls} oracle calls (n={n}, R={radius}, Delta={big_delta})"
            )))
        }
    };
    let weights: Vec<f64> = state.counts.iter().map(|&c| c as f64).collect();
    let fit = class.fit(&problem.to_w(&y), &weights, s).map_err(empty_class)?;
    let (ratio, _) = problem.max_ratio(&fit.values)?;
    if ratio > 2.0 * k as f64 + 1e-6 {
        return Err(Error::Invariant(format!("certified IS ratio {ratio} exceeds 2K at round {t}")));
    }
    debug!("round {t}: exploration search used {calls} oracle calls, ratio {ratio}");
    Ok(SearchOutcome {
        tilt: Policy::PerArm(fit.regressor.clone()),
        regressor: Some(fit.regressor),
        certified_ratio: Some(ratio),
        oracle_calls: calls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h_examples() {
        let (v, _) = h_value_and_grad(&[0.5, 0.5], &[1.0, 0.0], 0.5, 2, 2).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
        let (v, g) = h_value_and_grad(&[0.3, 0.7], &[0.0, 0.0], 0.5, 2, 2).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.iter().all(|&x| x == 0.0));
        assert!(h_value_and_grad(&[-1.0, 0.5], &[1.0, 0.0], 0.5, 2, 2).is_err());
    }

    #[test]
    fn weighted_form_matches_duplicated_slots() {
        let w = [0.2, 0.8, 0.6, 0.4];
        let z = [1.0, 0.0, 0.3, 0.7];
        let (hw, _) = h_weighted(&w, &z, &[2, 1], 0.3, 2).unwrap();
        let wf = [0.2, 0.8, 0.2, 0.8, 0.6, 0.4];
        let zf = [1.0, 0.0, 1.0, 0.0, 0.3, 0.7];
        let (hf, _) = h_value_and_grad(&wf, &zf, 0.3, 2, 4).unwrap();
        assert!((hw - hf).abs() < 1e-14);
    }

    #[test]
    fn xi_examples() {
        assert!((xi(0.1, 0.5, 4, 4) - 0.8).abs() < 1e-15);
        assert_eq!(xi(0.0, 0.5, 4, 4), 0.0);
        assert!((xi(0.02, 0.5, 2, 9) - 2.0 * xi(0.01, 0.5, 2, 9)).abs() < 1e-15);
    }

    #[test]
    fn radius_solves_the_lipschitz_equation() {
        let (k, t, delta) = (2, 401, 0.05);
        let r = search_radius(delta, k, t);
        assert!((xi(r, delta, k, t - 1) - k as f64 / 3.0).abs() < 1e-12 || r == delta / (2.0 * k as f64));
        assert!(xi(r, delta, k, t - 1) <= k as f64 / 3.0 + 1e-12);
    }
}
