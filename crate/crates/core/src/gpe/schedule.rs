//! Exploration rate `delta_tau`, variance bound `v_tau` and elimination width `x_tau`.

use crate::error::{Error, Result};

/// `tau^{-min(1/2, 1/(2p))}`.
pub fn delta_tau(tau: usize, p: f64) -> f64 {
    (tau as f64).powf(-(0.5f64).min(1.0 / (2.0 * p)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
    pub c1_prime: f64,
}

/// Constants of the width schedule for entropy constant `c` and exponent `p`.
///
/// `c1` is singular at `p = 1` and `c1'` at `p = 2`; both are rejected. For `p > 2` the second
/// branch of `c1'` is used.
pub fn schedule_constants(c: f64, p: f64) -> Result<ScheduleConstants> {
    if !(c > 0.0) || !(p > 0.0) {
        return Err(Error::InvalidInput(format!("entropy constants must be positive (c={c}, p={p})")));
    }
    if p == 1.0 || p == 2.0 {
        return Err(Error::InvalidInput(format!(
            "p = {p} is a singular branch point of the schedule constants; perturb p slightly"
        )));
    }
    let sc = c.sqrt();
    let c1 = if p < 1.0 { 127.0 * sc / (1.0 - p) } else { 1.0 + 127.0 * sc * 2f64.powf((p - 1.0) / 2.0) / (p - 1.0) };
    let c1_prime =
        if p < 2.0 { 64.0 * sc / (1.0 - p / 2.0) } else { 1.0 + 64.0 * 2f64.powf(p / 2.0 - 1.0) * sc / (p / 2.0 - 1.0) };
    let (c4, c6) = (3.0, 2.0);
    Ok(ScheduleConstants { c1, c2: 37.0, c3: 3.0 * 2f64.ln(), c4, c5: 2.0, c6, c7: c4 + c6, c1_prime })
}

fn log_term(tau: f64, epsilon: f64) -> f64 {
    (tau * (tau + 1.0) / epsilon).ln()
}

/// High-probability bound on the conditional variance of the IS-weighted losses.
pub fn v_tau(epsilon: f64, delta: f64, tau: usize, c: f64, p: f64, k: usize) -> Result<f64> {
    let cs = schedule_constants(c, p)?;
    let t = tau as f64;
    let l = log_term(t, epsilon);
    let inner = cs.c1_prime / t.powf(0.5f64.min(1.0 / p))
        + 32.0 * (l / t).sqrt()
        + 16.0 * 2f64.ln() / t
        + 16.0 / t * l;
    Ok(2.0 * k as f64 + inner / delta)
}

pub fn a_tau(epsilon: f64, delta: f64, v: f64, tau: usize, cs: &ScheduleConstants, p: f64) -> f64 {
    let t = tau as f64;
    let l = log_term(t, epsilon);
    v.sqrt() * (cs.c1 / t.powf(0.5f64.min(1.0 / (2.0 * p))) + cs.c2 / t.sqrt() * l.sqrt() + (cs.c3 + cs.c4 * l) / (delta * t))
}

pub fn b_tau(epsilon: f64, delta: f64, v: f64, tau: usize, cs: &ScheduleConstants) -> f64 {
    let t = tau as f64;
    let l = log_term(t, epsilon);
    cs.c5 * (v / t * l).sqrt() + cs.c6 / (delta * t) * l
}

/// Elimination width `2 (a_tau + b_tau)`.
pub fn x_tau(epsilon: f64, delta: f64, v: f64, tau: usize, c: f64, p: f64) -> Result<f64> {
    let cs = schedule_constants(c, p)?;
    Ok(2.0 * (a_tau(epsilon, delta, v, tau, &cs, p) + b_tau(epsilon, delta, v, tau, &cs)))
}

/// The full schedule of one run, with an optional multiplier on the elimination width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub epsilon: f64,
    pub c: f64,
    pub p: f64,
    pub k: usize,
    pub width_scale: f64,
}

impl Schedule {
    pub fn new(epsilon: f64, c: f64, p: f64, k: usize, width_scale: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidInput(format!("epsilon {epsilon} outside (0,1)")));
        }
        if !(width_scale > 0.0) {
            return Err(Error::InvalidInput(format!("width scale {width_scale} must be positive")));
        }
        schedule_constants(c, p)?;
        Ok(Self { epsilon, c, p, k, width_scale })
    }

    pub fn delta(&self, tau: usize) -> f64 {
        delta_tau(tau, self.p)
    }

    pub fn v(&self, tau: usize) -> f64 {
        v_tau(self.epsilon, self.delta(tau), tau, self.c, self.p, self.k).expect("validated constants")
    }

    /// The width actually used for elimination: `width_scale * x_tau`.
    pub fn x(&self, tau: usize) -> f64 {
        let x = x_tau(self.epsilon, self.delta(tau), self.v(tau), tau, self.c, self.p).expect("validated constants");
        self.width_scale * x
    }
}
