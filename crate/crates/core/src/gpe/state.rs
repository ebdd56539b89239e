//! The candidate set `F_t`: the base class cut down by one linear elimination constraint per
//! past round.
//!
//! Contexts are deduplicated in first-appearance order; a constraint recorded when `m`
//! distinct contexts had been seen is zero-padded when more appear later.

use crate::context::{Context, Observation};
use crate::error::{Error, Result};
use crate::optim::Sense;
use crate::oracles::{ClassSpec, ConstrainedClass, LinearConstraintSet};
use crate::policy::RegressorKind;
use crate::settings::NumericalSettings;

#[derive(Debug, Clone)]
pub struct PolicyClassState {
    pub spec: ClassSpec,
    pub contexts: Vec<Context>,
    pub counts: Vec<usize>,
    pub history: Vec<Observation>,
    /// Distinct-context index of each observation.
    pub index: Vec<usize>,
    /// `(u_tau, b_tau)`: the mean IS-weighted risk after round `tau` is at most `b_tau`.
    pub constraints: Vec<(Vec<f64>, f64)>,
    /// Constraints shown to be implied by the others; the candidate set is unchanged without them.
    pub redundant: Vec<bool>,
    kept_at_last_sweep: usize,
}

impl PolicyClassState {
    pub fn new(spec: ClassSpec) -> Result<Self> {
        if spec.kind != RegressorKind::SumToOne {
            return Err(Error::InvalidInput("policy elimination needs a sum-to-one class".into()));
        }
        Ok(Self { spec, contexts: Vec::new(), counts: Vec::new(), history: Vec::new(), index: Vec::new(), constraints: Vec::new(), redundant: Vec::new(), kept_at_last_sweep: 0 })
    }

    pub fn k(&self) -> usize {
        self.spec.k
    }

    pub fn rounds(&self) -> usize {
        self.history.len()
    }

    pub fn record(&mut self, obs: Observation) -> Result<()> {
        if obs.action >= self.k() {
            return Err(Error::InvalidInput(format!("action {} out of range", obs.action)));
        }
        let j = match self.contexts.iter().position(|w| w == &obs.context) {
            Some(j) => j,
            None => {
                self.contexts.push(obs.context.clone());
                self.counts.push(0);
                self.contexts.len() - 1
            }
        };
        self.counts[j] += 1;
        self.index.push(j);
        self.history.push(obs);
        Ok(())
    }

    /// Per-slot costs of the empirical risk `R_t(f) = (1/t) sum_s (1 - Y_s) f(A_s, W_s) / (K g_s)`.
    pub fn risk_costs(&self) -> Vec<f64> {
        let k = self.k();
        let t = self.rounds() as f64;
        let mut u = vec![0.0; k * self.contexts.len()];
        for (o, &j) in self.history.iter().zip(&self.index) {
            u[j * k + o.action] += o.loss() / (k as f64 * o.propensity * t);
        }
        u
    }

    /// Active elimination constraints over the current slots. Constraints that no sum-to-one
    /// member can violate are dropped.
    pub fn constraint_set(&self) -> LinearConstraintSet {
        let k = self.k();
        let slots = k * self.contexts.len();
        let mut set = LinearConstraintSet::new();
        for ((u, b), &r) in self.constraints.iter().zip(&self.redundant) {
            if r || !b.is_finite() {
                continue;
            }
            let worst: f64 = u.chunks(k).map(|c| c.iter().copied().fold(0.0, f64::max)).sum();
            if worst <= *b {
                continue;
            }
            let mut padded = u.clone();
            padded.resize(slots, 0.0);
            set.push(padded, *b);
        }
        set
    }

    /// `F_t` restricted to the distinct contexts seen so far.
    pub fn class(&self) -> Result<ConstrainedClass> {
        ConstrainedClass::new(&self.spec, &self.contexts, &self.constraint_set())
    }

    /// Appends the constraint `R_t(f) <= min_{F_t} R_t + x_t` and returns the minimum.
    pub fn eliminate(&mut self, x: f64, s: &NumericalSettings) -> Result<f64> {
        if self.history.is_empty() {
            return Err(Error::InvalidInput("elimination needs at least one observation".into()));
        }
        if x.is_nan() || x < 0.0 {
            return Err(Error::InvalidInput(format!("elimination width {x} must be >= 0")));
        }
        let u = self.risk_costs();
        let min = if u.iter().all(|&c| c == 0.0) {
            0.0
        } else {
            self.class()?
                .optimize(&u, Sense::Min, s)
                .map_err(|e| match e {
                    Error::Infeasible => Error::Invariant("candidate policy set became empty".into()),
                    e => e,
                })?
                .value
        };
        self.constraints.push((u, min + x));
        self.redundant.push(false);
        let live = self.constraint_set().len();
        if live >= 2 * self.kept_at_last_sweep + 8 {
            self.kept_at_last_sweep = self.prune_redundant(s)?;
        }
        Ok(min)
    }

    /// Flags every constraint whose maximum over the class cut by the remaining live constraints
    /// already satisfies it. Sound to do sequentially: each flagged row is implied by rows that
    /// are either kept or themselves implied. New contexts never revive a flagged row, since
    /// they don't change what the class can do on the old ones. Returns the live count.
    pub fn prune_redundant(&mut self, s: &NumericalSettings) -> Result<usize> {
        let candidates: Vec<usize> = (0..self.constraints.len())
            .filter(|&i| !self.redundant[i] && self.constraints[i].1.is_finite())
            .collect();
        for &i in &candidates {
            self.redundant[i] = true;
            let class = self.class()?;
            let (u, b) = &self.constraints[i];
            let mut costs = u.clone();
            costs.resize(self.k() * self.contexts.len(), 0.0);
            let implied = match class.optimize(&costs, Sense::Max, s) {
                Ok(sol) => sol.value <= b + 1e-12 * (1.0 + b.abs()),
                Err(_) => false,
            };
            self.redundant[i] = implied;
        }
        Ok(self.constraint_set().len())
    }

    /// Whether the evaluation vector `values` (over the current slots) satisfies every
    /// recorded constraint within `tol`.
    pub fn admits(&self, values: &[f64], tol: f64) -> bool {
        self.constraints.iter().all(|(u, b)| {
            let lhs: f64 = u.iter().zip(values).map(|(x, y)| x * y).sum();
            lhs <= b + tol
        })
    }
}
