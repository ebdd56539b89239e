//! Generalized policy elimination: each round mixes uniform exploration with a tilt from the
//! surviving candidate set, then eliminates candidates whose empirical risk exceeds the best
//! by the schedule width.

pub mod schedule;
pub mod search;
pub mod state;

use log::info;

use crate::envsim::{best_in_class_value, policy_value, sample_round, Environment, RoundRecord};
use crate::error::{Error, Result};
use crate::oracles::ClassSpec;
use crate::policy::{Policy, Regressor};
use crate::settings::NumericalSettings;

pub use schedule::{delta_tau, schedule_constants, v_tau, x_tau, Schedule, ScheduleConstants};
pub use search::{exploration_policy_search, h_value_and_grad, h_weighted, search_radius, xi, SearchOutcome, SearchProblem};
pub use state::PolicyClassState;

#[derive(Debug, Clone, PartialEq)]
pub struct GpeConfig {
    pub epsilon: f64,
    pub p: f64,
    pub c: f64,
    pub horizon: usize,
    pub spec: ClassSpec,
    /// Multiplier on the elimination width; 1 is the schedule as derived.
    pub width_scale: f64,
    /// Re-run the exploration search only at powers of two, reusing the tilt while it stays
    /// feasible and certified.
    pub doubling_search: bool,
    pub settings: NumericalSettings,
}

impl GpeConfig {
    pub fn new(spec: ClassSpec, horizon: usize) -> Self {
        Self {
            epsilon: 0.05,
            p: 0.5,
            c: 1.0,
            horizon,
            spec,
            width_scale: 1.0,
            doubling_search: false,
            settings: NumericalSettings::default(),
        }
    }

    pub fn schedule(&self) -> Result<Schedule> {
        Schedule::new(self.epsilon, self.c, self.p, self.spec.k, self.width_scale)
    }
}

#[derive(Debug, Clone)]
pub struct GpeRun {
    pub records: Vec<RoundRecord>,
    pub state: PolicyClassState,
    /// Value of the best class member, the regret comparator.
    pub best_value: f64,
    pub best_policy: Policy,
    /// First round whose elimination excluded `best_policy`, if any.
    pub best_eliminated_at: Option<usize>,
    pub oracle_calls: Vec<usize>,
}

pub fn run_gpe(env: &Environment, cfg: &GpeConfig) -> Result<GpeRun> {
    if cfg.spec.k != env.k() || cfg.spec.dim() != env.dim() {
        return Err(Error::InvalidInput("class K / dimension must match the environment".into()));
    }
    let schedule = cfg.schedule()?;
    let s = &cfg.settings;
    let (best_value, best_policy) = best_in_class_value(env, &cfg.spec, s)?;
    let mut state = PolicyClassState::new(cfg.spec.clone())?;
    let mut records = Vec::with_capacity(cfg.horizon);
    let mut oracle_calls = Vec::with_capacity(cfg.horizon);
    let mut tilt_regressor: Option<Regressor> = None;
    let mut best_eliminated_at = None;
    let (mut cum_regret, mut noise_cum) = (0.0, 0.0);

    for t in 1..=cfg.horizon {
        let delta = schedule.delta(t);
        let reuse = cfg.doubling_search && t > 2 && !t.is_power_of_two();
        let outcome = match (&tilt_regressor, reuse) {
            (Some(f), true) => match reuse_tilt(&state, f, delta, s)? {
                Some(o) => o,
                None => exploration_policy_search(&state, t, delta, Some(f), s)?,
            },
            _ => exploration_policy_search(&state, t, delta, tilt_regressor.as_ref(), s)?,
        };
        let design = Policy::mixture(delta, outcome.tilt.clone())?;
        let obs = sample_round(env, &design, &mut env.round_rng(t as u64))?;
        let expected = policy_value(env, &design).value;
        cum_regret += best_value - f64::from(obs.reward);
        noise_cum += expected - f64::from(obs.reward);

        let (x, v) = (schedule.x(t), schedule.v(t));
        state.record(obs.clone())?;
        state.eliminate(x, s)?;
        if best_eliminated_at.is_none() {
            let values: Vec<f64> = state.contexts.iter().flat_map(|w| best_policy.probs(w.coords())).collect();
            if !state.admits(&values, 1e-9) {
                best_eliminated_at = Some(t);
                info!("round {t}: the best class member was eliminated");
            }
        }
        oracle_calls.push(outcome.oracle_calls);
        if outcome.regressor.is_some() {
            tilt_regressor = outcome.regressor;
        }
        records.push(RoundRecord {
            round: t,
            observation: obs,
            delta,
            x: Some(x),
            v: Some(v),
            max_is_ratio: outcome.certified_ratio,
            cum_regret,
            noise_cum,
            expl_cost_cum: None,
            exploit_cost_cum: None,
        });
    }
    Ok(GpeRun { records, state, best_value, best_policy, best_eliminated_at, oracle_calls })
}

/// Keeps the previous tilt if it is still in `F_t` and its certified ratio is within `2K`.
fn reuse_tilt(state: &PolicyClassState, f: &Regressor, delta: f64, s: &NumericalSettings) -> Result<Option<SearchOutcome>> {
    let values: Vec<f64> = state.contexts.iter().flat_map(|w| f.values(w.coords())).collect();
    if !state.admits(&values, 1e-9) {
        return Ok(None);
    }
    let class = state.class()?;
    let t = state.rounds() + 1;
    let problem = SearchProblem {
        class: &class,
        counts: &state.counts,
        delta,
        big_delta: search_radius(delta, state.k(), t),
        settings: s,
    };
    let (ratio, _) = problem.max_ratio(&values)?;
    if ratio > 2.0 * state.k() as f64 {
        return Ok(None);
    }
    Ok(Some(SearchOutcome {
        tilt: Policy::PerArm(f.clone()),
        regressor: Some(f.clone()),
        certified_ratio: Some(ratio),
        oracle_calls: 0,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RectangularGrid;
    use crate::policy::RegressorKind;

    fn cfg(t: usize) -> GpeConfig {
        let spec = ClassSpec::new(2, RectangularGrid::corners(1), 2.0, RegressorKind::SumToOne).unwrap();
        GpeConfig { width_scale: 1e-3, ..GpeConfig::new(spec, t) }
    }

    #[test]
    fn single_round_is_uniform() {
        let env = Environment::preset("two-cell", 3).unwrap();
        let run = run_gpe(&env, &cfg(1)).unwrap();
        assert_eq!(run.records.len(), 1);
        assert_eq!(run.records[0].observation.propensity, 0.5);
        assert_eq!(run.records[0].delta, 1.0);
        assert!(run.records[0].max_is_ratio.is_none());
    }

    #[test]
    fn short_run_keeps_the_ratio_certified() {
        let env = Environment::preset("two-cell", 5).unwrap();
        let run = run_gpe(&env, &cfg(40)).unwrap();
        for r in &run.records[1..] {
            assert!(r.max_is_ratio.unwrap() <= 4.0 + 1e-6);
        }
        assert_eq!(run.state.constraints.len(), 40);
    }
}
