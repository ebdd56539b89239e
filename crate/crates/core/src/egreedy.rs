//! Epsilon-greedy with a refitted empirical-risk minimizer, in two flavours: the regressor is
//! the policy itself (direct), or the policy is the argmax of a sum-to-zero hinge-risk fit.
//!
//! Each round's regret against the comparator value `V*` splits exactly into reward noise
//! `V(g_t) - Y_t`, exploration cost `delta_t (V* - V(uniform))` and exploitation cost
//! `(1 - delta_t) (V* - V(pi_{t-1}))`.

use crate::context::Observation;
use crate::envsim::{best_in_class_value, policy_value, sample_round, Environment, RoundRecord};
use crate::error::{Error, Result};
use crate::oracles::{erm_direct, erm_hinge, ClassSpec};
use crate::policy::{Policy, Regressor, RegressorKind};
use crate::settings::NumericalSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Direct,
    Hinge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refit {
    EveryRound,
    /// Refit at rounds 1, 2, 4, 8, ...
    Doubling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    /// The pointwise argmax of the mean reward, best over all policies.
    Pointwise,
    /// The best member of the configured class.
    BestInClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EgreedyConfig {
    pub variant: Variant,
    pub p: f64,
    pub horizon: usize,
    pub spec: ClassSpec,
    pub refit: Refit,
    pub comparator: Comparator,
    pub settings: NumericalSettings,
}

impl EgreedyConfig {
    pub fn new(variant: Variant, spec: ClassSpec, horizon: usize) -> Self {
        Self {
            variant,
            p: 0.5,
            horizon,
            spec,
            refit: Refit::EveryRound,
            comparator: Comparator::Pointwise,
            settings: NumericalSettings::default(),
        }
    }

    fn check(&self) -> Result<()> {
        let want = match self.variant {
            Variant::Direct => RegressorKind::SumToOne,
            Variant::Hinge => RegressorKind::SumToZero,
        };
        if self.spec.kind != want {
            return Err(Error::InvalidInput(format!("{:?} epsilon-greedy needs a {want:?} class", self.variant)));
        }
        if !(self.p > 0.0) {
            return Err(Error::InvalidInput(format!("entropy exponent p = {} must be positive", self.p)));
        }
        Ok(())
    }
}

/// `t^{-max(1/3, p/(p+1))}`.
pub fn egreedy_delta(t: usize, p: f64) -> f64 {
    (t as f64).powf(-(1.0f64 / 3.0).max(p / (p + 1.0)))
}

fn phi(variant: Variant, x: f64) -> f64 {
    match variant {
        Variant::Direct => x,
        Variant::Hinge => (1.0 + x).max(0.0),
    }
}

/// IS-weighted surrogate loss `phi(f(A, W)) (1 - Y) / (K g)`.
pub fn surrogate_loss(variant: Variant, f: &Regressor, obs: &Observation) -> Result<f64> {
    if !(obs.propensity > 0.0) {
        return Err(Error::ZeroPropensity { arm: obs.action, context: 0 });
    }
    let fa = f.eval(obs.action, &obs.context)?;
    Ok(phi(variant, fa) * obs.loss() / (f.k() as f64 * obs.propensity))
}

pub fn policy_map(variant: Variant, f: &Regressor, s: &NumericalSettings) -> Result<Policy> {
    match variant {
        Variant::Direct => {
            let pi = Policy::PerArm(f.clone());
            pi.validate(s.validation_tol)?;
            Ok(pi)
        }
        Variant::Hinge => Ok(Policy::Argmax(f.clone())),
    }
}

/// Risk `R(pi) = E[(1/K) sum_a pi(a, W) (1 - mu(a, W))] = (1 - V(pi)) / K`.
pub fn policy_risk(env: &Environment, pi: &Policy) -> f64 {
    (1.0 - policy_value(env, pi).value) / env.k() as f64
}

fn hinge_cell(mu: &[f64], x: &[f64]) -> f64 {
    let k = mu.len() as f64;
    mu.iter().zip(x).map(|(m, xa)| (1.0 - m) / k * (1.0 + xa).max(0.0)).sum()
}

/// Hinge risk `E[(1/K) sum_a (1 - mu(a, W)) max(0, 1 + f(a, W))]` on a finite context law.
pub fn hinge_risk(env: &Environment, f: &Regressor) -> Result<f64> {
    let Some((points, probs)) = env.support() else {
        return Err(Error::InvalidInput("hinge risk needs a finite context law".into()));
    };
    Ok(points
        .iter()
        .zip(probs)
        .map(|(w, p)| {
            let mu: Vec<f64> = (0..env.k()).map(|a| env.mean_reward(a, w.coords())).collect();
            p * hinge_cell(&mu, &f.values(w.coords()))
        })
        .sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HingeOracle {
    /// Minimizing sum-to-zero vector per support point.
    pub minimizers: Vec<Vec<f64>>,
    pub risk: f64,
}

/// Minimizes `sum_a (1 - mu_a) max(0, 1 + x_a) / K` over `sum x = 0` by a grid search over
/// `[-K, K]^{K-1}` (the last coordinate absorbs the constraint) followed by a pairwise
/// golden-section polish.
pub fn hinge_cell_minimizer(mu: &[f64]) -> (Vec<f64>, f64) {
    let k = mu.len();
    if k == 1 {
        return (vec![0.0], hinge_cell(mu, &[0.0]));
    }
    let kf = k as f64;
    // keep the grid at most ~10^6 points for larger K
    let step = (0.01f64).max(2.0 * kf / (1e6f64).powf(1.0 / (k - 1) as f64));
    let per = (2.0 * kf / step).round() as usize + 1;
    let mut idx = vec![0usize; k - 1];
    let mut x = vec![0.0; k];
    let mut best = (vec![0.0; k], f64::INFINITY);
    loop {
        for (l, &i) in idx.iter().enumerate() {
            x[l] = -kf + i as f64 * step;
        }
        x[k - 1] = -x[..k - 1].iter().sum::<f64>();
        let v = hinge_cell(mu, &x);
        if v < best.1 {
            best = (x.clone(), v);
        }
        if !crate::grid::advance(&mut idx, |_| per) {
            break;
        }
    }
    let (mut x, mut v) = best;
    for _ in 0..20 {
        let before = v;
        for i in 0..k - 1 {
            let objective = |s: f64| {
                let mut y = x.clone();
                y[i] += s;
                y[k - 1] -= s;
                hinge_cell(mu, &y)
            };
            let s = golden_section(objective, -step, step, 1e-12);
            let vs = objective(s);
            if vs < v {
                x[i] += s;
                x[k - 1] -= s;
                v = vs;
            }
        }
        if before - v < 1e-15 {
            break;
        }
    }
    (x, v)
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Pointwise hinge-risk minimizer over all sum-to-zero maps on a finite context law.
pub fn hinge_risk_oracle(env: &Environment) -> Result<HingeOracle> {
    let Some((points, probs)) = env.support() else {
        return Err(Error::InvalidInput("hinge risk oracle needs a finite context law".into()));
    };
    let mut minimizers = Vec::with_capacity(points.len());
    let mut risk = 0.0;
    for (w, p) in points.iter().zip(probs) {
        let mu: Vec<f64> = (0..env.k()).map(|a| env.mean_reward(a, w.coords())).collect();
        let (x, v) = hinge_cell_minimizer(&mu);
        minimizers.push(x);
        risk += p * v;
    }
    Ok(HingeOracle { minimizers, risk })
}

#[derive(Debug, Clone)]
pub struct EgreedyRun {
    pub records: Vec<RoundRecord>,
    pub comparator_value: f64,
    pub final_policy: Policy,
}

pub fn run_egreedy(env: &Environment, cfg: &EgreedyConfig) -> Result<EgreedyRun> {
    cfg.check()?;
    if cfg.spec.k != env.k() || cfg.spec.dim() != env.dim() {
        return Err(Error::InvalidInput("class K / dimension must match the environment".into()));
    }
    let s = &cfg.settings;
    let k = env.k();
    let v_star = match cfg.comparator {
        Comparator::Pointwise => policy_value(env, &env.optimal_policy()).value,
        Comparator::BestInClass => {
            let spec = ClassSpec { kind: RegressorKind::SumToOne, ..cfg.spec.clone() };
            best_in_class_value(env, &spec, s)?.0
        }
    };
    let v_uniform = policy_value(env, &Policy::Uniform { k }).value;
    let mut pi = Policy::Uniform { k };
    let mut history = Vec::with_capacity(cfg.horizon);
    let mut records = Vec::with_capacity(cfg.horizon);
    let (mut cum, mut noise, mut expl, mut exploit) = (0.0, 0.0, 0.0, 0.0);

    for t in 1..=cfg.horizon {
        let delta = egreedy_delta(t, cfg.p);
        let v_pi = policy_value(env, &pi).value;
        let design = Policy::mixture(delta, pi.clone())?;
        let obs = sample_round(env, &design, &mut env.round_rng(t as u64))?;
        let y = f64::from(obs.reward);
        let v_design = delta * v_uniform + (1.0 - delta) * v_pi;
        noise += v_design - y;
        expl += delta * (v_star - v_uniform);
        exploit += (1.0 - delta) * (v_star - v_pi);
        cum += v_star - y;

        history.push(obs.clone());
        let refit = match cfg.refit {
            Refit::EveryRound => true,
            Refit::Doubling => t.is_power_of_two(),
        };
        if refit {
            let fit = match cfg.variant {
                Variant::Direct => erm_direct(&history, &cfg.spec, s)?,
                Variant::Hinge => erm_hinge(&history, &cfg.spec, s)?,
            };
            pi = policy_map(cfg.variant, &fit.regressor, s)?;
        }
        records.push(RoundRecord {
            round: t,
            observation: obs,
            delta,
            x: None,
            v: None,
            max_is_ratio: None,
            cum_regret: cum,
            noise_cum: noise,
            expl_cost_cum: Some(expl),
            exploit_cost_cum: Some(exploit),
        });
    }
    Ok(EgreedyRun { records, comparator_value: v_star, final_policy: pi })
}
