//! Synthetic Bernoulli-reward environments with exact policy values on finite context laws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::IndicatorBasisFunction;
use crate::context::{Context, Observation};
use crate::error::{Error, Result};
use crate::optim::Sense;
use crate::oracles::{ClassSpec, ConstrainedClass, LinearConstraintSet};
use crate::policy::{Policy, Regressor, RegressorKind};
use crate::settings::NumericalSettings;

/// Monte Carlo sample size for continuous context laws.
pub const MC_SAMPLES: usize = 1_000_000;

pub const PRESETS: [&str; 4] = ["two-cell", "checkerboard", "additive-smoothstep", "flat"];

#[derive(Debug, Clone, PartialEq)]
pub enum ContextLaw {
    Uniform { dim: usize },
    /// Finite support with probabilities.
    Grid { points: Vec<Context>, probs: Vec<f64> },
}

impl ContextLaw {
    pub fn uniform_grid(points: Vec<Context>) -> Self {
        let p = 1.0 / points.len() as f64;
        let probs = vec![p; points.len()];
        ContextLaw::Grid { points, probs }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Context {
        match self {
            ContextLaw::Uniform { dim } => Context::new((0..*dim).map(|_| rng.random::<f64>()).collect()).expect("unit cube"),
            ContextLaw::Grid { points, probs } => points[categorical(probs, rng.random::<f64>())].clone(),
        }
    }
}

/// Smallest index whose cumulative probability exceeds `u`.
fn categorical(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub name: String,
    pub law: ContextLaw,
    /// Mean reward `mu(a, w)` per arm.
    pub mean: Vec<IndicatorBasisFunction>,
    pub seed: u64,
}

impl Environment {
    pub fn new(name: impl Into<String>, law: ContextLaw, mean: Vec<IndicatorBasisFunction>, seed: u64) -> Result<Self> {
        let env = Self { name: name.into(), law, mean, seed };
        env.check()?;
        Ok(env)
    }

    fn check(&self) -> Result<()> {
        if self.mean.is_empty() {
            return Err(Error::InvalidInput("environment needs at least one arm".into()));
        }
        let d = self.dim();
        if let Some(f) = self.mean.iter().find(|f| f.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: f.dim() });
        }
        if let ContextLaw::Grid { points, probs } = &self.law {
            if points.is_empty() || points.len() != probs.len() {
                return Err(Error::InvalidInput("grid context law needs matching points and probabilities".into()));
            }
            if probs.iter().any(|&p| p < 0.0) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput("grid context probabilities must be a distribution".into()));
            }
            if let Some(w) = points.iter().find(|w| w.dim() != d) {
                return Err(Error::DimensionMismatch { expected: d, got: w.dim() });
            }
        }
        // piecewise constant: checking the grid of all anchors covers the cube
        let means = Regressor::new(RegressorKind::SumToOne, self.mean.clone())?;
        for w in means.grid().points() {
            if let Some(a) = means.values(&w).iter().position(|m| !(-1e-12..=1.0 + 1e-12).contains(m)) {
                return Err(Error::InvalidInput(format!("mean reward of arm {a} outside [0,1] at {w:?}")));
            }
        }
        Ok(())
    }

    /// A named preset; see [`PRESETS`].
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        let step1 = |pairs: &[(f64, f64)]| {
            IndicatorBasisFunction::new(1, pairs.iter().map(|p| vec![p.0]).collect(), pairs.iter().map(|p| p.1).collect())
        };
        let step2 = |pairs: &[([f64; 2], f64)]| {
            IndicatorBasisFunction::new(2, pairs.iter().map(|p| p.0.to_vec()).collect(), pairs.iter().map(|p| p.1).collect())
        };
        let centres = |n: usize| -> Vec<f64> { (0..n).map(|i| (2 * i + 1) as f64 / (2 * n) as f64).collect() };
        let grid2 = |xs: &[f64]| -> Vec<Context> {
            xs.iter().flat_map(|&a| xs.iter().map(move |&b| Context::new(vec![a, b]).expect("in cube"))).collect()
        };
        let line = |xs: &[f64]| -> Vec<Context> { xs.iter().map(|&x| Context::scalar(x).expect("in cube")).collect() };
        match name {
            "two-cell" => Self::new(
                name,
                ContextLaw::uniform_grid(line(&centres(4))),
                vec![step1(&[(0.0, 0.9), (0.5, -0.8)])?, step1(&[(0.0, 0.1), (0.5, 0.8)])?],
                seed,
            ),
            "checkerboard" => {
                // arm 1 is good on the off-diagonal quadrants
                let xor = [([0.5, 0.0], 1.0), ([0.0, 0.5], 1.0), ([0.5, 0.5], -2.0)];
                let arm = |base: f64, s: f64| {
                    let mut p = vec![([0.0, 0.0], base)];
                    p.extend(xor.iter().map(|&(x, b)| (x, s * b)));
                    step2(&p)
                };
                Self::new(name, ContextLaw::uniform_grid(grid2(&centres(4))), vec![arm(0.2, 0.6)?, arm(0.8, -0.6)?], seed)
            }
            "additive-smoothstep" => {
                let t = 1.0 / 3.0;
                let arm0 = step2(&[
                    ([0.0, 0.0], 0.2),
                    ([t, 0.0], 0.15),
                    ([2.0 * t, 0.0], 0.15),
                    ([0.0, t], 0.15),
                    ([0.0, 2.0 * t], 0.15),
                ])?;
                let arm1 = IndicatorBasisFunction::constant(2, 0.5);
                Self::new(name, ContextLaw::uniform_grid(grid2(&centres(3))), vec![arm0, arm1], seed)
            }
            "flat" => Self::new(
                name,
                ContextLaw::uniform_grid(line(&centres(4))),
                vec![IndicatorBasisFunction::constant(1, 0.5); 2],
                seed,
            ),
            other => Err(Error::InvalidInput(format!("unknown environment preset '{other}' (known: {})", PRESETS.join(", ")))),
        }
    }

    pub fn k(&self) -> usize {
        self.mean.len()
    }

    pub fn dim(&self) -> usize {
        self.mean[0].dim()
    }

    pub fn mean_reward(&self, a: usize, w: &[f64]) -> f64 {
        self.mean[a].eval_point(w)
    }

    pub fn support(&self) -> Option<(&[Context], &[f64])> {
        match &self.law {
            ContextLaw::Grid { points, probs } => Some((points, probs)),
            ContextLaw::Uniform { .. } => None,
        }
    }

    /// Generator for round `t`: the run seed selects the key, the round selects the stream.
    pub fn round_rng(&self, t: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(t);
        rng
    }

    /// The deterministic argmax-of-mean policy (lowest arm on ties).
    pub fn optimal_policy(&self) -> Policy {
        let means = Regressor::new(RegressorKind::SumToOne, self.mean.clone()).expect("validated");
        Policy::Argmax(means)
    }
}

/// Draws a context, an action from `g` and a Bernoulli reward.
pub fn sample_round(env: &Environment, g: &Policy, rng: &mut impl Rng) -> Result<Observation> {
    if g.k() != env.k() {
        return Err(Error::DimensionMismatch { expected: env.k(), got: g.k() });
    }
    let w = env.law.sample(rng);
    let probs = g.probs(w.coords());
    let a = categorical(&probs, rng.random::<f64>() * probs.iter().sum::<f64>());
    let y = u8::from(rng.random::<f64>() < env.mean_reward(a, w.coords()));
    Observation::new(w, a, y, probs[a])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyValue {
    pub value: f64,
    /// Zero for finite context laws.
    pub std_err: f64,
}

/// `E sum_a mu(a, W) pi(a, W)`.
pub fn policy_value(env: &Environment, pi: &Policy) -> PolicyValue {
    let gain = |w: &[f64]| -> f64 { pi.probs(w).iter().enumerate().map(|(a, p)| p * env.mean_reward(a, w)).sum() };
    match &env.law {
        ContextLaw::Grid { points, probs } => {
            let value = points.iter().zip(probs).map(|(w, p)| p * gain(w.coords())).sum();
            PolicyValue { value, std_err: 0.0 }
        }
        ContextLaw::Uniform { .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(env.seed ^ 0x5e_ed0f_f1ce);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..MC_SAMPLES {
                let v = gain(env.law.sample(&mut rng).coords());
                s += v;
                s2 += v * v;
            }
            let n = MC_SAMPLES as f64;
            let mean = s / n;
            let var = (s2 / n - mean * mean).max(0.0);
            PolicyValue { value: mean, std_err: (var / n).sqrt() }
        }
    }
}

/// The value-maximizing member of a sum-to-one class, found by one LP over the support.
pub fn best_in_class_value(env: &Environment, spec: &ClassSpec, s: &NumericalSettings) -> Result<(f64, Policy)> {
    let Some((points, probs)) = env.support() else {
        return Err(Error::InvalidInput("best-in-class value needs a finite context law".into()));
    };
    if spec.kind != RegressorKind::SumToOne || spec.k != env.k() {
        return Err(Error::InvalidInput("best-in-class value needs a sum-to-one class with the environment's K".into()));
    }
    let k = env.k();
    let mut costs = vec![0.0; k * points.len()];
    for (j, (w, p)) in points.iter().zip(probs).enumerate() {
        for a in 0..k {
            costs[j * k + a] = p * env.mean_reward(a, w.coords());
        }
    }
    let class = ConstrainedClass::new(spec, points, &LinearConstraintSet::new())?;
    let sol = class.optimize(&costs, Sense::Max, s)?;
    Ok((sol.value, Policy::PerArm(sol.regressor)))
}

/// One logged round with the schedule in force and cumulative regret terms.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub observation: Observation,
    pub delta: f64,
    pub x: Option<f64>,
    pub v: Option<f64>,
    pub max_is_ratio: Option<f64>,
    /// `sum (V* - Y_s)` over rounds so far.
    pub cum_regret: f64,
    /// `sum (E[Y_s | past] - Y_s)`.
    pub noise_cum: f64,
    pub expl_cost_cum: Option<f64>,
    pub exploit_cost_cum: Option<f64>,
}
