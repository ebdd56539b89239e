//! Contexts and logged observations.

use crate::error::{Error, Result};

/// A point of the unit cube `[0,1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Context(Vec<f64>);

impl Context {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidInput("context must have at least one coordinate".into()));
        }
        if let Some(bad) = coords.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::InvalidInput(format!("context coordinate {bad} outside [0,1]")));
        }
        Ok(Self(coords))
    }

    pub fn scalar(x: f64) -> Result<Self> {
        Self::new(vec![x])
    }

    pub fn origin(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// Closed coordinatewise comparison `self >= anchor`.
    pub fn dominates(&self, anchor: &[f64]) -> bool {
        dominates(&self.0, anchor)
    }
}

pub(crate) fn dominates(point: &[f64], anchor: &[f64]) -> bool {
    point.iter().zip(anchor).all(|(p, a)| p >= a)
}

/// One logged bandit round. Arms are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub context: Context,
    pub action: usize,
    pub reward: u8,
    /// Design probability of the played arm at play time.
    pub propensity: f64,
}

impl Observation {
    pub fn new(context: Context, action: usize, reward: u8, propensity: f64) -> Result<Self> {
        if reward > 1 {
            return Err(Error::InvalidInput(format!("reward must be 0 or 1, got {reward}")));
        }
        if !(propensity > 0.0 && propensity <= 1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!("propensity {propensity} outside (0,1]")));
        }
        Ok(Self { context, action, reward, propensity })
    }

    /// `1 - Y`, the loss indicator.
    pub fn loss(&self) -> f64 {
        f64::from(1 - self.reward)
    }
}
