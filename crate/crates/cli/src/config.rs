//! JSON run configuration.

use std::path::{Path, PathBuf};

use gpe_core::egreedy::{Comparator, EgreedyConfig, Refit, Variant};
use gpe_core::envsim::{ContextLaw, Environment};
use gpe_core::gpe::GpeConfig;
use gpe_core::oracles::ClassSpec;
use gpe_core::{RectangularGrid, RegressorKind};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Gpe,
    EgreedyDirect,
    EgreedyHinge,
}

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Gpe => "gpe",
            Algorithm::EgreedyDirect => "egreedy-direct",
            Algorithm::EgreedyHinge => "egreedy-hinge",
        }
    }

    fn kind(self) -> RegressorKind {
        match self {
            Algorithm::EgreedyHinge => RegressorKind::SumToZero,
            _ => RegressorKind::SumToOne,
        }
    }

    fn default_budget(self) -> f64 {
        match self {
            Algorithm::EgreedyHinge => 3.0,
            _ => 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub preset: String,
    /// Replaces the preset's context probabilities (same order as its support).
    #[serde(default)]
    pub probs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureConfig {
    #[default]
    Full,
    Additive,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassConfig {
    /// Sectional variation budget `M`; defaults to 2 (3 for the hinge variant).
    pub budget: Option<f64>,
    #[serde(default)]
    pub structure: StructureConfig,
    /// Per-component budget multiplier `C` of the additive structure.
    pub coef_bound: Option<f64>,
    /// Extra knots per dimension merged into the basis grid; defaults to `{0, 1}^d`.
    pub knots: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpeSection {
    pub epsilon: f64,
    pub p: f64,
    pub c: f64,
    pub width_scale: f64,
    pub doubling_search: bool,
}

impl Default for GpeSection {
    fn default() -> Self {
        Self { epsilon: 0.05, p: 0.5, c: 1.0, width_scale: 1.0, doubling_search: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefitConfig {
    #[default]
    EveryRound,
    Doubling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComparatorConfig {
    #[default]
    Pointwise,
    BestInClass,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EgreedySection {
    pub p: f64,
    pub refit: RefitConfig,
    pub comparator: ComparatorConfig,
}

impl Default for EgreedySection {
    fn default() -> Self {
        Self { p: 0.5, refit: RefitConfig::EveryRound, comparator: ComparatorConfig::Pointwise }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    /// Row label in `compare` output; defaults to the algorithm name.
    pub label: Option<String>,
    pub environment: EnvironmentConfig,
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    /// Seeds run by `compare`; defaults to `[seed]`.
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub class: ClassConfig,
    #[serde(default)]
    pub gpe: GpeSection,
    #[serde(default)]
    pub egreedy: EgreedySection,
    pub output: Option<PathBuf>,
}

/// Built algorithm configuration.
#[derive(Debug, Clone)]
pub enum Plan {
    Gpe(GpeConfig),
    Egreedy(EgreedyConfig),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            format!("invalid config at '{path}': {}", e.into_inner())
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), String> {
        if self.horizon == 0 {
            return Err("invalid config at 'horizon': must be at least 1".into());
        }
        if matches!(&self.seeds, Some(s) if s.is_empty()) {
            return Err("invalid config at 'seeds': must not be empty".into());
        }
        let g = &self.gpe;
        if !(g.epsilon > 0.0 && g.epsilon < 1.0) {
            return Err(format!("invalid config at 'gpe.epsilon': {} is not in (0, 1)", g.epsilon));
        }
        if !(g.width_scale > 0.0) {
            return Err(format!("invalid config at 'gpe.width_scale': {} must be positive", g.width_scale));
        }
        if let Some(m) = self.class.budget {
            if !(m >= 0.0) {
                return Err(format!("invalid config at 'class.budget': {m} must be nonnegative"));
            }
        }
        // resolves the preset and overrides
        self.environment(self.seed)?;
        Ok(())
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.algorithm.label().to_string())
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| vec![self.seed])
    }

    pub fn environment(&self, seed: u64) -> Result<Environment, String> {
        let env = Environment::preset(&self.environment.preset, seed).map_err(|e| format!("invalid config at 'environment.preset': {e}"))?;
        let Some(probs) = &self.environment.probs else {
            return Ok(env);
        };
        let Some((points, _)) = env.support() else {
            return Err("invalid config at 'environment.probs': the preset has no finite support".into());
        };
        if probs.len() != points.len() {
            return Err(format!("invalid config at 'environment.probs': expected {} entries, got {}", points.len(), probs.len()));
        }
        let law = ContextLaw::Grid { points: points.to_vec(), probs: probs.clone() };
        Environment::new(env.name.clone(), law, env.mean.clone(), seed).map_err(|e| format!("invalid config at 'environment.probs': {e}"))
    }

    pub fn plan(&self, env: &Environment) -> Result<Plan, String> {
        let dim = env.dim();
        let mut grid = RectangularGrid::corners(dim);
        if let Some(knots) = &self.class.knots {
            let mut full = knots.clone();
            for k in &mut full {
                k.extend([0.0, 1.0]);
                k.sort_by(f64::total_cmp);
                k.dedup();
            }
            let extra = RectangularGrid::new(full).map_err(|e| format!("invalid config at 'class.knots': {e}"))?;
            grid = grid.merge(&extra).map_err(|e| format!("invalid config at 'class.knots': {e}"))?;
        }
        let budget = self.class.budget.unwrap_or(self.algorithm.default_budget());
        let kind = self.algorithm.kind();
        let spec = match self.class.structure {
            StructureConfig::Full => ClassSpec::new(env.k(), grid, budget, kind),
            StructureConfig::Additive => ClassSpec::additive(env.k(), grid, budget, self.class.coef_bound.unwrap_or(1.0), kind),
        }
        .map_err(|e| format!("invalid config at 'class': {e}"))?;
        Ok(match self.algorithm {
            Algorithm::Gpe => {
                let mut cfg = GpeConfig::new(spec, self.horizon);
                cfg.epsilon = self.gpe.epsilon;
                cfg.p = self.gpe.p;
                cfg.c = self.gpe.c;
                cfg.width_scale = self.gpe.width_scale;
                cfg.doubling_search = self.gpe.doubling_search;
                cfg.schedule().map_err(|e| format!("invalid config at 'gpe': {e}"))?;
                Plan::Gpe(cfg)
            }
            Algorithm::EgreedyDirect | Algorithm::EgreedyHinge => {
                let variant = if self.algorithm == Algorithm::EgreedyDirect { Variant::Direct } else { Variant::Hinge };
                let mut cfg = EgreedyConfig::new(variant, spec, self.horizon);
                cfg.p = self.egreedy.p;
                cfg.refit = match self.egreedy.refit {
                    RefitConfig::EveryRound => Refit::EveryRound,
                    RefitConfig::Doubling => Refit::Doubling,
                };
                cfg.comparator = match self.egreedy.comparator {
                    ComparatorConfig::Pointwise => Comparator::Pointwise,
                    ComparatorConfig::BestInClass => Comparator::BestInClass,
                };
                Plan::Egreedy(cfg)
            }
        })
    }

    /// Environments are the same when preset and context probabilities agree.
    pub fn same_environment(&self, other: &Self) -> bool {
        self.environment == other.environment
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let cfg = RunConfig::parse(r#"{"algorithm": "gpe", "environment": {"preset": "two-cell"}, "horizon": 5}"#).unwrap();
        assert_eq!(cfg.seeds(), vec![0]);
        assert_eq!(cfg.label(), "gpe");
        assert_eq!(cfg.gpe, GpeSection::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse(r#"{"algorithm": "gpe", "environment": {"preset": "two-cell"}, "horizon": 5, "gpe": {"widht_scale": 1}}"#)
            .unwrap_err();
        assert!(err.contains("gpe.widht_scale"), "{err}");
    }

    #[test]
    fn bad_values_are_rejected() {
        let base = |extra: &str| format!(r#"{{"algorithm": "egreedy-hinge", "environment": {{"preset": "two-cell"}}, "horizon": 5{extra}}}"#);
        assert!(RunConfig::parse(&base("")).is_ok());
        assert!(RunConfig::parse(&base(r#", "class": {"budget": -1}"#)).unwrap_err().contains("class.budget"));
        assert!(RunConfig::parse(&base(r#", "gpe": {"epsilon": 2}"#)).unwrap_err().contains("gpe.epsilon"));
        let preset = RunConfig::parse(r#"{"algorithm": "gpe", "environment": {"preset": "nope"}, "horizon": 5}"#).unwrap_err();
        assert!(preset.contains("environment.preset"), "{preset}");
        let probs = RunConfig::parse(r#"{"algorithm": "gpe", "environment": {"preset": "two-cell", "probs": [1]}, "horizon": 5}"#);
        assert!(probs.unwrap_err().contains("environment.probs"));
    }

    #[test]
    fn plan_uses_variant_defaults() {
        let cfg = RunConfig::parse(r#"{"algorithm": "egreedy-hinge", "environment": {"preset": "two-cell"}, "horizon": 5}"#).unwrap();
        let env = cfg.environment(0).unwrap();
        match cfg.plan(&env).unwrap() {
            Plan::Egreedy(c) => {
                assert_eq!(c.spec.budget, 3.0);
                assert_eq!(c.spec.kind, RegressorKind::SumToZero);
            }
            Plan::Gpe(_) => panic!("wrong plan"),
        }
    }
}
