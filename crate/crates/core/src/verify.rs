//! Seeded property suites, shared by the `verify` command and the acceptance tests.
//!
//! Every suite draws its instances from a fixed ChaCha8 stream, so a report is reproducible.
//! A nonzero [`VerifyOptions::perturbation`] is added to one coefficient on the checked side
//! of the `svn`, `grids` and `isratio` suites; it exists to prove that they can fail.

use nalgebra::DVector;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{sectional_variation_bruteforce, vitali_variation_bruteforce, IndicatorBasisFunction};
use crate::context::{Context, Observation};
use crate::egreedy::{hinge_risk, hinge_risk_oracle, policy_risk};
use crate::envsim::{ContextLaw, Environment};
use crate::error::{Error, Result};
use crate::gpe::{delta_tau, v_tau, x_tau};
use crate::grid::RectangularGrid;
use crate::optim::{
    ellipsoid_find_from, iteration_cap, solve_lp, Constraint, EllipsoidOutcome, LinearProgram, LpOutcome,
    SeparationResult, Sense,
};
use crate::oracles::{erm_direct, erm_hinge, lccsco, ClassSpec, LinearConstraintSet};
use crate::policy::{empirical_is_ratio, Policy, Regressor, RegressorKind};
use crate::settings::NumericalSettings;

pub const SUITES: [&str; 8] = ["svn", "grids", "ellipsoid", "lp", "representation", "calibration", "isratio", "schedules"];

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub perturbation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub passed: usize,
    pub failed: usize,
    /// The first few failure descriptions.
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn new(suite: &'static str) -> Self {
        Self { suite, passed: 0, failed: 0, failures: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
            if self.failures.len() < 10 {
                self.failures.push(what());
            }
        }
    }

    fn check_result(&mut self, r: Result<bool>, what: impl FnOnce() -> String) {
        match r {
            Ok(ok) => self.check(ok, what),
            Err(e) => self.check(false, || format!("{}: {e}", what())),
        }
    }

    pub fn ok(&self) -> bool {
        self.failed == 0 && self.passed > 0
    }
}

/// Runs one suite by name, or every suite for `"all"`.
pub fn run_suite(name: &str, opts: VerifyOptions) -> Result<Vec<SuiteReport>> {
    if name == "all" {
        return SUITES.iter().map(|s| run_one(s, opts)).collect();
    }
    Ok(vec![run_one(name, opts)?])
}

fn run_one(name: &str, opts: VerifyOptions) -> Result<SuiteReport> {
    Ok(match name {
        "svn" => svn_suite(opts),
        "grids" => grids_suite(opts),
        "ellipsoid" => ellipsoid_suite(opts),
        "lp" => lp_suite(opts),
        "representation" => representation_suite(opts),
        "calibration" => calibration_suite(opts),
        "isratio" => isratio_suite(opts),
        "schedules" => schedules_suite(opts),
        other => {
            return Err(Error::InvalidInput(format!("unknown suite '{other}' (known: {}, all)", SUITES.join(", "))))
        }
    })
}

fn rng_for(opts: VerifyOptions, salt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(salt);
    rng
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Roughly log-spaced integers in `[lo, hi]`, deduplicated.
pub fn log_spaced(lo: usize, hi: usize, n: usize) -> Vec<usize> {
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<usize> =
        (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1).max(1) as f64).exp().round() as usize).collect();
    out.dedup();
    out
}

pub fn random_grid(rng: &mut impl Rng, dim: usize, max_inner: usize) -> RectangularGrid {
    let knots = (0..dim)
        .map(|_| {
            let mut k: Vec<f64> = (0..rng.random_range(0..=max_inner)).map(|_| rng.random_range(0.05..0.95)).collect();
            k.extend([0.0, 1.0]);
            k.sort_by(f64::total_cmp);
            k.dedup();
            k
        })
        .collect();
    RectangularGrid::new(knots).expect("sorted knots with both endpoints")
}

fn random_function(rng: &mut impl Rng, dim: usize) -> IndicatorBasisFunction {
    // coordinates come from a small pool so that anchors share knots
    let pool: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).chain([0.0]).collect();
    let mut anchors: Vec<Vec<f64>> = Vec::new();
    for _ in 0..rng.random_range(1..=6) {
        let a: Vec<f64> = (0..dim).map(|_| *pool.choose(rng).expect("nonempty")).collect();
        if !anchors.contains(&a) {
            anchors.push(a);
        }
    }
    let coefficients = anchors.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
    IndicatorBasisFunction::new(dim, anchors, coefficients).expect("distinct anchors in the cube")
}

fn perturbed(f: &IndicatorBasisFunction, eps: f64) -> IndicatorBasisFunction {
    if eps == 0.0 {
        return f.clone();
    }
    let mut beta = f.coefficients().to_vec();
    beta[0] += eps;
    IndicatorBasisFunction::new(f.dim(), f.anchors().to_vec(), beta).expect("same anchors")
}

/// Closed-form sectional variation norm against the brute-force sum on the minimal split,
/// and monotonicity of brute-force Vitali sums along coarse ⊂ minimal ⊂ refined splits.
pub fn svn_suite(opts: VerifyOptions) -> SuiteReport {
    let mut rep = SuiteReport::new("svn");
    let mut rng = rng_for(opts, 1);
    for i in 0..100 {
        let dim = 1 + i % 3;
        let f = random_function(&mut rng, dim);
        let split = f.minimal_split();
        let closed = perturbed(&f, opts.perturbation).sectional_variation_norm();
        let brute = sectional_variation_bruteforce(&f, &split);
        rep.check((closed - brute).abs() <= 1e-12, || format!("instance {i}: closed form {closed} vs brute force {brute}"));

        let refined = split.merge(&random_grid(&mut rng, dim, 3)).expect("same dimension");
        let coarse_knots: Vec<Vec<f64>> = (0..dim)
            .map(|l| {
                let k = split.knots(l);
                let mut keep: Vec<f64> = k.iter().copied().filter(|x| *x == 0.0 || *x == 1.0 || rng.random_bool(0.5)).collect();
                keep.dedup();
                keep
            })
            .collect();
        let coarse = RectangularGrid::new(coarse_knots).expect("subset of a valid grid");
        let (vc, vm, vr) = (
            vitali_variation_bruteforce(&f, &coarse),
            vitali_variation_bruteforce(&f, &split),
            vitali_variation_bruteforce(&f, &refined),
        );
        rep.check(vc <= vm + 1e-12 && vm <= vr + 1e-12, || format!("instance {i}: refinement chain {vc} {vm} {vr}"));
    }
    rep
}

fn random_simplex(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| -rng.random_range(1e-3..1.0f64).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

/// A sum-to-one regressor that is a valid policy on `grid`, hence everywhere.
pub fn random_per_arm(rng: &mut impl Rng, grid: &RectangularGrid, k: usize) -> Regressor {
    let table: Vec<(Vec<f64>, Vec<f64>)> = grid.points().into_iter().map(|p| (p, random_simplex(rng, k))).collect();
    let arm = |a: usize| {
        IndicatorBasisFunction::from_grid_values(grid, |w| {
            table.iter().find(|(p, _)| p.as_slice() == w).expect("grid point").1[a]
        })
    };
    Regressor::new(RegressorKind::SumToOne, (0..k).map(arm).collect()).expect("consistent arms")
}

/// Policies valid at their grid points satisfy the simplex constraints at random off-grid
/// probes.
pub fn grids_suite(opts: VerifyOptions) -> SuiteReport {
    let mut rep = SuiteReport::new("grids");
    let mut rng = rng_for(opts, 2);
    for i in 0..20 {
        let dim = 1 + i % 2;
        let k = 2 + i % 3;
        let grid = random_grid(&mut rng, dim, 4);
        let f = random_per_arm(&mut rng, &grid, k);
        let mut arms = f.arms().to_vec();
        arms[0] = perturbed(&arms[0], opts.perturbation);
        let f = Regressor::new(RegressorKind::SumToOne, arms).expect("same shapes");
        let mut worst = 0.0f64;
        for _ in 0..10_000 {
            let w: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..=1.0)).collect();
            let v = f.values(&w);
            let neg = v.iter().copied().fold(0.0, f64::min).abs();
            worst = worst.max(neg).max((v.iter().sum::<f64>() - 1.0).abs());
        }
        rep.check(worst <= 1e-12, || format!("policy {i}: simplex violation {worst:e} off the grid"));
    }
    rep
}

/// Hidden-ball feasibility in `n in {2, 5, 10, 20}`, found within the call budget.
pub fn ellipsoid_suite(opts: VerifyOptions) -> SuiteReport {
    let mut rep = SuiteReport::new("ellipsoid");
    let mut rng = rng_for(opts, 3);
    for i in 0..100 {
        let n = [2, 5, 10, 20][i % 4];
        let radius = 10.0;
        let inner = rng.random_range(0.01..1.0);
        let dir = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let c = dir.normalize() * rng.random_range(0.0..radius - inner);
        let cap = iteration_cap(n, radius, inner);
        let mut oracle = |y: &DVector<f64>| -> Result<SeparationResult> {
            let a = y - &c;
            if a.norm() <= inner {
                Ok(SeparationResult::Inside)
            } else {
                let offset = a.dot(&c) + inner * a.norm();
                Ok(SeparationResult::Hyperplane { normal: a, offset })
            }
        };
        let outcome = ellipsoid_find_from(&mut oracle, DVector::zeros(n), radius, inner);
        rep.check_result(
            outcome.map(|o| match o {
                EllipsoidOutcome::Found { point, calls } => calls <= cap && (point - &c).norm() <= inner,
                EllipsoidOutcome::NotFound { .. } => false,
            }),
            || format!("trial {i} (n={n}, Delta={inner:.3}): not found within {cap} calls"),
        );
    }
    rep
}

fn solve_small(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let x = m.lu().solve(&DVector::from_column_slice(b))?;
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}

/// Best vertex of `{x >= 0, A x <= b}` by enumerating every choice of `n` tight rows.
pub fn vertex_optimum(c: &[f64], rows: &[(Vec<f64>, f64)], sense: Sense) -> Option<f64> {
    let n = c.len();
    let mut all: Vec<(Vec<f64>, f64)> = rows.to_vec();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = -1.0;
        all.push((e, 0.0));
    }
    let mut best: Option<f64> = None;
    let mut pick = vec![0usize; n];
    fn rec(
        start: usize,
        depth: usize,
        pick: &mut Vec<usize>,
        all: &[(Vec<f64>, f64)],
        c: &[f64],
        sense: Sense,
        best: &mut Option<f64>,
    ) {
        let n = c.len();
        if depth == n {
            let a: Vec<Vec<f64>> = pick.iter().map(|&i| all[i].0.clone()).collect();
            let b: Vec<f64> = pick.iter().map(|&i| all[i].1).collect();
            if let Some(x) = solve_small(&a, &b) {
                if all.iter().all(|(r, rhs)| r.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= rhs + 1e-9) {
                    let v: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                    let better = match (sense, *best) {
                        (_, None) => true,
                        (Sense::Min, Some(b)) => v < b,
                        (Sense::Max, Some(b)) => v > b,
                    };
                    if better {
                        *best = Some(v);
                    }
                }
            }
            return;
        }
        for i in start..all.len() {
            pick[depth] = i;
            rec(i + 1, depth + 1, pick, all, c, sense, best);
        }
    }
    rec(0, 0, &mut pick, &all, c, sense, &mut best);
    best
}

/// Random bounded LPs against vertex enumeration, plus the strong-duality identity.
pub fn lp_suite(opts: VerifyOptions) -> SuiteReport {
    let mut rep = SuiteReport::new("lp");
    let mut rng = rng_for(opts, 4);
    let s = NumericalSettings::default();
    for i in 0..100 {
        let n = rng.random_range(1..=3);
        let m = rng.random_range(1..=4);
        let sense = if i % 2 == 0 { Sense::Min } else { Sense::Max };
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut rows: Vec<(Vec<f64>, f64)> =
            (0..m).map(|_| ((0..n).map(|_| rng.random_range(-1.0..1.0)).collect(), rng.random_range(-0.5..2.0))).collect();
        // a bounding row keeps every instance bounded
        rows.push((vec![1.0; n], 3.0));
        let mut lp = LinearProgram::new(c.clone(), sense);
        for (a, b) in &rows {
            lp.push(Constraint::le(a.clone(), *b));
        }
        let expect = vertex_optimum(&c, &rows, sense);
        let got = solve_lp(&lp, &s);
        rep.check_result(
            got.map(|o| match (o, expect) {
                (LpOutcome::Optimal(sol), Some(v)) => {
                    let dual: f64 = sol.duals.iter().zip(&rows).map(|(y, (_, b))| y * b).sum();
                    (sol.value - v).abs() <= 1e-7 && (sol.value - dual).abs() <= 1e-7 && lp.violation(&sol.x) <= 1e-8
                }
                (LpOutcome::Infeasible, None) => true,
                _ => false,
            }),
            || format!("instance {i}: simplex disagrees with vertex enumeration ({expect:?})"),
        );
    }
    rep
}

const COEF_STEP: f64 = 0.05;

/// Enumerates `f_1 = sum beta_j 1{w >= x_j}` over anchors `{0, 1/2}^d` with `beta` on the
/// `COEF_STEP` lattice and `sum |beta| <= budget`; `visit` gets the coefficient vector.
fn enumerate_lattice(n: usize, units: i64, visit: &mut impl FnMut(&[f64])) {
    fn rec(i: usize, left: i64, beta: &mut Vec<f64>, visit: &mut impl FnMut(&[f64])) {
        if i == beta.len() {
            visit(beta);
            return;
        }
        for k in -left..=left {
            beta[i] = k as f64 * COEF_STEP;
            rec(i + 1, left - k.abs(), beta, visit);
        }
    }
    rec(0, units, &mut vec![0.0; n], visit);
}

fn half_anchors(dim: usize) -> Vec<Vec<f64>> {
    (0..1usize << dim).map(|m| (0..dim).map(|l| if m >> l & 1 == 1 { 0.5 } else { 0.0 }).collect()).collect()
}

fn lattice_eval(anchors: &[Vec<f64>], beta: &[f64], w: &[f64]) -> f64 {
    anchors.iter().zip(beta).filter(|(x, _)| w.iter().zip(x.iter()).all(|(a, b)| a >= b)).map(|(_, b)| b).sum()
}

/// Lattice brute force of `objective(f_1 values at contexts)` over the two-arm class.
fn brute_force(dim: usize, budget: f64, kind: RegressorKind, contexts: &[Vec<f64>], objective: impl Fn(&[f64]) -> f64) -> f64 {
    let anchors = half_anchors(dim);
    let units = (budget / COEF_STEP).round() as i64;
    let mut best = f64::INFINITY;
    enumerate_lattice(anchors.len(), units, &mut |beta| {
        if kind == RegressorKind::SumToOne {
            // arm 2 is 1 - f_1: its origin coefficient is 1 - beta_0
            let rest: f64 = beta[1..].iter().map(|b| b.abs()).sum();
            if (1.0 - beta[0]).abs() + rest > budget + 1e-9 {
                return;
            }
            if anchors.iter().any(|p| !(-1e-12..=1.0 + 1e-12).contains(&lattice_eval(&anchors, beta, p))) {
                return;
            }
        }
        let values: Vec<f64> = contexts.iter().map(|w| lattice_eval(&anchors, beta, w)).collect();
        best = best.min(objective(&values));
    });
    best
}

/// LP optimum over the grid basis against a lattice brute force over the class, for
/// cost-sensitive optimization, direct ERM and hinge ERM.
pub fn representation_suite(opts: VerifyOptions) -> SuiteReport {
    let mut rep = SuiteReport::new("representation");
    let mut rng = rng_for(opts, 5);
    let s = NumericalSettings::default();
    for i in 0..50 {
        let dim = 1 + i % 2;
        let budget = [0.6, 1.2][(i / 2) % 2];
        let t = rng.random_range(1..=4);
        let contexts: Vec<Vec<f64>> =
            (0..t).map(|_| (0..dim).map(|_| if rng.random_bool(0.5) { 0.25 } else { 0.75 }).collect()).collect();
        let ctx: Vec<Context> = contexts.iter().map(|w| Context::new(w.clone()).expect("in cube")).collect();
        let (lp_value, brute) = match i % 3 {
            0 => {
                let spec = ClassSpec::new(2, RectangularGrid::corners(dim), budget, RegressorKind::SumToOne).expect("valid");
                let costs: Vec<f64> = (0..2 * t).map(|_| rng.random_range(0.0..1.0)).collect();
                let lp = lccsco(&ctx, &costs, &LinearConstraintSet::new(), &spec, Sense::Min, &s).map(|o| o.value);
                let brute = brute_force(dim, budget, RegressorKind::SumToOne, &contexts, |v| {
                    v.iter().enumerate().map(|(j, f)| costs[2 * j] * f + costs[2 * j + 1] * (1.0 - f)).sum()
                });
                (lp, brute)
            }
            variant => {
                let history: Vec<Observation> = ctx
                    .iter()
                    .map(|w| {
                        Observation::new(w.clone(), rng.random_range(0..2), rng.random_range(0..=1), rng.random_range(0.2..0.8))
                            .expect("valid observation")
                    })
                    .collect();
                let loss = |o: &Observation, f: f64| {
                    let fa = if o.action == 0 { f } else if variant == 1 { 1.0 - f } else { -f };
                    let phi = if variant == 1 { fa } else { (1.0 + fa).max(0.0) };
                    o.loss() / o.propensity * phi
                };
                let objective = |v: &[f64]| history.iter().zip(v).map(|(o, &f)| loss(o, f)).sum::<f64>();
                if variant == 1 {
                    let spec = ClassSpec::new(2, RectangularGrid::corners(dim), budget, RegressorKind::SumToOne).expect("valid");
                    (erm_direct(&history, &spec, &s).map(|f| f.objective), brute_force(dim, budget, RegressorKind::SumToOne, &contexts, objective))
                } else {
                    let spec = ClassSpec::new(2, RectangularGrid::corners(dim), budget, RegressorKind::SumToZero).expect("valid");
                    (erm_hinge(&history, &spec, &s).map(|f| f.objective), brute_force(dim, budget, RegressorKind::SumToZero, &contexts, objective))
                }
            }
        };
        rep.check_result(lp_value.map(|v| (v - brute).abs() <= 1e-6 && v <= brute + 1e-9), || {
            format!("instance {i} (d={dim}, t={t}, M={budget}, kind {}): LP vs brute force {brute}", i % 3)
        });
    }
    rep
}

fn random_line_env(rng: &mut impl Rng, k: usize) -> Result<Environment> {
    let n = rng.random_range(1..=5);
    let mut xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let points: Vec<Context> = xs.iter().map(|&x| Context::scalar(x)).collect::<Result<_>>()?;
    let probs = random_simplex(rng, points.len());
    let grid = RectangularGrid::new(vec![[vec![0.0], xs.clone(), vec![1.0]].concat().into_iter().fold(Vec::new(), |mut v, x| {
        if v.last() != Some(&x) {
            v.push(x);
        }
        v
    })])?;
    let means: Vec<Vec<f64>> = grid.points().iter().map(|_| (0..k).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    let pts = grid.points();
    let mean = (0..k)
        .map(|a| IndicatorBasisFunction::from_grid_values(&grid, |w| means[pts.iter().position(|p| p.as_slice() == w).expect("grid point")][a]))
        .collect();
    Environment::new("random", ContextLaw::Grid { points, probs }, mean, 0)
}

/// The hinge calibration inequality on random finite environments and sum-to-zero regressors.
pub fn calibration_suite(opts: VerifyOptions) -> SuiteReport {
    let mut rep = SuiteReport::new("calibration");
    let mut rng = rng_for(opts, 6);
    for i in 0..200 {
        let k = 2 + i % 2;
        let check = (|| -> Result<bool> {
            let env = random_line_env(&mut rng, k)?;
            let grid = random_grid(&mut rng, 1, 3);
            let scale = rng.random_range(0.1..3.0);
            let free: Vec<Vec<f64>> = grid.points().iter().map(|_| (0..k - 1).map(|_| rng.random_range(-scale..scale)).collect()).collect();
            let pts = grid.points();
            let value = |w: &[f64], a: usize| {
                let row = &free[pts.iter().position(|p| p.as_slice() == w).expect("grid point")];
                if a < k - 1 { row[a] } else { -row.iter().sum::<f64>() }
            };
            let f = Regressor::new(
                RegressorKind::SumToZero,
                (0..k).map(|a| IndicatorBasisFunction::from_grid_values(&grid, |w| value(w, a))).collect(),
            )?;
            let oracle = hinge_risk_oracle(&env)?;
            let lhs = policy_risk(&env, &Policy::Argmax(f.clone())) - policy_risk(&env, &env.optimal_policy());
            let rhs = hinge_risk(&env, &f)? - oracle.risk;
            Ok(lhs <= rhs + 1e-6)
        })();
        rep.check_result(check, || format!("pair {i} (K={k}): excess risk exceeds excess hinge risk"));
    }
    rep
}

/// Under the uniform design the empirical IS ratio of any valid policy is exactly `K`.
pub fn isratio_suite(opts: VerifyOptions) -> SuiteReport {
    let mut rep = SuiteReport::new("isratio");
    let mut rng = rng_for(opts, 7);
    for i in 0..100 {
        let k = if i % 2 == 0 { 2 } else { 4 };
        let dim = 1 + i % 3;
        let grid = random_grid(&mut rng, dim, 3);
        let f = random_per_arm(&mut rng, &grid, k);
        let policy = match i % 4 {
            0 | 1 => {
                let mut arms = f.arms().to_vec();
                arms[0] = perturbed(&arms[0], opts.perturbation);
                Policy::PerArm(Regressor::new(RegressorKind::SumToOne, arms).expect("same shapes"))
            }
            2 => Policy::Argmax(f),
            _ => Policy::mixture(rng.random_range(0.0..1.0), Policy::PerArm(f)).expect("delta in range"),
        };
        let contexts: Vec<Context> = (0..rng.random_range(1..=30))
            .map(|_| Context::new((0..dim).map(|_| rng.random_range(0.0..=1.0)).collect()).expect("in cube"))
            .collect();
        let r = empirical_is_ratio(&policy, &Policy::Uniform { k }, &contexts);
        rep.check_result(r.map(|r| (r - k as f64).abs() <= 1e-12), || format!("policy {i} (K={k}): ratio differs from K"));
    }
    rep
}

/// The width and variance schedules, written out directly from their definitions.
pub fn reference_schedule(epsilon: f64, delta: f64, tau: usize, c: f64, p: f64, k: usize) -> (f64, f64) {
    let t = tau as f64;
    let log = (t * (t + 1.0) / epsilon).ln();
    let c1p = if p < 2.0 { 64.0 * c.sqrt() / (1.0 - p / 2.0) } else { 1.0 + 64.0 * 2f64.powf(p / 2.0 - 1.0) * c.sqrt() / (p / 2.0 - 1.0) };
    let v = 2.0 * k as f64
        + (c1p * t.powf(-(0.5f64.min(1.0 / p))) + 32.0 * (log / t).sqrt() + 16.0 * 2f64.ln() / t + 16.0 * log / t) / delta;
    let c1 = if p < 1.0 { 127.0 * c.sqrt() / (1.0 - p) } else { 1.0 + 127.0 * c.sqrt() * 2f64.powf((p - 1.0) / 2.0) / (p - 1.0) };
    let a = v.sqrt() * (c1 * t.powf(-(0.5f64.min(0.5 / p))) + 37.0 * (log / t).sqrt() + (3.0 * 2f64.ln() + 3.0 * log) / (delta * t));
    let b = 2.0 * (v * log / t).sqrt() + 2.0 * log / (delta * t);
    (2.0 * a + 2.0 * b, v)
}

/// Library schedules against [`reference_schedule`], and sublinear growth of `sum x_tau`.
pub fn schedules_suite(opts: VerifyOptions) -> SuiteReport {
    let mut rep = SuiteReport::new("schedules");
    let mut rng = rng_for(opts, 8);
    for i in 0..1000 {
        let epsilon = rng.random_range(1e-3..0.5);
        let delta = rng.random_range(1e-3..=1.0);
        let tau = rng.random_range(1..100_000);
        let c = rng.random_range(0.1..10.0);
        let p = [rng.random_range(0.05..0.95), rng.random_range(1.05..1.95), rng.random_range(2.05..6.0)][i % 3];
        let k = rng.random_range(2..=8);
        let (x_ref, v_ref) = reference_schedule(epsilon, delta, tau, c, p, k);
        let got = v_tau(epsilon, delta, tau, c, p, k).and_then(|v| Ok((x_tau(epsilon, delta, v, tau, c, p)?, v)));
        rep.check_result(
            got.map(|(x, v)| ((x - x_ref) / x_ref).abs() <= 1e-12 && ((v - v_ref) / v_ref).abs() <= 1e-12),
            || format!("tuple {i} (eps={epsilon}, delta={delta}, tau={tau}, c={c}, p={p}, K={k})"),
        );
    }
    let slope = (|| -> Result<f64> {
        let horizon = 100_000;
        let mut cum = Vec::with_capacity(horizon);
        let mut total = 0.0;
        for tau in 1..=horizon {
            let d = delta_tau(tau, 0.5);
            total += x_tau(0.05, d, v_tau(0.05, d, tau, 1.0, 0.5, 2)?, tau, 1.0, 0.5)?;
            cum.push(total);
        }
        let ts = log_spaced(horizon / 100, horizon, 30);
        let ys: Vec<f64> = ts.iter().map(|&t| cum[t - 1]).collect();
        Ok(loglog_slope(&ts.iter().map(|&t| t as f64).collect::<Vec<_>>(), &ys))
    })();
    let shown = format!("{slope:?}");
    rep.check_result(slope.map(|s| s <= 0.6), || format!("cumulative width slope {shown} exceeds 0.6 at p = 0.5"));
    rep
}
