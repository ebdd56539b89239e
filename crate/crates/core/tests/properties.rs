use gpe_core::basis::{sectional_variation_bruteforce, vitali_variation_bruteforce};
use gpe_core::egreedy::{run_egreedy, EgreedyConfig, Variant};
use gpe_core::envsim::{best_in_class_value, policy_value, Environment};
use gpe_core::gpe::{h_value_and_grad, run_gpe, GpeConfig, PolicyClassState};
use gpe_core::optim::{
    ellipsoid_find, iteration_cap, solve_constrained_ls, solve_lp, Constraint, EllipsoidOutcome, LinearProgram,
    LpOutcome, QuadraticProgram, SeparationResult, Sense,
};
use gpe_core::oracles::{erm_direct, lccsco, ClassSpec, LinearConstraintSet};
use gpe_core::verify::{random_grid, random_per_arm, vertex_optimum};
use gpe_core::{
    empirical_is_ratio, Context, IndicatorBasisFunction, NumericalSettings, Observation, Policy, RectangularGrid,
    RegressorKind,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn s() -> NumericalSettings {
    NumericalSettings::default()
}

fn unit() -> impl Strategy<Value = f64> {
    // a few exact knots so that anchors coincide
    prop_oneof![Just(0.0), Just(0.5), 0.0..1.0f64]
}

fn indicator(dim: usize) -> impl Strategy<Value = IndicatorBasisFunction> {
    prop::collection::vec((prop::collection::vec(unit(), dim), -2.0..2.0f64), 1..7).prop_map(move |terms| {
        let mut anchors: Vec<Vec<f64>> = Vec::new();
        let mut coefs = Vec::new();
        for (a, b) in terms {
            if !anchors.contains(&a) {
                anchors.push(a);
                coefs.push(b);
            }
        }
        IndicatorBasisFunction::new(dim, anchors, coefs).unwrap()
    })
}

fn any_indicator() -> impl Strategy<Value = IndicatorBasisFunction> {
    (1usize..=3).prop_flat_map(indicator)
}

fn contexts(dim: usize, n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Context>> {
    prop::collection::vec(prop::collection::vec(0.0..=1.0f64, dim), n)
        .prop_map(|v| v.into_iter().map(|w| Context::new(w).unwrap()).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn svn_matches_brute_force(f in any_indicator()) {
        let brute = sectional_variation_bruteforce(&f, &f.minimal_split());
        prop_assert!((f.sectional_variation_norm() - brute).abs() <= 1e-12);
    }

    #[test]
    fn vitali_sums_grow_under_refinement(f in any_indicator(), seed in any::<u64>()) {
        let split = f.minimal_split();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let finer = split.merge(&random_grid(&mut rng, f.dim(), 3)).unwrap();
        let finest = finer.merge(&random_grid(&mut rng, f.dim(), 3)).unwrap();
        let (a, b, c) = (
            vitali_variation_bruteforce(&f, &split),
            vitali_variation_bruteforce(&f, &finer),
            vitali_variation_bruteforce(&f, &finest),
        );
        prop_assert!(a <= b + 1e-12 && b <= c + 1e-12);
        prop_assert!(sectional_variation_bruteforce(&f, &split) <= sectional_variation_bruteforce(&f, &finest) + 1e-12);
    }

    #[test]
    fn evaluation_is_linear_in_coefficients(f in any_indicator(), c in -5.0..5.0f64, w in prop::collection::vec(0.0..=1.0f64, 3)) {
        let w = &w[..f.dim()];
        let g = f.scaled(c);
        prop_assert!((g.eval_point(w) - c * f.eval_point(w)).abs() <= 1e-12 * (1.0 + c.abs()));
        prop_assert!((g.sectional_variation_norm() - c.abs() * f.sectional_variation_norm()).abs() <= 1e-12 * (1.0 + c.abs()));
    }

    #[test]
    fn grid_valid_policies_are_valid_everywhere(seed in any::<u64>(), dim in 1usize..=2, k in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = random_grid(&mut rng, dim, 3);
        let f = random_per_arm(&mut rng, &grid, k);
        prop_assert!(f.validate(1e-12).is_ok());
        for _ in 0..200 {
            let w = Context::new((0..dim).map(|_| rand::Rng::random_range(&mut rng, 0.0..=1.0)).collect()).unwrap();
            let v = f.values(w.coords());
            prop_assert!(v.iter().all(|&x| x >= -1e-12));
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn uniform_design_ratio_is_k(seed in any::<u64>(), k in 2usize..=5, delta in 0.0..=1.0f64, ws in contexts(2, 1..20)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = random_grid(&mut rng, 2, 2);
        let f = random_per_arm(&mut rng, &grid, k);
        for pi in [Policy::PerArm(f.clone()), Policy::Argmax(f.clone()), Policy::mixture(delta, Policy::PerArm(f)).unwrap()] {
            let r = empirical_is_ratio(&pi, &Policy::Uniform { k }, &ws).unwrap();
            prop_assert!((r - k as f64).abs() <= 1e-12);
        }
    }

    #[test]
    fn simplex_agrees_with_vertices_and_duality(
        n in 1usize..=3,
        raw in prop::collection::vec((prop::collection::vec(-1.0..1.0f64, 3), -0.5..2.0f64), 1..=4),
        c in prop::collection::vec(-1.0..1.0f64, 3),
        maximize in any::<bool>(),
    ) {
        let c = c[..n].to_vec();
        let mut rows: Vec<(Vec<f64>, f64)> = raw.into_iter().map(|(a, b)| (a[..n].to_vec(), b)).collect();
        rows.push((vec![1.0; n], 3.0));
        let sense = if maximize { Sense::Max } else { Sense::Min };
        let mut lp = LinearProgram::new(c.clone(), sense);
        for (a, b) in &rows {
            lp.push(Constraint::le(a.clone(), *b));
        }
        match (solve_lp(&lp, &s()).unwrap(), vertex_optimum(&c, &rows, sense)) {
            (LpOutcome::Optimal(sol), Some(v)) => {
                prop_assert!((sol.value - v).abs() <= 1e-7);
                let dual: f64 = sol.duals.iter().zip(&rows).map(|(y, (_, b))| y * b).sum();
                prop_assert!((sol.value - dual).abs() <= 1e-7);
            }
            (LpOutcome::Infeasible, None) => {}
            (got, want) => prop_assert!(false, "simplex {got:?} vs vertices {want:?}"),
        }
    }

    #[test]
    fn projection_residual_is_normal_to_the_constraints(
        target in prop::collection::vec(-3.0..3.0f64, 4),
        rows in prop::collection::vec((prop::collection::vec(-1.0..1.0f64, 4), -1.0..1.0f64), 1..=2),
    ) {
        let mut qp = QuadraticProgram::new(DMatrix::identity(4, 4), DVector::from_vec(target.clone()));
        for (a, b) in &rows {
            qp.constraints.push(Constraint::eq(a.clone(), *b));
        }
        let sol = solve_constrained_ls(&qp, &s()).unwrap().optimal().unwrap();
        let a = DMatrix::from_fn(rows.len(), 4, |i, j| rows[i].0[j]);
        let r = &sol.x - DVector::from_vec(target);
        // r must lie in the row space of A: its component in the null space vanishes
        let svd = a.clone().svd(false, true);
        let vt = svd.v_t.unwrap();
        let rank = svd.singular_values.iter().filter(|&&x| x > 1e-8).count();
        let in_span: DVector<f64> = (0..rank).map(|i| vt.row(i).transpose() * vt.row(i).dot(&r.transpose())).sum();
        prop_assume!(rank == rows.len());
        prop_assert!((&r - in_span).amax() <= 1e-7);
        prop_assert!((&a * &sol.x - DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1))).amax() <= 1e-8);
    }

    #[test]
    fn box_constrained_ls_beats_feasible_points(
        target in prop::collection::vec(-2.0..2.0f64, 3),
        probes in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 3), 20),
    ) {
        let mut qp = QuadraticProgram::new(DMatrix::identity(3, 3), DVector::from_vec(target));
        qp.bounds = vec![(0.0, 1.0); 3];
        qp.constraints.push(Constraint::le(vec![1.0, 1.0, 1.0], 1.5));
        let sol = solve_constrained_ls(&qp, &s()).unwrap().optimal().unwrap();
        for p in probes {
            if p.iter().sum::<f64>() > 1.5 {
                continue;
            }
            prop_assert!(sol.residual <= qp.residual(&DVector::from_vec(p)) + 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ellipsoid_finds_hidden_balls(n in 1usize..=8, inner in 0.01..0.5f64, dir in prop::collection::vec(-1.0..1.0f64, 8), frac in 0.0..1.0f64) {
        let radius = 5.0;
        let d = DVector::from_column_slice(&dir[..n]);
        prop_assume!(d.norm() > 1e-3);
        let c = d.normalize() * frac * (radius - inner);
        let mut oracle = |y: &DVector<f64>| -> gpe_core::Result<SeparationResult> {
            let a = y - &c;
            if a.norm() <= inner {
                Ok(SeparationResult::Inside)
            } else {
                let offset = a.dot(&c) + inner * a.norm();
                Ok(SeparationResult::Hyperplane { normal: a, offset })
            }
        };
        match ellipsoid_find(&mut oracle, n, radius, inner).unwrap() {
            EllipsoidOutcome::Found { point, calls } => {
                prop_assert!(calls <= iteration_cap(n, radius, inner));
                prop_assert!((point - &c).norm() <= inner);
            }
            EllipsoidOutcome::NotFound { .. } => prop_assert!(false, "ball missed"),
        }
    }

    #[test]
    fn lccsco_min_is_monotone_in_budget(ws in contexts(1, 1..5), costs in prop::collection::vec(0.0..1.0f64, 8), m in 0.5..3.0f64) {
        let costs = &costs[..2 * ws.len()];
        let mut last = f64::INFINITY;
        for budget in [m, m + 0.5, m + 2.0] {
            let spec = ClassSpec::new(2, RectangularGrid::corners(1), budget, RegressorKind::SumToOne).unwrap();
            let v = lccsco(&ws, costs, &LinearConstraintSet::new(), &spec, Sense::Min, &s()).unwrap().value;
            prop_assert!(v <= last + 1e-9);
            last = v;
        }
    }

    #[test]
    fn erm_direct_beats_random_members(
        ws in contexts(1, 1..6),
        obs in prop::collection::vec((0usize..2, 0u8..=1, 0.1..0.9f64), 6),
        seed in any::<u64>(),
    ) {
        let history: Vec<Observation> = ws.iter().zip(&obs).map(|(w, &(a, y, g))| Observation::new(w.clone(), a, y, g).unwrap()).collect();
        let budget = 6.0;
        let spec = ClassSpec::new(2, RectangularGrid::corners(1), budget, RegressorKind::SumToOne).unwrap();
        let fit = erm_direct(&history, &spec, &s()).unwrap();
        prop_assert!(fit.regressor.validate(1e-9).is_ok());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let grid = random_grid(&mut rng, 1, 2);
            let f = random_per_arm(&mut rng, &grid, 2);
            if f.svn() > budget {
                continue;
            }
            let obj: f64 = history.iter().map(|o| o.loss() / o.propensity * f.eval(o.action, &o.context).unwrap()).sum();
            prop_assert!(fit.objective <= obj + 1e-9);
        }
    }

    #[test]
    fn best_in_class_dominates_members(seed in any::<u64>(), preset in prop::sample::select(vec!["two-cell", "checkerboard", "additive-smoothstep"])) {
        let env = Environment::preset(preset, 0).unwrap();
        let budget = 4.0;
        let spec = ClassSpec::new(2, RectangularGrid::corners(env.dim()), budget, RegressorKind::SumToOne).unwrap();
        let (best, _) = best_in_class_value(&env, &spec, &s()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let grid = random_grid(&mut rng, env.dim(), 2);
            let f = random_per_arm(&mut rng, &grid, 2);
            if f.svn() <= budget {
                prop_assert!(policy_value(&env, &Policy::PerArm(f)).value <= best + 1e-9);
            }
        }
        let uniform = policy_value(&env, &Policy::Uniform { k: 2 }).value;
        let (points, probs) = env.support().unwrap();
        let mean: f64 = points.iter().zip(probs).map(|(w, p)| p * (0..2).map(|a| env.mean_reward(a, w.coords())).sum::<f64>() / 2.0).sum();
        prop_assert!((uniform - mean).abs() <= 1e-12);
    }

    #[test]
    fn h_gradient_matches_finite_differences(t in 2usize..8, k in 2usize..4, delta in 0.05..1.0f64, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = k * (t - 1);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let (_, g) = h_value_and_grad(&w, &z, delta, k, t).unwrap();
        for i in 0..n {
            let eps = 1e-6;
            let (mut up, mut dn) = (w.clone(), w.clone());
            up[i] += eps;
            dn[i] -= eps;
            let fd = (h_value_and_grad(&up, &z, delta, k, t).unwrap().0 - h_value_and_grad(&dn, &z, delta, k, t).unwrap().0) / (2.0 * eps);
            prop_assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1e-3));
        }
    }
}

fn gpe_cfg(t: usize) -> GpeConfig {
    let spec = ClassSpec::new(2, RectangularGrid::corners(1), 2.0, RegressorKind::SumToOne).unwrap();
    GpeConfig { width_scale: 1e-4, ..GpeConfig::new(spec, t) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn gpe_runs_are_reproducible_and_certified(seed in any::<u64>()) {
        let env = Environment::preset("two-cell", seed).unwrap();
        let a = run_gpe(&env, &gpe_cfg(60)).unwrap();
        let b = run_gpe(&env, &gpe_cfg(60)).unwrap();
        prop_assert_eq!(&a.records, &b.records);
        for r in &a.records[1..] {
            prop_assert!(r.max_is_ratio.unwrap() <= 4.0 + 1e-6);
        }
    }

    #[test]
    fn candidate_sets_are_nested(seed in any::<u64>()) {
        // replaying the history: every later constraint set contains the earlier rows
        let env = Environment::preset("two-cell", seed).unwrap();
        let run = run_gpe(&env, &gpe_cfg(40)).unwrap();
        let mut state = PolicyClassState::new(run.state.spec.clone()).unwrap();
        let cfg = gpe_cfg(40);
        let schedule = cfg.schedule().unwrap();
        let mut prev: Vec<(Vec<f64>, f64)> = Vec::new();
        for (t, r) in run.records.iter().enumerate() {
            state.record(r.observation.clone()).unwrap();
            state.eliminate(schedule.x(t + 1), &s()).unwrap();
            prop_assert!(state.constraints.len() == prev.len() + 1);
            prop_assert!(state.constraints[..prev.len()] == prev[..]);
            prev = state.constraints.clone();
        }
        prop_assert_eq!(prev, run.state.constraints);
    }

    #[test]
    fn egreedy_exploitation_cost_is_nonnegative(seed in any::<u64>(), hinge in any::<bool>()) {
        let env = Environment::preset("two-cell", seed).unwrap();
        let (variant, kind, m) = if hinge { (Variant::Hinge, RegressorKind::SumToZero, 3.0) } else { (Variant::Direct, RegressorKind::SumToOne, 2.0) };
        let spec = ClassSpec::new(2, RectangularGrid::corners(1), m, kind).unwrap();
        let run = run_egreedy(&env, &EgreedyConfig::new(variant, spec, 80)).unwrap();
        let mut last = (0.0, 1.0);
        for r in &run.records {
            let e = r.exploit_cost_cum.unwrap();
            prop_assert!(e >= last.0 - 1e-12);
            prop_assert!(r.delta <= last.1 && r.delta > 0.0);
            last = (e, r.delta);
        }
    }
}
