//! Linearly constrained least squares by a primal active-set method.
//!
//! Solves `min sum_i w_i (target_i - (D x)_i)^2` under linear constraints and variable bounds.
//! The Hessian `D^T W D` is usually singular (the design has more columns than distinct rows),
//! so a small relative ridge is added; the iteration starts from the simplex Phase-I vertex.

use nalgebra::{DMatrix, DVector};

use super::lp::{feasible_point, Constraint, LinearProgram, Relation, Sense};
use crate::error::{Error, Result};
use crate::settings::NumericalSettings;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProgram {
    pub design: DMatrix<f64>,
    pub target: DVector<f64>,
    /// Nonnegative row weights of the squared residual.
    pub weights: DVector<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
}

impl QuadraticProgram {
    /// Unit weights, variables unbounded.
    pub fn new(design: DMatrix<f64>, target: DVector<f64>) -> Self {
        let (p, n) = design.shape();
        Self {
            design,
            target,
            weights: DVector::from_element(p, 1.0),
            constraints: Vec::new(),
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
        }
    }

    pub fn n(&self) -> usize {
        self.design.ncols()
    }

    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        let r = &self.target - &self.design * x;
        r.iter().zip(self.weights.iter()).map(|(r, w)| w * r * r).sum()
    }

    fn check(&self) -> Result<()> {
        let (p, n) = self.design.shape();
        if self.target.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: self.target.len() });
        }
        if self.weights.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: self.weights.len() });
        }
        if self.weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidInput("negative least-squares weight".into()));
        }
        if self.bounds.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.bounds.len() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub residual: f64,
    /// Indices (into the expanded row list: constraints, then finite bounds) active at `x`.
    pub active: Vec<usize>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QpOutcome {
    Optimal(QpSolution),
    Infeasible,
}

impl QpOutcome {
    pub fn optimal(self) -> Result<QpSolution> {
        match self {
            QpOutcome::Optimal(s) => Ok(s),
            QpOutcome::Infeasible => Err(Error::Infeasible),
        }
    }
}

struct Row {
    a: DVector<f64>,
    b: f64,
    equality: bool,
}

fn expand_rows(qp: &QuadraticProgram) -> Vec<Row> {
    let n = qp.n();
    let mut rows = Vec::new();
    for c in &qp.constraints {
        let a = DVector::from_column_slice(&c.coeffs);
        match c.relation {
            Relation::Le => rows.push(Row { a, b: c.rhs, equality: false }),
            Relation::Ge => rows.push(Row { a: -a, b: -c.rhs, equality: false }),
            Relation::Eq => rows.push(Row { a, b: c.rhs, equality: true }),
        }
    }
    for (i, &(lo, hi)) in qp.bounds.iter().enumerate() {
        if lo.is_finite() {
            let mut a = DVector::zeros(n);
            a[i] = -1.0;
            rows.push(Row { a, b: -lo, equality: false });
        }
        if hi.is_finite() {
            let mut a = DVector::zeros(n);
            a[i] = 1.0;
            rows.push(Row { a, b: hi, equality: false });
        }
    }
    rows
}

/// Gram–Schmidt membership test used to keep the working set linearly independent.
struct Span {
    basis: Vec<DVector<f64>>,
}

impl Span {
    fn residual(&self, a: &DVector<f64>) -> DVector<f64> {
        let mut r = a.clone();
        for q in &self.basis {
            let c = q.dot(&r);
            r.axpy(-c, q, 1.0);
        }
        r
    }

    fn contains(&self, a: &DVector<f64>) -> bool {
        self.residual(a).norm() <= 1e-9 * a.norm().max(1e-300)
    }

    fn try_add(&mut self, a: &DVector<f64>) -> bool {
        let r = self.residual(a);
        let norm = r.norm();
        if norm > 1e-9 * a.norm().max(1e-300) {
            self.basis.push(r / norm);
            true
        } else {
            false
        }
    }
}

pub fn solve_constrained_ls(qp: &QuadraticProgram, s: &NumericalSettings) -> Result<QpOutcome> {
    qp.check()?;
    let n = qp.n();
    let mut lp = LinearProgram::new(vec![0.0; n], Sense::Min);
    lp.constraints = qp.constraints.clone();
    lp.bounds = qp.bounds.clone();
    let Some(x0) = feasible_point(&lp, s)? else {
        return Ok(QpOutcome::Infeasible);
    };
    let rows = expand_rows(qp);
    let m = rows.len();

    let dw = DMatrix::from_fn(qp.design.nrows(), n, |i, j| qp.design[(i, j)] * qp.weights[i]);
    let mut h = qp.design.transpose() * &dw;
    let ridge = s.qp_ridge * (0..n).map(|i| h[(i, i)]).fold(1.0, f64::max);
    for i in 0..n {
        h[(i, i)] += ridge;
    }
    let c = -(dw.transpose() * &qp.target);

    let mut x = DVector::from_vec(x0);
    let scale = 1.0 + rows.iter().map(|r| r.b.abs()).fold(0.0, f64::max);
    let tol = s.feasibility_tol * scale;

    let mut working: Vec<usize> = Vec::new();
    let mut span = Span { basis: Vec::new() };
    for (i, r) in rows.iter().enumerate().filter(|(_, r)| r.equality) {
        if span.try_add(&r.a) {
            working.push(i);
        }
    }
    for (i, r) in rows.iter().enumerate().filter(|(_, r)| !r.equality) {
        if (r.a.dot(&x) - r.b).abs() <= tol && span.try_add(&r.a) {
            working.push(i);
        }
    }

    let cap = s.qp_iteration_factor * (n + m).max(1);
    // after a zero-length step, fall back to lowest-index choices so degenerate vertices
    // cannot cycle
    let mut stalled = false;
    // after a full unblocked step x minimizes over the working face; what the next solve
    // returns is rounding noise from an ill-conditioned KKT matrix
    let mut on_face_min = false;
    for iteration in 0..cap {
        let g = &h * &x + &c;
        let w = working.len();
        let mut kkt = DMatrix::zeros(n + w, n + w);
        kkt.view_mut((0, 0), (n, n)).copy_from(&h);
        for (k, &i) in working.iter().enumerate() {
            for j in 0..n {
                kkt[(n + k, j)] = rows[i].a[j];
                kkt[(j, n + k)] = rows[i].a[j];
            }
        }
        let mut rhs = DVector::zeros(n + w);
        rhs.rows_mut(0, n).copy_from(&(-&g));
        let sol = match kkt.clone().lu().solve(&rhs) {
            Some(x) if x.iter().all(|v| v.is_finite()) => x,
            // a numerically dependent working set: the system is consistent, take the
            // minimum-norm solution
            _ => kkt
                .svd(true, true)
                .solve(&rhs, 1e-12)
                .map_err(|_| Error::NoConvergence { what: "singular active-set KKT system", iterations: iteration })?,
        };
        let p = sol.rows(0, n).into_owned();
        let lambda = sol.rows(n, w).into_owned();


        let step_scale = 1.0 + x.amax();
        if on_face_min || p.amax() <= 1e-12 * step_scale {
            on_face_min = false;
            let drop = working
                .iter()
                .enumerate()
                .filter(|(_, &i)| !rows[i].equality)
                .map(|(k, _)| (k, lambda[k]))
                .filter(|&(_, l)| l < -s.kkt_tol)
                .min_by(|a, b| if stalled { working[a.0].cmp(&working[b.0]) } else { a.1.total_cmp(&b.1) });
            match drop {
                None => {
                    let residual = qp.residual(&x);
                    return Ok(QpOutcome::Optimal(QpSolution { x, residual, active: working, iterations: iteration }));
                }
                Some((k, _)) => {
                    working.remove(k);
                    span = Span { basis: Vec::new() };
                    for &i in &working {
                        span.try_add(&rows[i].a);
                    }
                    continue;
                }
            }
        }

        let mut alpha = 1.0;
        let mut blocking = None;
        for (i, r) in rows.iter().enumerate() {
            if r.equality || working.contains(&i) {
                continue;
            }
            let ap = r.a.dot(&p);
            if ap > 1e-10 * r.a.norm() * p.norm() {
                let t = ((r.b - r.a.dot(&x)) / ap).max(0.0);
                // a normal in the span of the working set cannot block a step in its null space
                if t < alpha && !span.contains(&r.a) {
                    alpha = t;
                    blocking = Some(i);
                }
            }
        }
        stalled = alpha * p.amax() <= 1e-14 * step_scale;
        x.axpy(alpha, &p, 1.0);
        on_face_min = blocking.is_none();
        if let Some(i) = blocking {
            span.try_add(&rows[i].a);
            working.push(i);
        }
    }
    Err(Error::NoConvergence { what: "active-set iteration cap", iterations: cap })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s() -> NumericalSettings {
        NumericalSettings::default()
    }

    #[test]
    fn simplex_projection() {
        let mut qp = QuadraticProgram::new(DMatrix::identity(2, 2), DVector::from_vec(vec![2.0, -1.0]));
        qp.constraints.push(Constraint::eq(vec![1.0, 1.0], 1.0));
        qp.bounds = vec![(0.0, f64::INFINITY); 2];
        let sol = solve_constrained_ls(&qp, &s()).unwrap().optimal().unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-9 && sol.x[1].abs() < 1e-9, "{:?}", sol.x);
        assert!((sol.residual - 2.0).abs() < 1e-8);
    }

    #[test]
    fn feasible_target_is_returned() {
        let mut qp = QuadraticProgram::new(DMatrix::identity(3, 3), DVector::from_vec(vec![0.2, 0.3, 0.5]));
        qp.constraints.push(Constraint::eq(vec![1.0; 3], 1.0));
        qp.bounds = vec![(0.0, 1.0); 3];
        let sol = solve_constrained_ls(&qp, &s()).unwrap().optimal().unwrap();
        assert!((sol.x - &qp.target).amax() < 1e-9);
        assert!(sol.residual < 1e-16);
    }

    #[test]
    fn equality_only_matches_closed_form() {
        // min |t - x|^2 s.t. a.x = b  =>  x = t + a (b - a.t)/|a|^2
        let t = DVector::from_vec(vec![0.3, -1.2, 2.0]);
        let a = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let b = 0.7;
        let mut qp = QuadraticProgram::new(DMatrix::identity(3, 3), t.clone());
        qp.constraints.push(Constraint::eq(a.iter().copied().collect(), b));
        let sol = solve_constrained_ls(&qp, &s()).unwrap().optimal().unwrap();
        let expect = &t + &a * ((b - a.dot(&t)) / a.norm_squared());
        assert!((sol.x - expect).amax() < 1e-9);
    }

    #[test]
    fn infeasible_constraints() {
        let mut qp = QuadraticProgram::new(DMatrix::identity(1, 1), DVector::from_vec(vec![0.0]));
        qp.constraints.push(Constraint::ge(vec![1.0], 2.0));
        qp.constraints.push(Constraint::le(vec![1.0], 1.0));
        assert_eq!(solve_constrained_ls(&qp, &s()).unwrap(), QpOutcome::Infeasible);
    }

    #[test]
    fn weighted_rank_deficient_design() {
        // two columns map to the same row: only their sum is identified
        let d = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let mut qp = QuadraticProgram::new(d, DVector::from_vec(vec![3.0]));
        qp.weights = DVector::from_vec(vec![4.0]);
        qp.bounds = vec![(0.0, 1.0); 2];
        let sol = solve_constrained_ls(&qp, &s()).unwrap().optimal().unwrap();
        assert!((sol.x[0] + sol.x[1] - 2.0).abs() < 1e-8);
        assert!((sol.residual - 4.0).abs() < 1e-7);
    }
}
