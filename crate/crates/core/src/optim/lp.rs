//! Dense two-phase tableau simplex.
//!
//! Pricing is Dantzig's largest reduced cost until a run of degenerate pivots is seen, after
//! which the solver switches to Bland's rule for the rest of the phase, so it cannot cycle.

use crate::error::{Error, Result};
use crate::settings::NumericalSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Self { coeffs, relation, rhs }
    }

    pub fn le(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self::new(coeffs, Relation::Le, rhs)
    }

    pub fn ge(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self::new(coeffs, Relation::Ge, rhs)
    }

    pub fn eq(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self::new(coeffs, Relation::Eq, rhs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub sense: Sense,
    pub constraints: Vec<Constraint>,
    /// Per-variable `(lower, upper)`; either side may be infinite.
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// An LP over nonnegative variables.
    pub fn new(objective: Vec<f64>, sense: Sense) -> Self {
        let n = objective.len();
        Self { objective, sense, constraints: Vec::new(), bounds: vec![(0.0, f64::INFINITY); n] }
    }

    pub fn n(&self) -> usize {
        self.objective.len()
    }

    pub fn push(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    fn check(&self) -> Result<()> {
        let n = self.n();
        if self.bounds.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.bounds.len() });
        }
        for c in &self.constraints {
            if c.coeffs.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: c.coeffs.len() });
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("non-finite LP data".into()));
            }
        }
        for &(lo, hi) in &self.bounds {
            if lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::InvalidInput(format!("empty variable bounds [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Maximum violation of constraints and bounds at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (&xi, &(lo, hi)) in x.iter().zip(&self.bounds) {
            worst = worst.max(lo - xi).max(xi - hi);
        }
        worst
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// One multiplier per entry of `constraints`, such that for LPs whose variables are
    /// bounded only below by zero, `value == sum_i duals[i] * rhs[i]`.
    pub duals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Result<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Ok(s),
            LpOutcome::Infeasible => Err(Error::Infeasible),
            LpOutcome::Unbounded => Err(Error::Unbounded),
        }
    }
}

/// How an original variable is recovered from standard-form columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    Shift { col: usize, offset: f64 },
    Reflect { col: usize, offset: f64 },
    Split { pos: usize, neg: usize },
}

struct Tableau {
    rows: usize,
    cols: usize,
    // row-major, `cols + 1` entries per row, last is the right-hand side
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.data[r * (self.cols + 1) + self.cols]
    }

    fn pivot(&mut self, pr: usize, pc: usize, obj: &mut [f64]) {
        let w = self.cols + 1;
        let p = self.data[pr * w + pc];
        for c in 0..w {
            self.data[pr * w + c] /= p;
        }
        let prow: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.data[r * w + pc];
            if f != 0.0 {
                let row = &mut self.data[r * w..(r + 1) * w];
                for (x, &y) in row.iter_mut().zip(&prow) {
                    *x -= f * y;
                }
                row[pc] = 0.0;
            }
        }
        let f = obj[pc];
        if f != 0.0 {
            for (x, &y) in obj.iter_mut().zip(&prow) {
                *x -= f * y;
            }
            obj[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Reduced-cost row (with the negated objective value in the last slot) for column costs `c`.
    fn reduced_costs(&self, c: &[f64]) -> Vec<f64> {
        let w = self.cols + 1;
        let mut obj: Vec<f64> = c.to_vec();
        obj.push(0.0);
        for r in 0..self.rows {
            let cb = c[self.basis[r]];
            if cb != 0.0 {
                for (x, &y) in obj.iter_mut().zip(&self.data[r * w..(r + 1) * w]) {
                    *x -= cb * y;
                }
            }
        }
        obj
    }

    /// Runs primal simplex on `obj` over columns allowed by `allowed`. Returns false if unbounded.
    fn optimize(&mut self, obj: &mut [f64], allowed: &dyn Fn(usize) -> bool, s: &NumericalSettings) -> Result<bool> {
        let mut degenerate_run = 0usize;
        let mut bland = false;
        for _ in 0..s.max_pivots {
            let entering = if bland {
                (0..self.cols).find(|&j| allowed(j) && obj[j] < -s.optimality_tol)
            } else {
                (0..self.cols)
                    .filter(|&j| allowed(j) && obj[j] < -s.optimality_tol)
                    .min_by(|&a, &b| obj[a].total_cmp(&obj[b]))
            };
            let Some(pc) = entering else { return Ok(true) };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > s.pivot_tol {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - 1e-13
                                || (ratio <= bratio + 1e-13 && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            let Some((pr, ratio)) = leave else { return Ok(false) };
            if ratio <= 1e-13 {
                degenerate_run += 1;
                if degenerate_run > 50 {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
            self.pivot(pr, pc, obj);
        }
        Err(Error::NoConvergence { what: "simplex pivot limit", iterations: s.max_pivots })
    }
}

struct Standardized {
    tableau: Tableau,
    maps: Vec<VarMap>,
    n_struct: usize,
    artificial_from: usize,
    init_col: Vec<usize>,
    row_sign: Vec<f64>,
    n_user_rows: usize,
    cost: Vec<f64>,
    cost_offset: f64,
}

fn standardize(lp: &LinearProgram) -> Standardized {
    let mut maps = Vec::with_capacity(lp.n());
    let mut n_struct = 0;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for &(lo, hi) in &lp.bounds {
        if lo.is_finite() {
            maps.push(VarMap::Shift { col: n_struct, offset: lo });
            if hi.is_finite() {
                bound_rows.push((n_struct, hi - lo));
            }
            n_struct += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Reflect { col: n_struct, offset: hi });
            n_struct += 1;
        } else {
            maps.push(VarMap::Split { pos: n_struct, neg: n_struct + 1 });
            n_struct += 2;
        }
    }

    // rows as (coefficients over structural columns, relation, rhs)
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for c in &lp.constraints {
        let mut coeffs = vec![0.0; n_struct];
        let mut rhs = c.rhs;
        for (i, &a) in c.coeffs.iter().enumerate() {
            match maps[i] {
                VarMap::Shift { col, offset } => {
                    coeffs[col] += a;
                    rhs -= a * offset;
                }
                VarMap::Reflect { col, offset } => {
                    coeffs[col] -= a;
                    rhs -= a * offset;
                }
                VarMap::Split { pos, neg } => {
                    coeffs[pos] += a;
                    coeffs[neg] -= a;
                }
            }
        }
        rows.push((coeffs, c.relation, rhs));
    }
    for &(col, ub) in &bound_rows {
        let mut coeffs = vec![0.0; n_struct];
        coeffs[col] = 1.0;
        rows.push((coeffs, Relation::Le, ub));
    }

    let sign = if lp.sense == Sense::Max { -1.0 } else { 1.0 };
    let mut cost = vec![0.0; n_struct];
    let mut cost_offset = 0.0;
    for (i, &c) in lp.objective.iter().enumerate() {
        let c = sign * c;
        match maps[i] {
            VarMap::Shift { col, offset } => {
                cost[col] += c;
                cost_offset += c * offset;
            }
            VarMap::Reflect { col, offset } => {
                cost[col] -= c;
                cost_offset += c * offset;
            }
            VarMap::Split { pos, neg } => {
                cost[pos] += c;
                cost[neg] -= c;
            }
        }
    }

    let m = rows.len();
    let mut row_sign = vec![1.0; m];
    for (r, row) in rows.iter_mut().enumerate() {
        if row.2 < 0.0 {
            row.0.iter_mut().for_each(|x| *x = -*x);
            row.2 = -row.2;
            row.1 = match row.1 {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
            row_sign[r] = -1.0;
        }
    }
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let artificial_from = n_struct + n_slack;
    let cols = artificial_from + n_art;
    let w = cols + 1;
    let mut data = vec![0.0; m * w];
    let mut basis = vec![0; m];
    let mut init_col = vec![0; m];
    let (mut next_slack, mut next_art) = (n_struct, artificial_from);
    for (r, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        data[r * w..r * w + n_struct].copy_from_slice(coeffs);
        data[r * w + cols] = *rhs;
        match rel {
            Relation::Le => {
                data[r * w + next_slack] = 1.0;
                basis[r] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                data[r * w + next_slack] = -1.0;
                next_slack += 1;
                data[r * w + next_art] = 1.0;
                basis[r] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                data[r * w + next_art] = 1.0;
                basis[r] = next_art;
                next_art += 1;
            }
        }
        init_col[r] = basis[r];
    }
    cost.resize(cols, 0.0);
    Standardized {
        tableau: Tableau { rows: m, cols, data, basis },
        maps,
        n_struct,
        artificial_from,
        init_col,
        row_sign,
        n_user_rows: lp.constraints.len(),
        cost,
        cost_offset,
    }
}

impl Standardized {
    /// Phase I. Returns false if the LP is infeasible.
    fn phase_one(&mut self, s: &NumericalSettings) -> Result<bool> {
        let cols = self.tableau.cols;
        let art = self.artificial_from;
        if art == cols {
            return Ok(true);
        }
        let c1: Vec<f64> = (0..cols).map(|j| if j >= art { 1.0 } else { 0.0 }).collect();
        let mut obj = self.tableau.reduced_costs(&c1);
        self.tableau.optimize(&mut obj, &|_| true, s)?;
        let infeas: f64 = (0..self.tableau.rows)
            .filter(|&r| self.tableau.basis[r] >= art)
            .map(|r| self.tableau.rhs(r))
            .sum();
        let scale = 1.0 + (0..self.tableau.rows).map(|r| self.tableau.rhs(r).abs()).fold(0.0, f64::max);
        if infeas > s.feasibility_tol * scale {
            return Ok(false);
        }
        // drive zero-level artificials out of the basis where possible
        for r in 0..self.tableau.rows {
            if self.tableau.basis[r] >= art {
                if let Some(pc) = (0..art).find(|&j| self.tableau.at(r, j).abs() > 1e-9) {
                    let mut dummy = vec![0.0; cols + 1];
                    self.tableau.pivot(r, pc, &mut dummy);
                }
            }
        }
        Ok(true)
    }

    fn primal(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.n_struct];
        for r in 0..self.tableau.rows {
            let b = self.tableau.basis[r];
            if b < self.n_struct {
                z[b] = self.tableau.rhs(r).max(0.0);
            }
        }
        self.maps
            .iter()
            .map(|m| match *m {
                VarMap::Shift { col, offset } => offset + z[col],
                VarMap::Reflect { col, offset } => offset - z[col],
                VarMap::Split { pos, neg } => z[pos] - z[neg],
            })
            .collect()
    }
}

/// A feasible point of `lp` (the Phase-I vertex), or `None` if the LP is infeasible.
pub fn feasible_point(lp: &LinearProgram, s: &NumericalSettings) -> Result<Option<Vec<f64>>> {
    lp.check()?;
    let mut st = standardize(lp);
    if !st.phase_one(s)? {
        return Ok(None);
    }
    Ok(Some(st.primal()))
}

pub fn solve_lp(lp: &LinearProgram, s: &NumericalSettings) -> Result<LpOutcome> {
    lp.check()?;
    let mut st = standardize(lp);
    if !st.phase_one(s)? {
        return Ok(LpOutcome::Infeasible);
    }
    let art = st.artificial_from;
    let mut obj = st.tableau.reduced_costs(&st.cost);
    if !st.tableau.optimize(&mut obj, &|j| j < art, s)? {
        return Ok(LpOutcome::Unbounded);
    }
    let x = st.primal();
    let sign = if lp.sense == Sense::Max { -1.0 } else { 1.0 };
    let value = lp.objective_value(&x);
    let duals = (0..st.n_user_rows)
        .map(|r| {
            // the initial identity column has zero cost, so its reduced cost is -y_r
            let y = -obj[st.init_col[r]];
            sign * st.row_sign[r] * y
        })
        .collect();
    let _ = st.cost_offset;
    Ok(LpOutcome::Optimal(LpSolution { x, value, duals }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s() -> NumericalSettings {
        NumericalSettings::default()
    }

    #[test]
    fn min_x_with_lower_constraint() {
        let mut lp = LinearProgram::new(vec![1.0], Sense::Min);
        lp.push(Constraint::ge(vec![1.0], 1.0));
        let sol = solve_lp(&lp, &s()).unwrap().optimal().unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert!((sol.value - 1.0).abs() < 1e-12);
        assert!((sol.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn max_sum_on_simplex() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0], Sense::Max);
        lp.push(Constraint::le(vec![1.0, 1.0], 1.0));
        let sol = solve_lp(&lp, &s()).unwrap().optimal().unwrap();
        assert!((sol.value - 1.0).abs() < 1e-12);
        assert!((sol.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0], Sense::Min);
        lp.push(Constraint::le(vec![1.0], -1.0));
        assert_eq!(solve_lp(&lp, &s()).unwrap(), LpOutcome::Infeasible);
        let lp = LinearProgram::new(vec![1.0], Sense::Max);
        assert_eq!(solve_lp(&lp, &s()).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn free_and_boxed_variables() {
        // min x - y, x free with x >= -2 via constraint, y in [0, 3]
        let mut lp = LinearProgram::new(vec![1.0, -1.0], Sense::Min);
        lp.bounds = vec![(f64::NEG_INFINITY, f64::INFINITY), (0.0, 3.0)];
        lp.push(Constraint::ge(vec![1.0, 0.0], -2.0));
        let sol = solve_lp(&lp, &s()).unwrap().optimal().unwrap();
        assert!((sol.value + 5.0).abs() < 1e-12);
        assert!(lp.violation(&sol.x) < 1e-12);
    }

    #[test]
    fn equality_with_redundant_row() {
        let mut lp = LinearProgram::new(vec![1.0, 2.0], Sense::Min);
        lp.push(Constraint::eq(vec![1.0, 1.0], 1.0));
        lp.push(Constraint::eq(vec![2.0, 2.0], 2.0));
        let sol = solve_lp(&lp, &s()).unwrap().optimal().unwrap();
        assert!((sol.value - 1.0).abs() < 1e-12);
        assert_eq!(sol.x, vec![1.0, 0.0]);
    }

    #[test]
    fn phase_one_point_is_feasible() {
        let mut lp = LinearProgram::new(vec![0.0, 0.0], Sense::Min);
        lp.push(Constraint::ge(vec![1.0, 2.0], 2.0));
        lp.push(Constraint::le(vec![1.0, 0.0], 0.5));
        let x = feasible_point(&lp, &s()).unwrap().unwrap();
        assert!(lp.violation(&x) < 1e-12);
    }
}
