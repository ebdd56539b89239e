//! Numerical tolerances shared by every solver and validator.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericalSettings {
    /// Pivot magnitude below which a tableau entry is treated as zero.
    pub pivot_tol: f64,
    /// Constraint satisfaction required of an LP or QP solution.
    pub feasibility_tol: f64,
    /// Reduced-cost tolerance used for simplex optimality.
    pub optimality_tol: f64,
    /// Stationarity tolerance for the active-set KKT conditions.
    pub kkt_tol: f64,
    /// Absolute slack allowed when validating simplex / sum-to-zero constraints.
    pub validation_tol: f64,
    /// Active-set iterations are capped at `qp_iteration_factor * (n + m)`.
    pub qp_iteration_factor: usize,
    /// Ridge added to the least-squares Hessian, relative to its largest diagonal entry.
    pub qp_ridge: f64,
    /// Hard cap on simplex pivots per phase.
    pub max_pivots: usize,
}

impl Default for NumericalSettings {
    fn default() -> Self {
        Self {
            pivot_tol: 1e-11,
            feasibility_tol: 1e-8,
            optimality_tol: 1e-10,
            kkt_tol: 1e-7,
            validation_tol: 1e-9,
            qp_iteration_factor: 10,
            qp_ridge: 1e-12,
            max_pivots: 200_000,
        }
    }
}
