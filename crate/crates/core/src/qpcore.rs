//! Dense convex quadratic programming by operator splitting.
//!
//! One solver covers every optimization in the crate: the MPC subproblems,
//! LP-based support functions, redundancy pruning and feasibility probes.
//! The algorithm is the standard ADMM splitting with over-relaxation and a
//! fixed penalty, followed by a KKT polish step that re-solves the detected
//! active set as an equality system. The polish restores the accuracy that
//! first-order iterations alone cannot reach, so downstream tolerances of
//! 1e-8..1e-9 on support values and Lyapunov decrements are attainable.
//!
//! The iteration schedule is fixed and there is no randomized pivoting, so
//! identical inputs produce bit-identical solutions.

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

/// Hard cap on splitting iterations before giving up.
pub const MAX_ITERATIONS: usize = 200_000;

const RHO: f64 = 1.0;
const SIGMA: f64 = 1e-6;
const OVER_RELAX: f64 = 1.6;
const CHECK_EVERY: usize = 25;
/// First iteration at which a speculative polish is attempted.
const POLISH_FROM: usize = 100;
const INFEAS_TOL: f64 = 1e-9;
/// Ridge used when an LP is posed as a QP.
pub const LP_RIDGE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("hessian is not positive semidefinite within tolerance")]
    NotPsd,
    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIterations,
}

/// Problem data: minimize 0.5 z'Hz + f'z  s.t.  G z <= h,  E z = e.
#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    h: DMatrix<f64>,
    f: DVector<f64>,
    g: DMatrix<f64>,
    g_rhs: DVector<f64>,
    e: DMatrix<f64>,
    e_rhs: DVector<f64>,
}

impl QuadraticProgram {
    /// Unconstrained problem. `h` is symmetrized on construction.
    pub fn new(h: DMatrix<f64>, f: DVector<f64>) -> Result<Self, QpError> {
        if !h.is_square() || h.nrows() != f.len() {
            return Err(QpError::DimensionMismatch(format!(
                "H is {}x{}, f has length {}",
                h.nrows(),
                h.ncols(),
                f.len()
            )));
        }
        let n = f.len();
        let h = (&h + h.transpose()) * 0.5;
        Ok(Self {
            h,
            f,
            g: DMatrix::zeros(0, n),
            g_rhs: DVector::zeros(0),
            e: DMatrix::zeros(0, n),
            e_rhs: DVector::zeros(0),
        })
    }

    pub fn with_inequalities(mut self, g: DMatrix<f64>, rhs: DVector<f64>) -> Result<Self, QpError> {
        if g.ncols() != self.n() || g.nrows() != rhs.len() {
            return Err(QpError::DimensionMismatch(format!(
                "G is {}x{}, h has length {}, n = {}",
                g.nrows(),
                g.ncols(),
                rhs.len(),
                self.n()
            )));
        }
        self.g = g;
        self.g_rhs = rhs;
        Ok(self)
    }

    pub fn with_equalities(mut self, e: DMatrix<f64>, rhs: DVector<f64>) -> Result<Self, QpError> {
        if e.ncols() != self.n() || e.nrows() != rhs.len() {
            return Err(QpError::DimensionMismatch(format!(
                "E is {}x{}, e has length {}, n = {}",
                e.nrows(),
                e.ncols(),
                rhs.len(),
                self.n()
            )));
        }
        self.e = e;
        self.e_rhs = rhs;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.f
    }

    pub fn inequalities(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.g, &self.g_rhs)
    }

    pub fn equalities(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.e, &self.e_rhs)
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub z: DVector<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Indices of active rows in the stacked [inequalities; equalities] order.
    pub active_set: Vec<usize>,
    /// Multipliers for the stacked rows (nonnegative on inequalities).
    pub dual: DVector<f64>,
    pub iterations: usize,
}

/// Splitting iterates carried across solves of the same prepared problem.
#[derive(Debug, Clone)]
pub struct WarmStart {
    x: DVector<f64>,
    z: DVector<f64>,
    y: DVector<f64>,
}

/// A problem whose structure (H and constraint rows) is fixed while the
/// linear term and row bounds vary per solve. The KKT factorization is
/// computed once; per-instance solves only do triangular substitutions.
pub struct PreparedQp {
    n: usize,
    m: usize,
    h: DMatrix<f64>,
    a: DMatrix<f64>,
    a_scaled: DMatrix<f64>,
    row_scale: DVector<f64>,
    is_equality: Vec<bool>,
    kkt: nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    h_factor: Option<Cholesky<f64, nalgebra::Dyn>>,
}

struct RowBounds<'a> {
    lower: &'a DVector<f64>,
    upper: &'a DVector<f64>,
}

impl PreparedQp {
    /// `a` stacks inequality rows first, then equality rows, flagged by
    /// `is_equality`.
    pub fn new(h: DMatrix<f64>, a: DMatrix<f64>, is_equality: Vec<bool>) -> Result<Self, QpError> {
        let n = h.nrows();
        let m = a.nrows();
        if !h.is_square() || a.ncols() != n || is_equality.len() != m {
            return Err(QpError::DimensionMismatch(format!(
                "H {}x{}, A {}x{}, flags {}",
                h.nrows(),
                h.ncols(),
                a.nrows(),
                a.ncols(),
                is_equality.len()
            )));
        }
        let h = (&h + h.transpose()) * 0.5;
        let mut row_scale = DVector::from_element(m, 1.0);
        let mut a_scaled = a.clone();
        for i in 0..m {
            let norm = a.row(i).norm();
            let s = if norm > 1e-12 { norm } else { 1.0 };
            row_scale[i] = s;
            for j in 0..n {
                a_scaled[(i, j)] /= s;
            }
        }
        // Quasi-definite KKT matrix; nonsingular for any PSD H.
        let mut kkt = DMatrix::zeros(n + m, n + m);
        for i in 0..n {
            for j in 0..n {
                kkt[(i, j)] = h[(i, j)];
            }
            kkt[(i, i)] += SIGMA;
        }
        for i in 0..m {
            for j in 0..n {
                kkt[(n + i, j)] = a_scaled[(i, j)];
                kkt[(j, n + i)] = a_scaled[(i, j)];
            }
            kkt[(n + i, n + i)] = -1.0 / RHO;
        }
        let kkt = nalgebra::linalg::LU::new(kkt);
        let h_factor = Cholesky::new(h.clone());
        Ok(Self {
            n,
            m,
            h,
            a,
            a_scaled,
            row_scale,
            is_equality,
            kkt,
            h_factor,
        })
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    /// Solve one instance. `lower`/`upper` are per-row bounds in the
    /// *unscaled* row space; inequality rows use `lower = -inf`.
    pub fn solve(
        &self,
        f: &DVector<f64>,
        lower: &DVector<f64>,
        upper: &DVector<f64>,
        warm: Option<&WarmStart>,
        tol: f64,
    ) -> Result<(QpSolution, WarmStart), QpError> {
        if f.len() != self.n || lower.len() != self.m || upper.len() != self.m {
            return Err(QpError::DimensionMismatch(
                "instance vectors do not match prepared dimensions".into(),
            ));
        }
        // Trivially infeasible zero rows can appear after degenerate
        // constructions; catch them before iterating.
        for i in 0..self.m {
            if self.a.row(i).amax() <= 1e-14 && (upper[i] < -1e-12 || lower[i] > 1e-12) {
                return Ok(self.failed_solution(f, SolveStatus::Infeasible, 0));
            }
        }
        if self.m == 0 {
            return self.solve_unconstrained(f);
        }
        let lower_s = DVector::from_fn(self.m, |i, _| {
            if lower[i].is_finite() {
                lower[i] / self.row_scale[i]
            } else {
                f64::NEG_INFINITY
            }
        });
        let upper_s = DVector::from_fn(self.m, |i, _| {
            if upper[i].is_finite() {
                upper[i] / self.row_scale[i]
            } else {
                f64::INFINITY
            }
        });
        let bounds = RowBounds {
            lower: &lower_s,
            upper: &upper_s,
        };

        let mut x;
        let mut z;
        let mut y;
        match warm {
            Some(w) if w.x.len() == self.n && w.z.len() == self.m => {
                x = w.x.clone();
                z = w.z.clone();
                y = w.y.clone();
            }
            _ => {
                x = DVector::zeros(self.n);
                z = DVector::zeros(self.m);
                for i in 0..self.m {
                    z[i] = 0.0f64.clamp(lower_s[i], upper_s[i]);
                }
                y = DVector::zeros(self.m);
            }
        }

        let mut rhs = DVector::zeros(self.n + self.m);
        let mut x_at_check = x.clone();
        let mut y_at_check = y.clone();
        let mut prev_active: Option<Vec<usize>> = None;
        let mut iter = 0usize;
        while iter < MAX_ITERATIONS {
            iter += 1;
            for i in 0..self.n {
                rhs[i] = SIGMA * x[i] - f[i];
            }
            for i in 0..self.m {
                rhs[self.n + i] = z[i] - y[i] / RHO;
            }
            let sol = self
                .kkt
                .solve(&rhs)
                .ok_or_else(|| QpError::Numerical("singular KKT system".into()))?;
            for i in 0..self.n {
                let xt = sol[i];
                x[i] = OVER_RELAX * xt + (1.0 - OVER_RELAX) * x[i];
            }
            for i in 0..self.m {
                let nu = sol[self.n + i];
                let zt = z[i] + (nu - y[i]) / RHO;
                let w = OVER_RELAX * zt + (1.0 - OVER_RELAX) * z[i] + y[i] / RHO;
                let zp = w.clamp(lower_s[i], upper_s[i]);
                y[i] = RHO * (w - zp);
                z[i] = zp;
            }

            let first_warm_check = iter == 1 && warm.is_some();
            if first_warm_check || iter % CHECK_EVERY == 0 {
                let (rp, rd) = self.residuals(&x, &z, &y, f);
                if rp <= tol && rd <= tol {
                    let active = self.detect_active(&z, &y, &bounds);
                    if let Some(sol) = self.polish(f, lower, upper, &active, tol) {
                        return Ok(self.finish(sol, iter, &x, &z, &y));
                    }
                    // Converged without a clean polish: report the raw iterate.
                    let sol = self.raw_solution(&x, &y, f, rp, rd, SolveStatus::Optimal, iter, &bounds);
                    return Ok(self.finish(sol, iter, &x, &z, &y));
                }
                if iter >= POLISH_FROM {
                    let active = self.detect_active(&z, &y, &bounds);
                    let stable = prev_active.as_deref() == Some(active.as_slice());
                    if stable {
                        if let Some(sol) = self.polish(f, lower, upper, &active, tol) {
                            return Ok(self.finish(sol, iter, &x, &z, &y));
                        }
                    }
                    prev_active = Some(active);
                }
                // Divergence certificates over the window since last check.
                let dx = &x - &x_at_check;
                let dy = &y - &y_at_check;
                if let Some(status) = self.certificate(&dx, &dy, f, &bounds) {
                    return Ok(self.failed_solution(f, status, iter));
                }
                x_at_check.copy_from(&x);
                y_at_check.copy_from(&y);
            }
        }
        let (rp, rd) = self.residuals(&x, &z, &y, f);
        let active = self.detect_active(&z, &y, &bounds);
        if let Some(sol) = self.polish(f, lower, upper, &active, tol) {
            return Ok(self.finish(sol, MAX_ITERATIONS, &x, &z, &y));
        }
        let sol = self.raw_solution(&x, &y, f, rp, rd, SolveStatus::MaxIterations, MAX_ITERATIONS, &bounds);
        Ok(self.finish(sol, MAX_ITERATIONS, &x, &z, &y))
    }

    fn finish(
        &self,
        mut sol: QpSolution,
        iterations: usize,
        x: &DVector<f64>,
        z: &DVector<f64>,
        y: &DVector<f64>,
    ) -> (QpSolution, WarmStart) {
        sol.iterations = iterations;
        let warm = WarmStart {
            x: x.clone(),
            z: z.clone(),
            y: y.clone(),
        };
        (sol, warm)
    }

    fn solve_unconstrained(&self, f: &DVector<f64>) -> Result<(QpSolution, WarmStart), QpError> {
        let z = match &self.h_factor {
            Some(ch) => ch.solve(&(-f)),
            None => {
                let mut hr = self.h.clone();
                for i in 0..self.n {
                    hr[(i, i)] += 1e-12;
                }
                nalgebra::linalg::LU::new(hr)
                    .solve(&(-f))
                    .ok_or_else(|| QpError::Numerical("singular Hessian".into()))?
            }
        };
        let objective = 0.5 * (self.h.clone() * &z).dot(&z) + f.dot(&z);
        let dual_residual = (&self.h * &z + f).amax();
        let sol = QpSolution {
            z: z.clone(),
            objective,
            status: SolveStatus::Optimal,
            primal_residual: 0.0,
            dual_residual,
            active_set: vec![],
            dual: DVector::zeros(0),
            iterations: 0,
        };
        let warm = WarmStart {
            x: z,
            z: DVector::zeros(0),
            y: DVector::zeros(0),
        };
        Ok((sol, warm))
    }

    fn residuals(&self, x: &DVector<f64>, z: &DVector<f64>, y: &DVector<f64>, f: &DVector<f64>) -> (f64, f64) {
        let ax = &self.a_scaled * x;
        let rp = (&ax - z).amax();
        let rd = (&self.h * x + f + self.a_scaled.transpose() * y).amax();
        (rp, rd)
    }

    fn detect_active(&self, z: &DVector<f64>, y: &DVector<f64>, bounds: &RowBounds) -> Vec<usize> {
        let mut active = Vec::new();
        let ynorm = y.amax().max(1.0);
        for i in 0..self.m {
            if self.is_equality[i] {
                active.push(i);
                continue;
            }
            let at_upper = bounds.upper[i].is_finite()
                && bounds.upper[i] - z[i] <= 1e-7 * (1.0 + bounds.upper[i].abs());
            if at_upper || y[i] > 1e-8 * ynorm {
                active.push(i);
            }
        }
        active
    }

    /// Solve the equality-constrained problem on the candidate active set and
    /// accept the result only if it satisfies the full KKT conditions.
    fn polish(
        &self,
        f: &DVector<f64>,
        lower: &DVector<f64>,
        upper: &DVector<f64>,
        active: &[usize],
        tol: f64,
    ) -> Option<QpSolution> {
        let na = active.len();
        let z;
        let mut lam = DVector::zeros(na);
        if na == 0 {
            z = match &self.h_factor {
                Some(ch) => ch.solve(&(-f)),
                None => return None,
            };
        } else {
            let delta = 1e-12;
            let dim = self.n + na;
            let mut kkt = DMatrix::zeros(dim, dim);
            for i in 0..self.n {
                for j in 0..self.n {
                    kkt[(i, j)] = self.h[(i, j)];
                }
                kkt[(i, i)] += delta;
            }
            for (r, &row) in active.iter().enumerate() {
                for j in 0..self.n {
                    kkt[(self.n + r, j)] = self.a[(row, j)];
                    kkt[(j, self.n + r)] = self.a[(row, j)];
                }
                kkt[(self.n + r, self.n + r)] = -delta;
            }
            let lu = nalgebra::linalg::LU::new(kkt);
            let mut rhs = DVector::zeros(dim);
            for i in 0..self.n {
                rhs[i] = -f[i];
            }
            for (r, &row) in active.iter().enumerate() {
                rhs[self.n + r] = if self.is_equality[row] { lower[row] } else { upper[row] };
            }
            let mut sol = lu.solve(&rhs)?;
            // Two rounds of iterative refinement against the unregularized KKT.
            for _ in 0..2 {
                let mut resid = rhs.clone();
                for i in 0..self.n {
                    let mut acc = 0.0;
                    for j in 0..self.n {
                        acc += self.h[(i, j)] * sol[j];
                    }
                    for (r, &row) in active.iter().enumerate() {
                        acc += self.a[(row, i)] * sol[self.n + r];
                    }
                    resid[i] -= acc;
                }
                for (r, &row) in active.iter().enumerate() {
                    let mut acc = 0.0;
                    for j in 0..self.n {
                        acc += self.a[(row, j)] * sol[j];
                    }
                    resid[self.n + r] -= acc;
                }
                let corr = lu.solve(&resid)?;
                sol += corr;
            }
            z = DVector::from_fn(self.n, |i, _| sol[i]);
            for r in 0..na {
                lam[r] = sol[self.n + r];
            }
        }

        // Validate: multiplier signs, stationarity, feasibility of all rows.
        for (r, &row) in active.iter().enumerate() {
            if !self.is_equality[row] && lam[r] < -tol {
                return None;
            }
        }
        let mut grad = &self.h * &z + f;
        for (r, &row) in active.iter().enumerate() {
            for j in 0..self.n {
                grad[j] += self.a[(row, j)] * lam[r];
            }
        }
        let scale = 1.0 + f.amax();
        if grad.amax() > tol * scale {
            return None;
        }
        let ax = &self.a * &z;
        let mut rp = 0.0f64;
        for i in 0..self.m {
            let viol = if self.is_equality[i] {
                (ax[i] - lower[i]).abs()
            } else {
                (ax[i] - upper[i]).max(0.0)
            };
            rp = rp.max(viol / (1.0 + upper[i].abs().min(1e12)));
        }
        if rp > tol {
            return None;
        }
        let mut dual = DVector::zeros(self.m);
        for (r, &row) in active.iter().enumerate() {
            dual[row] = if self.is_equality[row] { lam[r] } else { lam[r].max(0.0) };
        }
        let objective = 0.5 * (&self.h * &z).dot(&z) + f.dot(&z);
        Some(QpSolution {
            z,
            objective,
            status: SolveStatus::Optimal,
            primal_residual: rp,
            dual_residual: grad.amax(),
            active_set: active.to_vec(),
            dual,
            iterations: 0,
        })
    }

    fn raw_solution(
        &self,
        x: &DVector<f64>,
        y: &DVector<f64>,
        f: &DVector<f64>,
        rp: f64,
        rd: f64,
        status: SolveStatus,
        iterations: usize,
        bounds: &RowBounds,
    ) -> QpSolution {
        let mut dual = DVector::zeros(self.m);
        for i in 0..self.m {
            dual[i] = y[i] / self.row_scale[i];
        }
        let z_full = DVector::from_fn(self.m, |i, _| (self.a.row(i) * x)[0]);
        let _ = z_full;
        let objective = 0.5 * (&self.h * x).dot(x) + f.dot(x);
        QpSolution {
            z: x.clone(),
            objective,
            status,
            primal_residual: rp,
            dual_residual: rd,
            active_set: self.detect_active(
                &(&self.a_scaled * x),
                y,
                bounds,
            ),
            dual,
            iterations,
        }
    }

    fn failed_solution(&self, f: &DVector<f64>, status: SolveStatus, iterations: usize) -> (QpSolution, WarmStart) {
        let z = DVector::zeros(self.n);
        let objective = f.dot(&z);
        (
            QpSolution {
                z: z.clone(),
                objective,
                status,
                primal_residual: f64::INFINITY,
                dual_residual: f64::INFINITY,
                active_set: vec![],
                dual: DVector::zeros(self.m),
                iterations,
            },
            WarmStart {
                x: z,
                z: DVector::zeros(self.m),
                y: DVector::zeros(self.m),
            },
        )
    }

    fn certificate(
        &self,
        dx: &DVector<f64>,
        dy: &DVector<f64>,
        f: &DVector<f64>,
        bounds: &RowBounds,
    ) -> Option<SolveStatus> {
        let dy_norm = dy.amax();
        if dy_norm > 1e-12 {
            let aty = self.a_scaled.transpose() * dy;
            let mut support = 0.0;
            let mut valid = true;
            for i in 0..self.m {
                let d = dy[i];
                if d > 0.0 {
                    if bounds.upper[i].is_finite() {
                        support += bounds.upper[i] * d;
                    } else {
                        valid = false;
                    }
                } else if d < 0.0 {
                    if bounds.lower[i].is_finite() {
                        support += bounds.lower[i] * d;
                    } else if d < -INFEAS_TOL * dy_norm {
                        valid = false;
                    }
                }
            }
            if valid && aty.amax() <= INFEAS_TOL * dy_norm && support < -INFEAS_TOL * dy_norm {
                return Some(SolveStatus::Infeasible);
            }
        }
        let dx_norm = dx.amax();
        if dx_norm > 1e-12 {
            let hdx = &self.h * dx;
            let adx = &self.a_scaled * dx;
            let mut ok = hdx.amax() <= INFEAS_TOL * dx_norm && f.dot(dx) < -INFEAS_TOL * dx_norm;
            if ok {
                for i in 0..self.m {
                    let v = adx[i];
                    if bounds.upper[i].is_finite() && v > INFEAS_TOL * dx_norm {
                        ok = false;
                        break;
                    }
                    if bounds.lower[i].is_finite() && v < -INFEAS_TOL * dx_norm {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                return Some(SolveStatus::Unbounded);
            }
        }
        None
    }
}

/// One-shot solve of a [`QuadraticProgram`].
pub fn solve(qp: &QuadraticProgram, tol: f64) -> Result<QpSolution, QpError> {
    let n = qp.n();
    let (g, g_rhs) = qp.inequalities();
    let (e, e_rhs) = qp.equalities();
    let mi = g.nrows();
    let me = e.nrows();
    let mut a = DMatrix::zeros(mi + me, n);
    let mut lower = DVector::from_element(mi + me, f64::NEG_INFINITY);
    let mut upper = DVector::zeros(mi + me);
    let mut flags = vec![false; mi + me];
    for i in 0..mi {
        a.row_mut(i).copy_from(&g.row(i));
        upper[i] = g_rhs[i];
    }
    for i in 0..me {
        a.row_mut(mi + i).copy_from(&e.row(i));
        lower[mi + i] = e_rhs[i];
        upper[mi + i] = e_rhs[i];
        flags[mi + i] = true;
    }
    let prepared = PreparedQp::new(qp.hessian().clone(), a, flags)?;
    let (sol, _) = prepared.solve(qp.linear(), &lower, &upper, None, tol)?;
    Ok(sol)
}

/// Linear program `min c'z  s.t. G z <= h, E z = e`, solved as a QP with a
/// small ridge plus the usual polish step. The polish lands on the optimal
/// vertex, so reported optima are far more accurate than the ridge suggests.
pub fn solve_lp(
    c: &DVector<f64>,
    g: &DMatrix<f64>,
    h: &DVector<f64>,
    e: &DMatrix<f64>,
    e_rhs: &DVector<f64>,
    tol: f64,
) -> Result<QpSolution, QpError> {
    let n = c.len();
    let ridge = DMatrix::from_diagonal_element(n, n, LP_RIDGE);
    let qp = QuadraticProgram::new(ridge, c.clone())?
        .with_inequalities(g.clone(), h.clone())?
        .with_equalities(e.clone(), e_rhs.clone())?;
    let mut sol = solve(&qp, tol)?;
    if sol.status == SolveStatus::Optimal {
        // Report the LP objective, not the ridged one.
        sol.objective = c.dot(&sol.z);
    }
    Ok(sol)
}

/// KKT report for an inequality/equality constrained QP solution, computed
/// independently of the solver internals.
#[derive(Debug, Clone)]
pub struct KktReport {
    pub stationarity: f64,
    pub primal_feasibility: f64,
    pub complementarity: f64,
    pub dual_feasibility: f64,
}

impl KktReport {
    pub fn max_violation(&self) -> f64 {
        self.stationarity
            .max(self.primal_feasibility)
            .max(self.complementarity)
            .max(self.dual_feasibility)
    }
}

/// Check stationarity, feasibility, complementary slackness and dual signs
/// of a reported optimum.
pub fn validate_kkt(qp: &QuadraticProgram, sol: &QpSolution, _tol: f64) -> KktReport {
    let (g, g_rhs) = qp.inequalities();
    let (e, e_rhs) = qp.equalities();
    let mi = g.nrows();
    let me = e.nrows();
    let mut grad = qp.hessian() * &sol.z + qp.linear();
    let mut primal: f64 = 0.0;
    let mut comp: f64 = 0.0;
    let mut dualf: f64 = 0.0;
    for i in 0..mi {
        let yi = if sol.dual.len() == mi + me { sol.dual[i] } else { 0.0 };
        let slack = g_rhs[i] - (g.row(i) * &sol.z)[0];
        primal = primal.max(-slack / (1.0 + g_rhs[i].abs()));
        comp = comp.max((yi * slack).abs() / (1.0 + g_rhs[i].abs()));
        dualf = dualf.max(-yi);
        for j in 0..qp.n() {
            grad[j] += g[(i, j)] * yi;
        }
    }
    for i in 0..me {
        let yi = if sol.dual.len() == mi + me { sol.dual[mi + i] } else { 0.0 };
        let gap = (e.row(i) * &sol.z)[0] - e_rhs[i];
        primal = primal.max(gap.abs() / (1.0 + e_rhs[i].abs()));
        for j in 0..qp.n() {
            grad[j] += e[(i, j)] * yi;
        }
    }
    KktReport {
        stationarity: grad.amax() / (1.0 + qp.linear().amax()),
        primal_feasibility: primal,
        complementarity: comp,
        dual_feasibility: dualf,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dm(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn unconstrained_minimum() {
        let qp = QuadraticProgram::new(DMatrix::identity(2, 2), DVector::from_vec(vec![-1.0, -1.0])).unwrap();
        let sol = solve(&qp, 1e-9).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.z[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.z[1], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.objective, -1.0, epsilon = 1e-9);
    }

    #[test]
    fn clipped_coordinate() {
        let qp = QuadraticProgram::new(DMatrix::identity(2, 2), DVector::from_vec(vec![-3.0, 0.0]))
            .unwrap()
            .with_inequalities(dm(1, 2, &[1.0, 0.0]), DVector::from_vec(vec![1.0]))
            .unwrap();
        let sol = solve(&qp, 1e-9).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.z[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.z[1], 0.0, epsilon = 1e-8);
        let report = validate_kkt(&qp, &sol, 1e-8);
        assert!(report.max_violation() < 1e-8, "kkt violation {:?}", report);
    }

    #[test]
    fn equality_constrained() {
        // min ||z||^2 s.t. z1 + z2 = 2 -> z = (1, 1)
        let qp = QuadraticProgram::new(DMatrix::identity(2, 2), DVector::zeros(2))
            .unwrap()
            .with_equalities(dm(1, 2, &[1.0, 1.0]), DVector::from_vec(vec![2.0]))
            .unwrap();
        let sol = solve(&qp, 1e-9).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.z[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.z[1], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn detects_infeasible() {
        // z <= -1 and -z <= -1 (z >= 1) simultaneously.
        let qp = QuadraticProgram::new(DMatrix::identity(1, 1), DVector::zeros(1))
            .unwrap()
            .with_inequalities(dm(2, 1, &[1.0, -1.0]), DVector::from_vec(vec![-1.0, -1.0]))
            .unwrap();
        let sol = solve(&qp, 1e-9).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn lp_interval_max() {
        // maximize x over [-1, 1]: minimize -x.
        let sol = solve_lp(
            &DVector::from_vec(vec![-1.0]),
            &dm(2, 1, &[1.0, -1.0]),
            &DVector::from_vec(vec![1.0, 1.0]),
            &DMatrix::zeros(0, 1),
            &DVector::zeros(0),
            1e-9,
        )
        .unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.z[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.objective, -1.0, epsilon = 1e-9);
    }

    #[test]
    fn lp_box_sum() {
        // maximize x + y over the unit box -> 2.
        let g = dm(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let h = DVector::from_vec(vec![1.0, 1.0, 1.0, 1.0]);
        let sol = solve_lp(
            &DVector::from_vec(vec![-1.0, -1.0]),
            &g,
            &h,
            &DMatrix::zeros(0, 2),
            &DVector::zeros(0),
            1e-9,
        )
        .unwrap();
        assert_abs_diff_eq!(-sol.objective, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn lp_unbounded() {
        // minimize -x with x >= 0 only (x <= inf): unbounded below.
        let sol = solve_lp(
            &DVector::from_vec(vec![-1.0]),
            &dm(1, 1, &[-1.0]),
            &DVector::from_vec(vec![0.0]),
            &DMatrix::zeros(0, 1),
            &DVector::zeros(0),
            1e-9,
        )
        .unwrap();
        assert_eq!(sol.status, SolveStatus::Unbounded);
    }

    #[test]
    fn deterministic_bitwise() {
        let g = dm(3, 2, &[1.0, 2.0, -1.0, 0.3, 0.5, -1.0]);
        let h = DVector::from_vec(vec![1.0, 0.7, 0.2]);
        let qp = QuadraticProgram::new(dm(2, 2, &[2.0, 0.3, 0.3, 1.0]), DVector::from_vec(vec![-1.0, 2.0]))
            .unwrap()
            .with_inequalities(g, h)
            .unwrap();
        let a = solve(&qp, 1e-9).unwrap();
        let b = solve(&qp, 1e-9).unwrap();
        assert_eq!(a.z.as_slice(), b.z.as_slice());
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }

    #[test]
    fn scaling_leaves_argmin() {
        let g = dm(2, 2, &[1.0, 1.0, -1.0, 0.5]);
        let h = DVector::from_vec(vec![0.3, 0.9]);
        let base = QuadraticProgram::new(dm(2, 2, &[3.0, 0.4, 0.4, 2.0]), DVector::from_vec(vec![1.0, -2.0]))
            .unwrap()
            .with_inequalities(g.clone(), h.clone())
            .unwrap();
        let scaled = QuadraticProgram::new(
            dm(2, 2, &[3.0, 0.4, 0.4, 2.0]) * 7.5,
            DVector::from_vec(vec![1.0, -2.0]) * 7.5,
        )
        .unwrap()
        .with_inequalities(g, h)
        .unwrap();
        let a = solve(&base, 1e-10).unwrap();
        let b = solve(&scaled, 1e-10).unwrap();
        assert!((a.z - b.z).amax() < 1e-8);
    }

    #[test]
    fn warm_start_reuses_structure() {
        let a = dm(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let prepared = PreparedQp::new(DMatrix::identity(2, 2), a, vec![false, false]).unwrap();
        let lower = DVector::from_element(2, f64::NEG_INFINITY);
        let upper = DVector::from_vec(vec![0.5, 0.5]);
        let f = DVector::from_vec(vec![-2.0, -2.0]);
        let (s1, warm) = prepared.solve(&f, &lower, &upper, None, 1e-9).unwrap();
        let (s2, _) = prepared.solve(&f, &lower, &upper, Some(&warm), 1e-9).unwrap();
        assert_abs_diff_eq!(s1.z[0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(s2.z[0], 0.5, epsilon = 1e-9);
        assert!(s2.iterations <= s1.iterations);
    }
}
