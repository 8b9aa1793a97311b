//! Exact solver for the small projection QPs of the safety filter:
//!
//! ```text
//!     minimize   1/2 |u - u_t|^2
//!     subject to A u <= b
//! ```
//!
//! The identity Hessian makes this a Euclidean projection onto a polyhedron. It is
//! solved with a dual active-set method (Goldfarb-Idnani specialised to an identity
//! Hessian): start from the unconstrained minimizer `u_t`, repeatedly add the most
//! violated constraint and take primal/dual steps that keep every active constraint
//! tight and every multiplier non-negative. The method needs no feasible starting
//! point and proves infeasibility when a violated constraint has no step direction
//! and no multiplier to release.

use alloc::vec::Vec;

use libm::sqrt;
use nalgebra::{DMatrix, DVector};

/// Hard cap on add/drop pivots.
pub const MAX_PIVOTS: usize = 1000;

/// Rows with a smaller norm are treated as `0 <= b`.
pub const DEGENERATE_ROW_NORM: f64 = 1e-12;

/// Default penalty on the slack of the relaxed problem.
pub const DEFAULT_SLACK_WEIGHT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum QpError {
    #[error("the constraint set is empty")]
    Infeasible,
    #[error("active-set iteration limit of {MAX_PIVOTS} pivots reached")]
    MaxIterations,
    #[error("malformed problem: {0}")]
    InvalidProblem(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QpStatus {
    /// Unique minimizer of the original problem.
    Optimal,
    /// Minimizer of the slack-relaxed problem; the original was infeasible.
    Relaxed,
    /// No usable solution; the caller fell back to the target.
    Error,
}

impl QpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::Relaxed => "relaxed",
            Self::Error => "error",
        }
    }
}

/// `min 1/2 |u - target|^2  s.t.  a u <= b`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub target: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl QpProblem {
    pub fn new(target: DVector<f64>, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, QpError> {
        let p = Self { target, a, b };
        p.check()?;
        Ok(p)
    }

    pub fn num_vars(&self) -> usize {
        self.target.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.b.len()
    }

    fn check(&self) -> Result<(), QpError> {
        if self.target.is_empty() {
            return Err(QpError::InvalidProblem("at least one variable is required"));
        }
        if self.a.nrows() != self.b.len() {
            return Err(QpError::InvalidProblem("A and b have different row counts"));
        }
        if self.a.nrows() > 0 && self.a.ncols() != self.target.len() {
            return Err(QpError::InvalidProblem("A column count differs from the target length"));
        }
        let finite = self.target.iter().chain(self.a.iter()).chain(self.b.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(QpError::InvalidProblem("non-finite entry"));
        }
        Ok(())
    }

    /// `1/2 |u - target|^2`.
    pub fn objective(&self, u: &DVector<f64>) -> f64 {
        0.5 * (u - &self.target).norm_squared()
    }

    /// Largest constraint violation `max(A u - b, 0)`.
    pub fn max_violation(&self, u: &DVector<f64>) -> f64 {
        if self.num_constraints() == 0 {
            return 0.0;
        }
        (&self.a * u - &self.b).iter().fold(0.0f64, |acc, v| acc.max(*v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u: DVector<f64>,
    pub status: QpStatus,
    /// Indices of constraints active at the solution, in the order they were added.
    pub active_set: Vec<usize>,
    /// One multiplier per constraint (zero when inactive), for the `1/2` objective.
    pub multipliers: DVector<f64>,
    /// Norm of the slack vector; zero for `Optimal`.
    pub slack_norm: f64,
    pub pivots: usize,
}

/// Largest violation among the KKT conditions of `p` at `(u, lambda)`:
/// stationarity, primal feasibility, dual feasibility and complementarity.
pub fn kkt_residual(p: &QpProblem, u: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
    let mut grad = u - &p.target;
    if p.num_constraints() > 0 {
        grad += p.a.transpose() * lambda;
    }
    let mut worst = grad.amax();
    for i in 0..p.num_constraints() {
        let slack = p.a.row(i).dot(&u.transpose()) - p.b[i];
        worst = worst.max(slack).max(-lambda[i]).max((lambda[i] * slack).abs());
    }
    worst
}

/// Solves `p` exactly. Fails with [`QpError::Infeasible`] when no point satisfies
/// `A u <= b` (up to `tol`).
pub fn solve(p: &QpProblem, tol: f64) -> Result<QpSolution, QpError> {
    p.check()?;
    if !(tol > 0.0) {
        return Err(QpError::InvalidProblem("tolerance must be positive"));
    }
    let mut rows = Vec::with_capacity(p.num_constraints());
    for i in 0..p.num_constraints() {
        let a = p.a.row(i).transpose();
        let norm = a.norm();
        if norm < DEGENERATE_ROW_NORM {
            if p.b[i] < -tol {
                return Err(QpError::Infeasible);
            }
            continue;
        }
        rows.push(Row { index: i, normal: a / norm, bound: p.b[i] / norm, scale: norm });
    }
    let proj = project(&p.target, &rows, tol)?;

    let mut multipliers = DVector::zeros(p.num_constraints());
    let mut active_set = Vec::with_capacity(proj.active.len());
    for (&k, &lam) in proj.active.iter().zip(proj.lambda.iter()) {
        let row = &rows[k];
        multipliers[row.index] = lam / row.scale;
        active_set.push(row.index);
    }
    Ok(QpSolution {
        u: proj.point,
        status: QpStatus::Optimal,
        active_set,
        multipliers,
        slack_norm: 0.0,
        pivots: proj.pivots,
    })
}

/// Solves the always-feasible relaxation
///
/// ```text
///     minimize   |u - u_t|^2 + weight |s|^2
///     subject to A u <= b + s,  s >= 0
/// ```
///
/// and reports the result with status [`QpStatus::Relaxed`]. The returned
/// multipliers and active set refer to the rows of `A`.
pub fn solve_relaxed(p: &QpProblem, tol: f64, weight: f64) -> Result<QpSolution, QpError> {
    p.check()?;
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(QpError::InvalidProblem("slack weight must be positive"));
    }
    let (n, m) = (p.num_vars(), p.num_constraints());
    // Scaled slack y = sqrt(weight) s turns the objective into a plain distance.
    let root_w = sqrt(weight);
    let mut target = DVector::zeros(n + m);
    target.rows_mut(0, n).copy_from(&p.target);
    let mut a = DMatrix::zeros(2 * m, n + m);
    let mut b = DVector::zeros(2 * m);
    for i in 0..m {
        a.view_mut((i, 0), (1, n)).copy_from(&p.a.row(i));
        a[(i, n + i)] = -1.0 / root_w;
        b[i] = p.b[i];
        a[(m + i, n + i)] = -1.0;
    }
    let lifted = QpProblem { target, a, b };
    let sol = solve(&lifted, tol)?;
    let u = sol.u.rows(0, n).into_owned();
    let slack = sol.u.rows(n, m) / root_w;
    Ok(QpSolution {
        u,
        status: QpStatus::Relaxed,
        active_set: sol.active_set.into_iter().filter(|&i| i < m).collect(),
        multipliers: sol.multipliers.rows(0, m).into_owned(),
        slack_norm: slack.norm(),
        pivots: sol.pivots,
    })
}

struct Row {
    index: usize,
    normal: DVector<f64>,
    bound: f64,
    scale: f64,
}

struct Projection {
    point: DVector<f64>,
    /// Positions into the row list.
    active: Vec<usize>,
    lambda: Vec<f64>,
    pivots: usize,
}

const STEP_EPS: f64 = 1e-14;
const DUAL_EPS: f64 = 1e-12;

/// Euclidean projection of `c` onto `{y : n_i . y <= b_i}` for unit normals.
fn project(c: &DVector<f64>, rows: &[Row], tol: f64) -> Result<Projection, QpError> {
    let mut y = c.clone();
    let mut active: Vec<usize> = Vec::new();
    let mut lambda: Vec<f64> = Vec::new();
    let mut pivots = 0;

    loop {
        // Most violated inactive constraint; ties go to the lowest index.
        let mut entering: Option<(usize, f64)> = None;
        for (k, row) in rows.iter().enumerate() {
            if active.contains(&k) {
                continue;
            }
            let v = row.normal.dot(&y) - row.bound;
            if v > tol && entering.is_none_or(|(_, best)| v > best) {
                entering = Some((k, v));
            }
        }
        let Some((p, _)) = entering else { break };
        let np = &rows[p].normal;
        let mut lam_p = 0.0;

        loop {
            pivots += 1;
            if pivots > MAX_PIVOTS {
                return Err(QpError::MaxIterations);
            }
            let (r, z) = split_direction(np, rows, &active);
            let zz = z.norm_squared();

            // Largest dual step keeping active multipliers non-negative.
            let mut t_dual = f64::INFINITY;
            let mut blocking: Option<usize> = None;
            for (j, &rj) in r.iter().enumerate() {
                if rj > DUAL_EPS {
                    let ratio = lambda[j] / rj;
                    let better = ratio < t_dual
                        || (ratio == t_dual && blocking.is_some_and(|b| active[j] < active[b]));
                    if better {
                        t_dual = ratio;
                        blocking = Some(j);
                    }
                }
            }
            let violation = np.dot(&y) - rows[p].bound;
            let t_full = if zz > STEP_EPS { violation / zz } else { f64::INFINITY };
            if t_full.is_infinite() && t_dual.is_infinite() {
                return Err(QpError::Infeasible);
            }

            let t = t_full.min(t_dual);
            if t_full.is_finite() {
                y.axpy(-t, &z, 1.0);
            }
            for (l, rj) in lambda.iter_mut().zip(r.iter()) {
                *l = (*l - t * rj).max(0.0);
            }
            lam_p += t;

            if t_full <= t_dual {
                active.push(p);
                lambda.push(lam_p);
                break;
            }
            let j = blocking.expect("finite dual step has a blocking constraint");
            active.remove(j);
            lambda.remove(j);
        }
    }
    Ok(Projection { point: y, active, lambda, pivots })
}

/// Splits `np` into its component in the span of the active normals (coefficients
/// `r`) and the orthogonal remainder `z`.
fn split_direction(np: &DVector<f64>, rows: &[Row], active: &[usize]) -> (Vec<f64>, DVector<f64>) {
    if active.is_empty() {
        return (Vec::new(), np.clone());
    }
    let n = np.len();
    let mut basis = DMatrix::zeros(n, active.len());
    for (col, &k) in active.iter().enumerate() {
        basis.set_column(col, &rows[k].normal);
    }
    let gram = basis.transpose() * &basis;
    let rhs = basis.transpose() * np;
    let r = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(active.len())),
    };
    let z = np - &basis * &r;
    (r.iter().copied().collect(), z)
}
