//! Dense convex QP solver: primal active-set on the null space of the
//! equality constraints, with a phase-1 feasibility problem.
//!
//! Solves `min ½xᵀPx + qᵀx  s.t.  A_ineq x ≤ b_ineq,  A_eq x = b_eq`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{NavError, Result};

/// Diagonal regularization added to `P` before any factorization.
pub const HESSIAN_REGULARIZATION: f64 = 1e-9;
const PHASE1_REGULARIZATION: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a_ineq: DMatrix<f64>,
    pub b_ineq: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
}

impl QpProblem {
    pub fn new(
        p: DMatrix<f64>,
        q: DVector<f64>,
        a_ineq: DMatrix<f64>,
        b_ineq: DVector<f64>,
        a_eq: DMatrix<f64>,
        b_eq: DVector<f64>,
    ) -> Result<Self> {
        let n = q.len();
        let bad = |m: &str| Err(NavError::Config(format!("qp dimension mismatch: {m}")));
        if p.nrows() != n || p.ncols() != n {
            return bad("P must be n x n");
        }
        if a_ineq.ncols() != n || a_ineq.nrows() != b_ineq.len() {
            return bad("A_ineq / b_ineq");
        }
        if a_eq.ncols() != n || a_eq.nrows() != b_eq.len() {
            return bad("A_eq / b_eq");
        }
        let asym = (&p - p.transpose()).amax();
        if asym > 1e-9 * (1.0 + p.amax()) {
            return Err(NavError::Config(format!("P is not symmetric (max asymmetry {asym:e})")));
        }
        Ok(Self { p, q, a_ineq, b_ineq, a_eq, b_eq })
    }

    /// Problem with only inequality constraints.
    pub fn inequality_only(p: DMatrix<f64>, q: DVector<f64>, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let n = q.len();
        Self::new(p, q, a, b, DMatrix::zeros(0, n), DVector::zeros(0))
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

/// Lagrange multipliers: `ineq ≥ 0` for `A_ineq`, free `eq` for `A_eq`.
#[derive(Debug, Clone)]
pub struct Multipliers {
    pub ineq: DVector<f64>,
    pub eq: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub status: QpStatus,
    pub objective: f64,
    pub multipliers: Multipliers,
    pub iterations: usize,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

/// Max of stationarity norm, primal violation, dual negativity and
/// complementarity gap (all infinity norms).
pub fn kkt_residual(p: &QpProblem, x: &DVector<f64>, m: &Multipliers) -> f64 {
    let mut grad = &p.p * x + &p.q;
    if p.a_ineq.nrows() > 0 {
        grad += p.a_ineq.transpose() * &m.ineq;
    }
    if p.a_eq.nrows() > 0 {
        grad += p.a_eq.transpose() * &m.eq;
    }
    let stationarity = grad.amax();
    let mut primal: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    let mut dual: f64 = 0.0;
    if p.a_ineq.nrows() > 0 {
        let slack = &p.b_ineq - &p.a_ineq * x;
        for i in 0..slack.len() {
            primal = primal.max(-slack[i]);
            dual = dual.max(-m.ineq[i]);
            complementarity = complementarity.max((m.ineq[i] * slack[i]).abs());
        }
    }
    if p.a_eq.nrows() > 0 {
        primal = primal.max((&p.a_eq * x - &p.b_eq).amax());
    }
    stationarity.max(primal).max(dual).max(complementarity)
}

/// Orthonormal null-space basis and minimum-norm particular solution of `A x = b`.
struct EqualityElimination {
    x0: DVector<f64>,
    z: DMatrix<f64>,
}

fn eliminate_equalities(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Option<EqualityElimination> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return Some(EqualityElimination { x0: DVector::zeros(n), z: DMatrix::identity(n, n) });
    }
    let ata = a.transpose() * a;
    let eig = SymmetricEigen::new(ata);
    let lmax = eig.eigenvalues.amax().max(1e-300);
    let mut range = Vec::new();
    let mut null = Vec::new();
    for i in 0..n {
        if eig.eigenvalues[i] > 1e-12 * lmax {
            range.push(i);
        } else {
            null.push(i);
        }
    }
    let atb = a.transpose() * b;
    let mut x0 = DVector::zeros(n);
    for &i in &range {
        let v = eig.eigenvectors.column(i);
        x0 += v * (v.dot(&atb) / eig.eigenvalues[i]);
    }
    if (a * &x0 - b).amax() > tol * (1.0 + b.amax()) {
        return None;
    }
    let mut z = DMatrix::zeros(n, null.len());
    for (c, &i) in null.iter().enumerate() {
        z.set_column(c, &eig.eigenvectors.column(i));
    }
    Some(EqualityElimination { x0, z })
}

struct ActiveSetResult {
    y: DVector<f64>,
    lambda: DVector<f64>,
    status: QpStatus,
    iterations: usize,
}

/// Primal active-set for `min ½yᵀHy + gᵀy s.t. C y ≤ d`, started from `y0`
/// (feasible to within `tol`). Entering ties go to the lowest index; among
/// equally negative multipliers the lowest index leaves.
fn active_set(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    c: &DMatrix<f64>,
    d: &DVector<f64>,
    y0: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> ActiveSetResult {
    let n = g.len();
    let m = d.len();
    let mut y = y0;
    let mut working: Vec<usize> = Vec::new();
    let mut lambda = DVector::zeros(m);
    let row_norms: Vec<f64> = (0..m).map(|i| c.row(i).norm().max(1e-300)).collect();

    for iter in 0..max_iter {
        let w = working.len();
        let dim = n + w;
        let mut kkt = DMatrix::zeros(dim, dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(h);
        for (k, &i) in working.iter().enumerate() {
            for j in 0..n {
                kkt[(n + k, j)] = c[(i, j)];
                kkt[(j, n + k)] = c[(i, j)];
            }
        }
        let grad = h * &y + g;
        let mut rhs = DVector::zeros(dim);
        rhs.rows_mut(0, n).copy_from(&(-&grad));
        let Some(sol) = kkt.lu().solve(&rhs) else {
            return ActiveSetResult { y, lambda, status: QpStatus::MaxIterations, iterations: iter };
        };
        let step = sol.rows(0, n).into_owned();
        let step_norm = step.amax();

        if step_norm <= 1e-12 * (1.0 + y.amax()) {
            // Stationary on the working set; check multiplier signs.
            lambda.fill(0.0);
            let mut leave: Option<(usize, f64)> = None;
            for (k, &i) in working.iter().enumerate() {
                let l = sol[n + k];
                lambda[i] = l;
                if l < -tol && leave.is_none_or(|(li, lv)| l < lv || (l == lv && i < li)) {
                    leave = Some((i, l));
                }
            }
            match leave {
                None => {
                    for v in lambda.iter_mut() {
                        *v = v.max(0.0);
                    }
                    return ActiveSetResult { y, lambda, status: QpStatus::Optimal, iterations: iter };
                }
                Some((i, _)) => working.retain(|&j| j != i),
            }
            continue;
        }

        let mut alpha = 1.0;
        let mut blocking: Option<usize> = None;
        for i in 0..m {
            if working.contains(&i) {
                continue;
            }
            let cp = c.row(i).dot(&step.transpose());
            if cp <= 1e-14 * row_norms[i] * step_norm {
                continue;
            }
            let slack = d[i] - c.row(i).dot(&y.transpose());
            let a_i = (slack / cp).max(0.0);
            if a_i < alpha {
                alpha = a_i;
                blocking = Some(i);
            }
        }
        y += &step * alpha;
        if let Some(i) = blocking {
            working.push(i);
        }
    }
    ActiveSetResult { y, lambda, status: QpStatus::MaxIterations, iterations: max_iter }
}

fn infeasible(n: usize, m: usize, k: usize, iterations: usize) -> QpSolution {
    QpSolution {
        x: DVector::zeros(n),
        status: QpStatus::Infeasible,
        objective: f64::NAN,
        multipliers: Multipliers { ineq: DVector::zeros(m), eq: DVector::zeros(k) },
        iterations,
    }
}

/// Phase one shifted to start from `y_start`.
fn phase_one_from(
    c: &DMatrix<f64>,
    d: &DVector<f64>,
    y_start: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> (Option<DVector<f64>>, usize) {
    let shifted = d - c * y_start;
    let (delta, iters) = phase_one(c, &shifted, tol, max_iter);
    (delta.map(|dy| y_start + dy), iters)
}

/// Finds `y` with `C y ≤ d + tol` by minimizing the max violation `s`.
fn phase_one(c: &DMatrix<f64>, d: &DVector<f64>, tol: f64, max_iter: usize) -> (Option<DVector<f64>>, usize) {
    let ny = c.ncols();
    let m = d.len();
    let start_violation = (-d).max().max(0.0);
    if start_violation <= tol {
        return (Some(DVector::zeros(ny)), 0);
    }
    // Variables (y, s): min s + ½ε‖(y, s)‖²  s.t.  C y - s ≤ d,  -s ≤ 0.
    let h = DMatrix::identity(ny + 1, ny + 1) * PHASE1_REGULARIZATION;
    let mut g = DVector::zeros(ny + 1);
    g[ny] = 1.0;
    let mut cc = DMatrix::zeros(m + 1, ny + 1);
    cc.view_mut((0, 0), (m, ny)).copy_from(c);
    for i in 0..m {
        cc[(i, ny)] = -1.0;
    }
    cc[(m, ny)] = -1.0;
    let mut dd = DVector::zeros(m + 1);
    dd.rows_mut(0, m).copy_from(d);
    let mut start = DVector::zeros(ny + 1);
    start[ny] = start_violation;
    let r = active_set(&h, &g, &cc, &dd, start, tol * 1e-3, max_iter);
    let y = r.y.rows(0, ny).into_owned();
    let violation = (c * &y - d).max().max(0.0);
    if violation <= tol {
        (Some(y), r.iterations)
    } else {
        (None, r.iterations)
    }
}

/// Solves the QP. `tolerance` governs feasibility and multiplier signs.
pub fn solve_qp(p: &QpProblem, tolerance: f64, max_iter: usize) -> QpSolution {
    solve_qp_from(p, None, tolerance, max_iter)
}

/// [`solve_qp`] with the feasibility search started at `x_start`
/// (projected onto the equality constraints). A good guess saves most of
/// the phase-one work; the optimum does not depend on it.
pub fn solve_qp_warm(p: &QpProblem, x_start: &DVector<f64>, tolerance: f64, max_iter: usize) -> QpSolution {
    assert_eq!(x_start.len(), p.dim(), "warm start dimension");
    solve_qp_from(p, Some(x_start), tolerance, max_iter)
}

fn solve_qp_from(p: &QpProblem, x_start: Option<&DVector<f64>>, tolerance: f64, max_iter: usize) -> QpSolution {
    let n = p.dim();
    let m = p.b_ineq.len();
    let k = p.b_eq.len();

    let Some(elim) = eliminate_equalities(&p.a_eq, &p.b_eq, tolerance) else {
        return infeasible(n, m, k, 0);
    };
    let p_reg = &p.p + DMatrix::identity(n, n) * HESSIAN_REGULARIZATION;
    let h = elim.z.transpose() * &p_reg * &elim.z;
    let h = (&h + h.transpose()) * 0.5;
    let g = elim.z.transpose() * (&p_reg * &elim.x0 + &p.q);
    let c = &p.a_ineq * &elim.z;
    let d = &p.b_ineq - &p.a_ineq * &elim.x0;

    let (y0, phase1_iters) = match x_start {
        Some(xs) => phase_one_from(&c, &d, &(elim.z.transpose() * (xs - &elim.x0)), tolerance, max_iter),
        None => phase_one(&c, &d, tolerance, max_iter),
    };
    let Some(y0) = y0 else {
        return infeasible(n, m, k, phase1_iters);
    };
    let r = active_set(&h, &g, &c, &d, y0, tolerance, max_iter);
    let x = &elim.x0 + &elim.z * &r.y;

    let eq = if k > 0 {
        let mut resid = -(&p.p * &x + &p.q);
        if m > 0 {
            resid -= p.a_ineq.transpose() * &r.lambda;
        }
        p.a_eq
            .transpose()
            .svd(true, true)
            .solve(&resid, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(k))
    } else {
        DVector::zeros(0)
    };
    QpSolution {
        objective: p.objective(&x),
        x,
        status: r.status,
        multipliers: Multipliers { ineq: r.lambda, eq },
        iterations: phase1_iters + r.iterations,
    }
}
