//! Dense convex QP solver for small problems.
//!
//! ```text
//!     minimize     ½ xᵀ H x + gᵀ x
//!     subject to   A x  = b
//!                  C x <= d
//! ```
//!
//! Primal active-set method. A phase-1 LP (same active-set engine, zero
//! Hessian, one elastic variable) finds a feasible start or proves
//! infeasibility. Positive semidefinite `H` is handled directly: on the null
//! space of the working set, directions of zero curvature are followed as
//! descent rays until a constraint blocks them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, norm_inf, Mat, Qr, SymEigen};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite problem data")]
    NonFinite,
    #[error("hessian is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("hessian is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotConvex(f64),
    #[error("hessian is ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),
    #[error("objective is unbounded below on the feasible set")]
    Unbounded,
    #[error("solution carries no multipliers")]
    MissingMultipliers,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct QpSettings<T> {
    pub max_iterations: usize,
    /// Allowed constraint violation, both for the phase-1 verdict and the result.
    pub feasibility_tol: T,
    /// Eigenvalues of `H` below `-psd_floor` reject the problem as non-convex.
    pub psd_floor: T,
    /// Eigenvalues at or below this are treated as exact zero curvature.
    pub curvature_floor: T,
    /// Largest accepted ratio between the extreme nonzero eigenvalues of `H`.
    pub max_condition: T,
}

impl<T: Scalar> Default for QpSettings<T> {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            feasibility_tol: T::feas_tol(),
            psd_floor: T::lit(1e-10),
            curvature_floor: T::lit(1e-12).max(T::epsilon() * T::lit(16.0)),
            max_condition: T::lit(1e12),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpProblem<T> {
    pub hessian: Mat<T>,
    pub linear: Vec<T>,
    pub eq_matrix: Mat<T>,
    pub eq_rhs: Vec<T>,
    pub ineq_matrix: Mat<T>,
    pub ineq_rhs: Vec<T>,
}

impl<T: Scalar> QpProblem<T> {
    /// Unconstrained problem; add constraints with the builder methods.
    pub fn new(hessian: Mat<T>, linear: Vec<T>) -> Self {
        let n = linear.len();
        Self {
            hessian,
            linear,
            eq_matrix: Mat::zeros(0, n),
            eq_rhs: Vec::new(),
            ineq_matrix: Mat::zeros(0, n),
            ineq_rhs: Vec::new(),
        }
    }

    pub fn with_equalities(mut self, a: Mat<T>, b: Vec<T>) -> Self {
        self.eq_matrix = a;
        self.eq_rhs = b;
        self
    }

    pub fn with_inequalities(mut self, c: Mat<T>, d: Vec<T>) -> Self {
        self.ineq_matrix = c;
        self.ineq_rhs = d;
        self
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn objective(&self, x: &[T]) -> T {
        let hx = self.hessian.mul_vec(x);
        T::lit(0.5) * dot(x, &hx) + dot(&self.linear, x)
    }

    /// Largest violation of any constraint at `x` (0 when feasible).
    pub fn violation(&self, x: &[T]) -> T {
        let eq = self
            .eq_matrix
            .mul_vec(x)
            .iter()
            .zip(&self.eq_rhs)
            .fold(T::zero(), |m, (&ax, &b)| m.max((ax - b).abs()));
        let ineq = self
            .ineq_matrix
            .mul_vec(x)
            .iter()
            .zip(&self.ineq_rhs)
            .fold(T::zero(), |m, (&cx, &d)| m.max(cx - d));
        eq.max(ineq)
    }

    fn validate(&self) -> Result<(), QpError> {
        let n = self.dim();
        let dims = |what: &str, got: (usize, usize), want: (usize, usize)| {
            if got == want {
                Ok(())
            } else {
                Err(QpError::DimensionMismatch(format!(
                    "{what} is {}x{}, expected {}x{}",
                    got.0, got.1, want.0, want.1
                )))
            }
        };
        dims("H", (self.hessian.rows(), self.hessian.cols()), (n, n))?;
        dims("A", (self.eq_matrix.rows(), self.eq_matrix.cols()), (self.eq_rhs.len(), n))?;
        dims("C", (self.ineq_matrix.rows(), self.ineq_matrix.cols()), (self.ineq_rhs.len(), n))?;
        let finite = |v: &[T]| v.iter().all(|x| x.is_finite());
        if !(self.hessian.is_finite()
            && self.eq_matrix.is_finite()
            && self.ineq_matrix.is_finite()
            && finite(&self.linear)
            && finite(&self.eq_rhs)
            && finite(&self.ineq_rhs))
        {
            return Err(QpError::NonFinite);
        }
        Ok(())
    }
}

/// Lagrange multipliers with the sign convention `Hx + g + Aᵀν + Cᵀλ = 0`, `λ ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Multipliers<T> {
    pub equality: Vec<T>,
    pub inequality: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
    pub status: QpStatus,
    /// Inequalities tight at `x` (within the feasibility tolerance), ascending.
    pub active_set: Vec<usize>,
    pub multipliers: Option<Multipliers<T>>,
    pub iterations: usize,
}

impl<T> QpSolution<T> {
    #[inline]
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KktResiduals<T> {
    pub stationarity: T,
    pub primal: T,
    pub complementarity: T,
}

impl<T: Scalar> KktResiduals<T> {
    pub fn max(&self) -> T {
        self.stationarity.max(self.primal).max(self.complementarity)
    }
}

pub fn solve_qp<T: Scalar>(problem: &QpProblem<T>) -> Result<QpSolution<T>, QpError> {
    solve_qp_with(problem, &QpSettings::default())
}

pub fn solve_qp_with<T: Scalar>(
    problem: &QpProblem<T>,
    settings: &QpSettings<T>,
) -> Result<QpSolution<T>, QpError> {
    problem.validate()?;
    let n = problem.dim();

    let asym = problem.hessian.asymmetry().unwrap_or_else(T::zero);
    if asym > T::lit(1e-10) * problem.hessian.max_abs().max(T::one()) {
        return Err(QpError::NotSymmetric(asym.to_f64_lossy()));
    }
    let eig = SymEigen::new(&problem.hessian);
    if eig.min() < -settings.psd_floor {
        return Err(QpError::NotConvex(eig.min().to_f64_lossy()));
    }
    let smallest_curved = eig
        .values
        .iter()
        .copied()
        .find(|&v| v > settings.curvature_floor);
    if let Some(lo) = smallest_curved {
        let cond = eig.max() / lo;
        if cond > settings.max_condition {
            return Err(QpError::IllConditioned(cond.to_f64_lossy()));
        }
    }

    let infeasible = |x: Vec<T>, iterations| QpSolution {
        objective: problem.objective(&x),
        x,
        status: QpStatus::Infeasible,
        active_set: Vec::new(),
        multipliers: None,
        iterations,
    };

    // Reduce equalities to an independent subset and check their consistency.
    let (eq_rows, _, eq_keep) = independent_equalities(problem);
    let eq_mat = Mat::from_rows(n, &eq_rows);
    let x0 = if eq_rows.is_empty() {
        vec![T::zero(); n]
    } else {
        let qr = Qr::new(&problem.eq_matrix.transpose());
        let (x0, resid) = qr.solve_min_norm_transposed(&problem.eq_rhs);
        if resid > settings.feasibility_tol {
            return Ok(infeasible(x0, 0));
        }
        x0
    };

    let c = &problem.ineq_matrix;
    let d = &problem.ineq_rhs;
    let m = d.len();
    let start_violation = c
        .mul_vec(&x0)
        .iter()
        .zip(d)
        .fold(T::zero(), |s, (&cx, &di)| s.max(cx - di));

    let mut iterations = 0;
    let x_feasible = if start_violation <= T::zero() {
        x0
    } else {
        // Phase 1: minimize s over (x, s) with Cx - s <= d, s >= 0.
        let n1 = n + 1;
        let h1 = Mat::zeros(n1, n1);
        let mut g1 = vec![T::zero(); n1];
        g1[n] = T::one();
        let a1 = Mat::from_fn(eq_mat.rows(), n1, |r, col| if col < n { eq_mat[(r, col)] } else { T::zero() });
        let c1 = Mat::from_fn(m + 1, n1, |r, col| match (r < m, col < n) {
            (true, true) => c[(r, col)],
            (true, false) => -T::one(),
            (false, true) => T::zero(),
            (false, false) => -T::one(),
        });
        let mut d1 = d.clone();
        d1.push(T::zero());
        let mut start = x0;
        start.push(start_violation);
        let engine = Engine {
            h: &h1,
            g: &g1,
            eq: &a1,
            c: &c1,
            d: &d1,
            settings,
        };
        let phase1 = engine.run(start)?;
        iterations += phase1.iterations;
        let s = phase1.x[n];
        let mut x = phase1.x;
        x.truncate(n);
        if phase1.status == QpStatus::MaxIterations {
            return Ok(QpSolution {
                objective: problem.objective(&x),
                x,
                status: QpStatus::MaxIterations,
                active_set: Vec::new(),
                multipliers: None,
                iterations,
            });
        }
        if s > settings.feasibility_tol {
            return Ok(infeasible(x, iterations));
        }
        x
    };

    let engine = Engine {
        h: &problem.hessian,
        g: &problem.linear,
        eq: &eq_mat,
        c,
        d,
        settings,
    };
    let phase2 = engine.run(x_feasible)?;
    iterations += phase2.iterations;

    let x = phase2.x;
    let multipliers = (phase2.status == QpStatus::Optimal).then(|| {
        let mut equality = vec![T::zero(); problem.eq_rhs.len()];
        for (k, &row) in eq_keep.iter().enumerate() {
            equality[row] = phase2.eq_multipliers[k];
        }
        Multipliers {
            equality,
            inequality: phase2.ineq_multipliers,
        }
    });
    let cx = c.mul_vec(&x);
    let active_set = (0..m)
        .filter(|&i| (d[i] - cx[i]).abs() <= settings.feasibility_tol * T::lit(10.0))
        .collect();
    Ok(QpSolution {
        objective: problem.objective(&x),
        x,
        status: phase2.status,
        active_set,
        multipliers,
        iterations,
    })
}

/// KKT residuals of `solution.x` under the multipliers the solver recorded.
pub fn kkt_residuals<T: Scalar>(
    problem: &QpProblem<T>,
    solution: &QpSolution<T>,
) -> Result<KktResiduals<T>, QpError> {
    let mult = solution.multipliers.as_ref().ok_or(QpError::MissingMultipliers)?;
    let x = &solution.x;
    let mut grad = problem.hessian.mul_vec(x);
    for (gi, &li) in grad.iter_mut().zip(&problem.linear) {
        *gi = *gi + li;
    }
    let at_nu = problem.eq_matrix.tr_mul_vec(&mult.equality);
    let ct_lambda = problem.ineq_matrix.tr_mul_vec(&mult.inequality);
    let stationarity = grad
        .iter()
        .zip(at_nu.iter().zip(&ct_lambda))
        .fold(T::zero(), |m, (&g, (&a, &c))| m.max((g + a + c).abs()));

    let cx = problem.ineq_matrix.mul_vec(x);
    let complementarity = cx
        .iter()
        .zip(&problem.ineq_rhs)
        .zip(&mult.inequality)
        .fold(T::zero(), |m, ((&cxi, &di), &li)| {
            m.max((li * (di - cxi)).abs()).max(-li)
        });
    Ok(KktResiduals {
        stationarity,
        primal: problem.violation(x),
        complementarity,
    })
}

fn independent_equalities<T: Scalar>(problem: &QpProblem<T>) -> (Vec<Vec<T>>, Vec<T>, Vec<usize>) {
    let a = &problem.eq_matrix;
    if a.rows() == 0 {
        return (Vec::new(), Vec::new(), Vec::new());
    }
    let qr = Qr::new(&a.transpose());
    let mut keep: Vec<usize> = qr.perm()[..qr.rank()].to_vec();
    keep.sort_unstable();
    let rows = keep.iter().map(|&r| a.row(r).to_vec()).collect();
    let rhs = keep.iter().map(|&r| problem.eq_rhs[r]).collect();
    (rows, rhs, keep)
}

struct EngineResult<T> {
    x: Vec<T>,
    status: QpStatus,
    eq_multipliers: Vec<T>,
    ineq_multipliers: Vec<T>,
    iterations: usize,
}

/// Primal active-set iterations from a feasible start. Equality rows must be
/// linearly independent; inequalities are only added to the working set when
/// they block a step, which keeps the working set independent as well.
struct Engine<'a, T> {
    h: &'a Mat<T>,
    g: &'a [T],
    eq: &'a Mat<T>,
    c: &'a Mat<T>,
    d: &'a [T],
    settings: &'a QpSettings<T>,
}

enum Step<T> {
    /// Minimizer of the objective on the working-set subspace.
    Newton(Vec<T>),
    /// Descent along zero curvature: objective is linear and decreasing.
    Ray(Vec<T>),
    Stationary,
}

impl<T: Scalar> Engine<'_, T> {
    fn run(&self, mut x: Vec<T>) -> Result<EngineResult<T>, QpError> {
        let n = x.len();
        let m = self.d.len();
        let m_eq = self.eq.rows();
        let mut working: Vec<usize> = Vec::new();
        let mut at_subspace_min = false;
        let mut degenerate = false;

        for iter in 0..self.settings.max_iterations {
            let mut grad = self.h.mul_vec(&x);
            for (gi, &li) in grad.iter_mut().zip(self.g) {
                *gi = *gi + li;
            }
            let k = m_eq + working.len();
            let basis = Mat::from_fn(n, k, |r, col| {
                if col < m_eq {
                    self.eq[(col, r)]
                } else {
                    self.c[(working[col - m_eq], r)]
                }
            });
            let qr = Qr::new(&basis);

            let step = if at_subspace_min {
                Step::Stationary
            } else {
                self.subspace_step(&qr, &grad, &x)
            };

            match step {
                Step::Stationary => {
                    let neg_grad: Vec<T> = grad.iter().map(|&v| -v).collect();
                    let (mu, _) = qr.solve_ls(&neg_grad);
                    let dual_tol = T::lit(1e-11) * (T::one() + norm_inf(&grad));
                    let mut drop: Option<(usize, T)> = None;
                    for (j, &lam) in mu[m_eq..].iter().enumerate() {
                        if lam < -dual_tol {
                            let better = match drop {
                                None => true,
                                // Bland's rule after a degenerate step, steepest otherwise.
                                Some((bj, bl)) => {
                                    if degenerate {
                                        working[j] < working[bj]
                                    } else {
                                        lam < bl
                                    }
                                }
                            };
                            if better {
                                drop = Some((j, lam));
                            }
                        }
                    }
                    match drop {
                        None => {
                            let mut ineq = vec![T::zero(); m];
                            for (j, &row) in working.iter().enumerate() {
                                ineq[row] = mu[m_eq + j].max(T::zero());
                            }
                            return Ok(EngineResult {
                                x,
                                status: QpStatus::Optimal,
                                eq_multipliers: mu[..m_eq].to_vec(),
                                ineq_multipliers: ineq,
                                iterations: iter + 1,
                            });
                        }
                        Some((j, _)) => {
                            working.remove(j);
                            at_subspace_min = false;
                        }
                    }
                }
                Step::Newton(p) | Step::Ray(p) if norm_inf(&p) == T::zero() => {
                    at_subspace_min = true;
                }
                step => {
                    let (p, ray) = match step {
                        Step::Newton(p) => (p, false),
                        Step::Ray(p) => (p, true),
                        Step::Stationary => unreachable!(),
                    };
                    let p_norm = norm_inf(&p);
                    let mut alpha = if ray { T::infinity() } else { T::one() };
                    let mut blocking = None;
                    for i in 0..m {
                        if working.contains(&i) {
                            continue;
                        }
                        let row = self.c.row(i);
                        let cp = dot(row, &p);
                        if cp <= T::lit(1e-12) * norm_inf(row) * p_norm {
                            continue;
                        }
                        let slack = (self.d[i] - dot(row, &x)).max(T::zero());
                        let a = slack / cp;
                        if a < alpha {
                            alpha = a;
                            blocking = Some(i);
                        }
                    }
                    if alpha.is_infinite() {
                        return Err(QpError::Unbounded);
                    }
                    for (xi, &pi) in x.iter_mut().zip(&p) {
                        *xi = *xi + alpha * pi;
                    }
                    degenerate = alpha == T::zero();
                    match blocking {
                        Some(i) => {
                            working.push(i);
                            at_subspace_min = false;
                        }
                        None => at_subspace_min = !ray,
                    }
                }
            }
        }
        Ok(EngineResult {
            x,
            status: QpStatus::MaxIterations,
            eq_multipliers: Vec::new(),
            ineq_multipliers: Vec::new(),
            iterations: self.settings.max_iterations,
        })
    }

    fn subspace_step(&self, qr: &Qr<T>, grad: &[T], x: &[T]) -> Step<T> {
        let z = qr.null_basis();
        let nz = z.cols();
        if nz == 0 {
            return Step::Stationary;
        }
        let n = x.len();
        let rg = z.tr_mul_vec(grad);
        let grad_scale = T::one() + norm_inf(grad);
        if norm_inf(&rg) <= T::lit(1e-14) * grad_scale {
            return Step::Stationary;
        }
        let hz = self.h.mul(&z);
        let reduced = Mat::from_fn(nz, nz, |r, c| (0..n).fold(T::zero(), |s, i| s + z[(i, r)] * hz[(i, c)]));
        // Symmetrize against roundoff before the eigen solve.
        let reduced = Mat::from_fn(nz, nz, |r, c| T::lit(0.5) * (reduced[(r, c)] + reduced[(c, r)]));
        let eig = SymEigen::new(&reduced);
        let rho = eig.vectors.tr_mul_vec(&rg);
        let curv_floor = self.settings.curvature_floor * eig.max().abs().max(T::one());

        let mut ray = vec![T::zero(); nz];
        let mut newton = vec![T::zero(); nz];
        let mut has_ray = false;
        for (i, (&lam, &r)) in eig.values.iter().zip(&rho).enumerate() {
            if lam <= curv_floor {
                if r.abs() > T::lit(1e-13) * grad_scale {
                    has_ray = true;
                    for row in 0..nz {
                        ray[row] = ray[row] - r * eig.vectors[(row, i)];
                    }
                }
            } else {
                for row in 0..nz {
                    newton[row] = newton[row] - (r / lam) * eig.vectors[(row, i)];
                }
            }
        }
        if has_ray {
            Step::Ray(z.mul_vec(&ray))
        } else {
            let p = z.mul_vec(&newton);
            let x_scale = T::one() + norm_inf(x);
            if norm_inf(&p) <= T::lit(1e-15) * x_scale {
                Step::Stationary
            } else {
                Step::Newton(p)
            }
        }
    }
}
