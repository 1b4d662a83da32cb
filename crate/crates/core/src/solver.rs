//! Sparse recovery by l1 minimization with a quadratic constraint, plus the
//! least-squares watermark estimator.
//!
//! `bpdn_solve` minimizes ||x||_1 subject to ||Hx - y||_2 <= epsilon using an
//! augmented-Lagrangian scheme with two splits, v1 = x and v2 = Hx. The x
//! update solves (I + H^T H) x = r through the matrix inversion lemma, so the
//! only factorization needed is a Cholesky of the m-by-m matrix I + H H^T,
//! computed once per operator. The v1 update is soft thresholding, the v2
//! update is a projection onto the epsilon ball around y.
//!
//! The solver is deterministic: it starts from the least-squares minimum-norm
//! point and never randomizes. Iterates are scored by an exact-penalty merit
//! (l1 norm plus weighted constraint violation); an iteration is accepted
//! when it improves the best merit seen so far, which makes the recorded
//! merit trace non-increasing. On convergence the current feasible iterate
//! is returned; when the budget runs out, the lowest-l1 feasible iterate
//! seen (or failing that, the least infeasible one) is returned and flagged
//! non-converged.

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// How the constraint radius epsilon is derived from the measurement vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonRule {
    /// Use this value directly.
    Absolute(f64),
    /// Use `fraction * ||y||_2`.
    RelativeToMeasurement(f64),
}

impl EpsilonRule {
    pub fn epsilon_for(&self, measurement_norm: f64) -> f64 {
        match self {
            EpsilonRule::Absolute(value) => *value,
            EpsilonRule::RelativeToMeasurement(fraction) => fraction * measurement_norm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EpsilonRule::Absolute(value) if *value >= 0.0 && value.is_finite() => Ok(()),
            EpsilonRule::RelativeToMeasurement(f) if *f > 0.0 && *f < 1.0 => Ok(()),
            _ => Err(Error::invalid(format!("invalid epsilon rule {self:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub epsilon_rule: EpsilonRule,
    pub max_iterations: usize,
    /// Relative change threshold on primal and dual residuals.
    pub convergence_tol: f64,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.epsilon_rule.validate()?;
        if self.max_iterations == 0 || !self.convergence_tol.is_finite() || self.convergence_tol <= 0.0 {
            return Err(Error::invalid(
                "solver config needs max_iterations >= 1 and convergence_tol > 0",
            ));
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon_rule: EpsilonRule::RelativeToMeasurement(0.05),
            max_iterations: 3000,
            convergence_tol: 1e-5,
        }
    }
}

/// Result of one BPDN solve.
#[derive(Debug, Clone)]
pub struct BpdnSolution {
    pub x: DVector<f64>,
    /// True when a feasible iterate was found and the residual criteria were
    /// met within the iteration budget.
    pub converged: bool,
    pub iterations: usize,
    /// ||H x - y||_2 of the returned iterate.
    pub residual_norm: f64,
    /// Merit values of accepted iterates, non-increasing by construction.
    pub merit_trace: Vec<f64>,
}

/// A measurement operator with its cached Gram factorization, reusable across
/// solves that share H H^T.
pub struct PreparedOperator {
    h: DMatrix<f64>,
    gram: DMatrix<f64>,
    chol_damped: Cholesky<f64, Dyn>,
    chol_gram: Option<Cholesky<f64, Dyn>>,
}

impl PreparedOperator {
    pub fn prepare(h: DMatrix<f64>) -> Result<Self> {
        if h.nrows() == 0 || h.ncols() == 0 || h.amax() == 0.0 {
            return Err(Error::invalid("bpdn operator must be nonzero"));
        }
        let gram = &h * h.transpose();
        Self::with_gram(h, gram)
    }

    /// Builds the operator with a caller-supplied Gram matrix G = H H^T.
    /// Useful when many operators share the same Gram, e.g. column sign
    /// flips of a common matrix.
    pub fn with_gram(h: DMatrix<f64>, gram: DMatrix<f64>) -> Result<Self> {
        let m = h.nrows();
        if h.ncols() == 0 || m == 0 || h.amax() == 0.0 {
            return Err(Error::invalid("bpdn operator must be nonzero"));
        }
        if gram.shape() != (m, m) {
            return Err(Error::invalid("gram matrix shape mismatch"));
        }
        let mut damped = gram.clone();
        for i in 0..m {
            damped[(i, i)] += 1.0;
        }
        let chol_damped = Cholesky::new(damped)
            .ok_or_else(|| Error::invalid("I + H H^T is not positive definite"))?;
        let chol_gram = Cholesky::new(gram.clone());
        Ok(PreparedOperator {
            h,
            gram,
            chol_damped,
            chol_gram,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Least-squares minimum-norm point H^T (H H^T)^-1 y, the deterministic
    /// solver start. Falls back to the damped inverse if the Gram matrix is
    /// numerically singular.
    fn least_squares_point(&self, y: &DVector<f64>) -> DVector<f64> {
        let z = match &self.chol_gram {
            Some(chol) => chol.solve(y),
            None => self.chol_damped.solve(y),
        };
        self.h.tr_mul(&z)
    }

    /// Minimizes ||x||_1 subject to ||H x - y||_2 <= epsilon.
    pub fn solve(
        &self,
        y: &DVector<f64>,
        epsilon: f64,
        cfg: &SolverConfig,
    ) -> Result<BpdnSolution> {
        if cfg.max_iterations == 0 || !cfg.convergence_tol.is_finite() || cfg.convergence_tol <= 0.0 {
            return Err(Error::invalid("invalid solver config"));
        }
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::invalid("epsilon must be finite and nonnegative"));
        }
        let (m, n) = self.h.shape();
        if y.len() != m {
            return Err(Error::invalid(format!(
                "measurement length {} does not match operator rows {m}",
                y.len()
            )));
        }

        let y_norm = y.norm();
        // Zero is feasible and has minimal norm.
        if y_norm <= epsilon {
            return Ok(BpdnSolution {
                x: DVector::zeros(n),
                converged: true,
                iterations: 0,
                residual_norm: y_norm,
                merit_trace: vec![0.0],
            });
        }

        let feas_tol = epsilon * 1.001 + 1e-10 * y_norm.max(1.0);

        let x_init = self.least_squares_point(y);
        // Exact-penalty weight for the merit trace: scale-free, large enough
        // that feasible iterates dominate clearly infeasible ones.
        let penalty = 2.0 * x_init.lp_norm(1).max(f64::MIN_POSITIVE) / feas_tol;

        let mut rho = 100.0 / y_norm;
        let mut x = x_init;
        let mut v1 = x.clone();
        let mut hx = &self.h * &x;
        let mut v2 = project_ball(&hx, y, epsilon);
        let mut d1 = DVector::zeros(n);
        let mut d2 = DVector::zeros(m);

        // Fallbacks in case the iteration budget runs out: the lowest-l1
        // feasible iterate seen, else the least infeasible one.
        let mut best_feasible: Option<(DVector<f64>, f64, f64)> = None;
        let mut best_infeasible: (DVector<f64>, f64) = (x.clone(), f64::INFINITY);
        let mut best_merit = f64::INFINITY;
        let mut merit_trace = Vec::new();
        let mut iterations = 0;

        // Over-relaxation factor; values in (1, 2) speed up the splitting.
        let alpha = 1.7;

        for iter in 1..=cfg.max_iterations {
            iterations = iter;
            let v1_old = v1.clone();
            let v2_old = v2.clone();

            // x update: (I + H^T H) x = (v1 - d1) + H^T (v2 - d2), solved via
            // x = rhs - H^T (I + G)^-1 H rhs.
            let rhs = {
                let mut r = &v1 - &d1;
                r += self.h.tr_mul(&(&v2 - &d2));
                r
            };
            let h_rhs = &self.h * &rhs;
            let q = self.chol_damped.solve(&h_rhs);
            x = &rhs - self.h.tr_mul(&q);
            hx = &h_rhs - &self.gram * &q;

            let x_relaxed = &x * alpha + &v1_old * (1.0 - alpha);
            let hx_relaxed = &hx * alpha + &v2_old * (1.0 - alpha);

            // v1 update: soft thresholding.
            let threshold = 1.0 / rho;
            v1 = DVector::from_fn(n, |i, _| soft(x_relaxed[i] + d1[i], threshold));

            // v2 update: projection onto the epsilon ball around y.
            let w = &hx_relaxed + &d2;
            v2 = project_ball(&w, y, epsilon);

            d1 += &x_relaxed - &v1;
            d2 += &hx_relaxed - &v2;

            // Bookkeeping on the current iterate.
            let residual = (&hx - y).norm();
            let violation = (residual - epsilon).max(0.0);
            let l1 = x.lp_norm(1);
            let merit = l1 + penalty * violation;
            if merit < best_merit {
                best_merit = merit;
                merit_trace.push(merit);
            }
            if residual <= feas_tol {
                if best_feasible.as_ref().is_none_or(|(_, best_l1, _)| l1 < *best_l1) {
                    best_feasible = Some((x.clone(), l1, residual));
                }
            } else if violation < best_infeasible.1 {
                best_infeasible = (x.clone(), violation);
            }

            // Stopping: relative primal and dual residuals, plus feasibility
            // of the current iterate.
            let primal = ((&x - &v1).norm_squared() + (&hx - &v2).norm_squared()).sqrt();
            let dual = ((&v1 - &v1_old).norm_squared() + (&v2 - &v2_old).norm_squared()).sqrt();
            let primal_scale = x.norm().max(v1.norm()).max(y_norm);
            let dual_scale = v1.norm().max(v2.norm()).max(y_norm);
            if primal <= cfg.convergence_tol * primal_scale.max(1e-300)
                && dual <= cfg.convergence_tol * dual_scale.max(1e-300)
                && residual <= feas_tol
            {
                return Ok(BpdnSolution {
                    x,
                    converged: true,
                    iterations,
                    residual_norm: residual,
                    merit_trace,
                });
            }

            // Residual balancing keeps the two update strengths comparable.
            if iter % 10 == 0 {
                let dual_scaled = rho * dual;
                if primal > 10.0 * dual_scaled {
                    rho *= 2.0;
                    d1 /= 2.0;
                    d2 /= 2.0;
                } else if dual_scaled > 10.0 * primal {
                    rho /= 2.0;
                    d1 *= 2.0;
                    d2 *= 2.0;
                }
            }
        }

        // Budget exhausted: best iterate seen, flagged non-converged.
        let (x, residual_norm) = match best_feasible {
            Some((x, _, residual)) => (x, residual),
            None => {
                let (x, _) = best_infeasible;
                let residual = (&self.h * &x - y).norm();
                (x, residual)
            }
        };
        Ok(BpdnSolution {
            x,
            converged: false,
            iterations,
            residual_norm,
            merit_trace,
        })
    }
}

fn soft(v: f64, threshold: f64) -> f64 {
    if v > threshold {
        v - threshold
    } else if v < -threshold {
        v + threshold
    } else {
        0.0
    }
}

/// Projection of `w` onto the ball of radius `epsilon` centered at `y`.
fn project_ball(w: &DVector<f64>, y: &DVector<f64>, epsilon: f64) -> DVector<f64> {
    let diff = w - y;
    let dist = diff.norm();
    if dist <= epsilon {
        w.clone()
    } else if epsilon == 0.0 {
        y.clone()
    } else {
        y + diff * (epsilon / dist)
    }
}

/// Convenience wrapper that prepares the operator and solves once.
pub fn bpdn_solve(
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    epsilon: f64,
    cfg: &SolverConfig,
) -> Result<BpdnSolution> {
    PreparedOperator::prepare(h.clone())?.solve(y, epsilon, cfg)
}

/// Unique least-squares solution of B w = r for full-column-rank B.
pub fn least_squares(b: &DMatrix<f64>, r: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, t) = b.shape();
    if t == 0 || m < t {
        return Err(Error::invalid(format!(
            "least squares needs a tall matrix, got {m}x{t}"
        )));
    }
    if r.len() != m {
        return Err(Error::invalid("right-hand side length mismatch"));
    }
    let qr = b.clone().qr();
    let rmat = qr.r();
    let lead = rmat[(0, 0)].abs();
    let tol = f64::EPSILON * m.max(t) as f64 * lead.max(1.0);
    for i in 0..t {
        if rmat[(i, i)].abs() <= tol {
            return Err(Error::RankDeficient(format!(
                "column {i} is linearly dependent in least-squares system"
            )));
        }
    }
    let qtr = qr.q().tr_mul(r);
    rmat.solve_upper_triangular(&qtr)
        .ok_or_else(|| Error::RankDeficient("triangular solve failed".into()))
}
