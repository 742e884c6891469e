//! Levenberg–Marquardt on a sum of squared residuals.
//!
//! Steps come from a thin SVD of the column-scaled Jacobian, so each trial
//! damping value costs O(n²) once the decomposition is in hand. Identifiability
//! is judged on the *unscaled* Jacobian: models are expected to use internal
//! coordinates of order one (logs, normalised offsets), so a tiny singular
//! value there really means the data do not constrain that direction.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// A residual vector r(p) to be driven towards zero in the least-squares sense.
pub trait Residuals {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    fn residuals(&self, p: &[f64], out: &mut [f64]);

    /// ∂r_i/∂p_j. Defaults to centered differences.
    fn jacobian(&self, p: &[f64], jac: &mut DMatrix<f64>) {
        finite_difference_jacobian(self, p, jac);
    }
}

pub fn finite_difference_jacobian<R: Residuals + ?Sized>(problem: &R, p: &[f64], jac: &mut DMatrix<f64>) {
    let m = problem.n_residuals();
    let mut plus = vec![0.0; m];
    let mut minus = vec![0.0; m];
    let mut q = p.to_vec();
    for j in 0..p.len() {
        let h = f64::EPSILON.cbrt() * p[j].abs().max(1.0);
        q[j] = p[j] + h;
        problem.residuals(&q, &mut plus);
        q[j] = p[j] - h;
        problem.residuals(&q, &mut minus);
        q[j] = p[j];
        for i in 0..m {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when ‖δp‖ ≤ tol·(‖p‖ + tol).
    pub step_tolerance: f64,
    /// Stop when an accepted step lowers the cost by less than tol·cost.
    pub cost_tolerance: f64,
    pub initial_damping: f64,
    /// Singular values below this fraction of the largest count as zero.
    pub rank_tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            step_tolerance: 1e-10,
            cost_tolerance: 1e-12,
            initial_damping: 1e-6,
            rank_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ZeroResidual,
    SmallStep,
    SmallCostChange,
    MaxIterations,
    /// Damping grew without bound and no step lowered the cost.
    DampingSaturated,
}

impl Termination {
    pub fn converged(self) -> bool {
        !matches!(self, Termination::MaxIterations | Termination::DampingSaturated)
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// ½ Σ r².
    pub cost: f64,
    /// Accepted steps.
    pub iterations: usize,
    pub termination: Termination,
    /// Cost after the start and after every accepted step.
    pub cost_history: Vec<f64>,
    pub jacobian: DMatrix<f64>,
    pub rank: usize,
    /// Parameters that load on a null direction of the Jacobian.
    pub unidentifiable: Vec<usize>,
    /// s²·(JᵀJ)⁺ with s² = Σr²/(m − n); pseudo-inverse over the identified subspace.
    pub covariance: DMatrix<f64>,
    pub n_residuals: usize,
}

impl LmReport {
    pub fn converged(&self) -> bool {
        self.termination.converged()
    }

    pub fn residual_norm(&self) -> f64 {
        (2.0 * self.cost).sqrt()
    }

    pub fn require_full_rank(&self) -> Result<()> {
        if self.rank < self.params.len() {
            return Err(Error::SingularJacobian {
                rank: self.rank,
                params: self.params.len(),
            });
        }
        Ok(())
    }
}

fn half_sum_sq(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|x| x * x).sum::<f64>()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Minimises ½‖r(p)‖² from `initial`.
///
/// Fails only if r is not finite at the starting point or the problem is
/// malformed; running out of iterations is reported through
/// [`LmReport::termination`].
pub fn minimize<R: Residuals + ?Sized>(problem: &R, initial: &[f64], opts: &LmOptions) -> Result<LmReport> {
    let n = problem.n_params();
    let m = problem.n_residuals();
    if initial.len() != n {
        return Err(Error::LengthMismatch(format!(
            "{} initial values for {} parameters",
            initial.len(),
            n
        )));
    }
    if m < n {
        return Err(Error::InsufficientPoints { needed: n, got: m });
    }

    let mut p = initial.to_vec();
    let mut r = vec![0.0; m];
    problem.residuals(&p, &mut r);
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain {
            value: f64::NAN,
            reason: "residuals are not finite at the initial point".into(),
        });
    }
    let mut cost = half_sum_sq(&r);
    let mut history = vec![cost];
    let mut jac = DMatrix::zeros(m, n);
    let mut lambda = opts.initial_damping;
    let mut trial = vec![0.0; m];
    let mut iterations = 0;

    let termination = 'outer: loop {
        if cost == 0.0 {
            break Termination::ZeroResidual;
        }
        if iterations >= opts.max_iterations {
            break Termination::MaxIterations;
        }
        iterations += 1;

        problem.jacobian(&p, &mut jac);
        let scale = column_scales(&jac);
        let mut js = jac.clone();
        for (j, s) in scale.iter().enumerate() {
            js.column_mut(j).scale_mut(1.0 / s);
        }
        let svd = js.svd(true, true);
        let u = svd.u.as_ref().expect("u requested");
        let v_t = svd.v_t.as_ref().expect("v_t requested");
        let utr = u.transpose() * DVector::from_column_slice(&r);
        let sigma = &svd.singular_values;

        loop {
            // y = −Σ σ_k/(σ_k² + λ) (u_kᵀ r) v_k,  δ = S⁻¹ y
            let mut y = DVector::zeros(n);
            for k in 0..sigma.len() {
                let s = sigma[k];
                let c = -s / (s * s + lambda) * utr[k];
                y += v_t.row(k).transpose() * c;
            }
            let step: Vec<f64> = (0..n).map(|j| y[j] / scale[j]).collect();
            if norm(&step) <= opts.step_tolerance * (norm(&p) + opts.step_tolerance) {
                break 'outer Termination::SmallStep;
            }
            let candidate: Vec<f64> = p.iter().zip(&step).map(|(a, b)| a + b).collect();
            problem.residuals(&candidate, &mut trial);
            let new_cost = if trial.iter().all(|x| x.is_finite()) {
                half_sum_sq(&trial)
            } else {
                f64::INFINITY
            };
            if new_cost <= cost {
                let drop = cost - new_cost;
                p = candidate;
                std::mem::swap(&mut r, &mut trial);
                let old = cost;
                cost = new_cost;
                history.push(cost);
                lambda = (lambda / 10.0).max(1e-15);
                if drop <= opts.cost_tolerance * old {
                    break 'outer Termination::SmallCostChange;
                }
                continue 'outer;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                break 'outer Termination::DampingSaturated;
            }
        }
    };

    problem.jacobian(&p, &mut jac);
    let (rank, unidentifiable, covariance) = analyse_jacobian(&jac, cost, m, opts.rank_tolerance);
    Ok(LmReport {
        params: p,
        cost,
        iterations: history.len() - 1,
        termination,
        cost_history: history,
        jacobian: jac,
        rank,
        unidentifiable,
        covariance,
        n_residuals: m,
    })
}

fn column_scales(jac: &DMatrix<f64>) -> Vec<f64> {
    let norms: Vec<f64> = jac.column_iter().map(|c| c.norm()).collect();
    let largest = norms.iter().cloned().fold(0.0, f64::max);
    let floor = if largest > 0.0 { largest * 1e-12 } else { 1.0 };
    norms.into_iter().map(|c| c.max(floor)).collect()
}

fn analyse_jacobian(jac: &DMatrix<f64>, cost: f64, m: usize, tol: f64) -> (usize, Vec<usize>, DMatrix<f64>) {
    let n = jac.ncols();
    let svd = jac.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma = &svd.singular_values;
    let largest = sigma.iter().cloned().fold(0.0, f64::max);
    let cut = largest * tol;
    let dof = m.saturating_sub(n).max(1) as f64;
    let s2 = 2.0 * cost / dof;

    let mut rank = 0;
    let mut flagged = vec![false; n];
    let mut cov = DMatrix::zeros(n, n);
    for k in 0..sigma.len() {
        let row = v_t.row(k);
        if sigma[k] > cut && largest > 0.0 {
            rank += 1;
            let w = s2 / (sigma[k] * sigma[k]);
            cov += row.transpose() * row * w;
        } else {
            for j in 0..n {
                if row[j].abs() > 0.3 {
                    flagged[j] = true;
                }
            }
        }
    }
    let cov = 0.5 * (&cov + cov.transpose());
    let unidentifiable = (0..n).filter(|&j| flagged[j]).collect();
    (rank, unidentifiable, cov)
}
