//! Continuous algebraic Riccati equation solver.
//!
//! Primary method: real Schur decomposition of the 2n×2n Hamiltonian
//! `[[A, −BR⁻¹Bᵀ], [−Q, −Aᵀ]]`, reordered so the stable invariant subspace
//! leads; the stabilizing solution is `P = U21·U11⁻¹` from the subspace
//! basis. A Kleinman–Newton pass (Lyapunov iterations on the closed loop)
//! then polishes P; the agreement of the two methods is the correctness
//! certificate reported through `residual`.

use super::schur::{quasi_triangular_eigenvalues, reorder_schur, schur_decompose};
use super::SynthesisError;
use nalgebra::{Cholesky, Complex, DMatrix, DVector};

/// Hamiltonian eigenvalues closer to the imaginary axis than this are
/// rejected: they signal a marginal or non-stabilizable problem where the
/// stable/unstable subspace split is not numerically meaningful.
const IMAGINARY_AXIS_TOL: f64 = 1e-10;
/// Limit on the condition number of the subspace basis block U11.
const SUBSPACE_COND_LIMIT: f64 = 1e12;
/// Newton polishing runs until the relative residual drops below this or
/// stops improving.
const NEWTON_TOL: f64 = 1e-14;
const NEWTON_MAX_ITERS: usize = 8;
const SCHUR_MAX_ITERS: usize = 200_000;

/// Stabilizing CARE solution with its certification data.
#[derive(Debug, Clone)]
pub struct CareSolution {
    /// Symmetric positive definite solution of AᵀP + PA − PBR⁻¹BᵀP + Q = 0.
    pub p: DMatrix<f64>,
    /// State-feedback gain K = R⁻¹BᵀP.
    pub k: DMatrix<f64>,
    /// Relative Riccati residual ‖AᵀP + PA − PBR⁻¹BᵀP + Q‖_F / (1 + ‖P‖_F).
    pub residual: f64,
    /// Newton iterations taken after the Schur solve (0 when the Schur
    /// solution is already at the round-off floor).
    pub newton_iterations: usize,
    /// Eigenvalues of A − BK.
    pub closed_loop_eigenvalues: Vec<Complex<f64>>,
}

pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<CareSolution, SynthesisError> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(SynthesisError::DimensionMismatch(format!(
            "A {}x{}, B {}x{}, Q {}x{}, R {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            q.nrows(),
            q.ncols(),
            r.nrows(),
            r.ncols()
        )));
    }
    let r_chol = Cholesky::new(r.clone()).ok_or(SynthesisError::NotPositiveDefinite("R"))?;
    let g = symmetrize(&(b * r_chol.solve(&b.transpose())));

    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let (mut z, mut t) = schur_decompose(&h, SCHUR_MAX_ITERS)?;
    for e in quasi_triangular_eigenvalues(&t) {
        if e.re.abs() < IMAGINARY_AXIS_TOL {
            return Err(SynthesisError::ImaginaryAxisEigenvalue {
                real_part: e.re,
                tol: IMAGINARY_AXIS_TOL,
            });
        }
    }
    let n_stable = reorder_schur(&mut t, &mut z, |re, _| re < 0.0)?;
    if n_stable != n {
        return Err(SynthesisError::NoStabilizingSolution(format!(
            "Hamiltonian has {n_stable} stable eigenvalues, expected {n}"
        )));
    }

    let u11 = z.view((0, 0), (n, n)).into_owned();
    let u21 = z.view((n, 0), (n, n)).into_owned();
    let sv = u11
        .clone()
        .try_svd(false, false, f64::EPSILON, SCHUR_MAX_ITERS)
        .ok_or(SynthesisError::IllConditioned {
            what: "stable subspace basis",
            measure: f64::INFINITY,
        })?
        .singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if smin <= 0.0 || smax / smin > SUBSPACE_COND_LIMIT {
        return Err(SynthesisError::IllConditioned {
            what: "stable subspace basis",
            measure: if smin > 0.0 {
                smax / smin
            } else {
                f64::INFINITY
            },
        });
    }
    // P = U21·U11⁻¹, via U11ᵀ·Pᵀ = U21ᵀ
    let pt =
        u11.transpose()
            .lu()
            .solve(&u21.transpose())
            .ok_or(SynthesisError::IllConditioned {
                what: "stable subspace basis",
                measure: f64::INFINITY,
            })?;
    let mut p = symmetrize(&pt.transpose());

    // Kleinman-Newton: with K fixed, the Riccati equation becomes the
    // Lyapunov equation (A−BK)ᵀP + P(A−BK) + Q + KᵀRK = 0; iterate while it
    // keeps improving the residual.
    let mut k = r_chol.solve(&(b.transpose() * &p));
    let mut residual = care_residual(a, &g, q, &p);
    let mut iterations = 0;
    while residual > NEWTON_TOL * (1.0 + p.norm()) && iterations < NEWTON_MAX_ITERS {
        let a_cl = a - b * &k;
        let rhs = q + k.transpose() * r * &k;
        let p_next = match solve_lyapunov(&a_cl, &rhs) {
            Some(p_next) => symmetrize(&p_next),
            None => break,
        };
        let residual_next = care_residual(a, &g, q, &p_next);
        // stop on any non-improvement, including NaN
        if residual_next.partial_cmp(&residual) != Some(std::cmp::Ordering::Less) {
            break;
        }
        p = p_next;
        residual = residual_next;
        k = r_chol.solve(&(b.transpose() * &p));
        iterations += 1;
    }

    let p_eig_min = p.clone().symmetric_eigenvalues().min();
    if p_eig_min <= 0.0 {
        return Err(SynthesisError::NoStabilizingSolution(format!(
            "Riccati solution is not positive definite (min eigenvalue {p_eig_min:.3e})"
        )));
    }
    let a_cl = a - b * &k;
    let (_, t_cl) = schur_decompose(&a_cl, SCHUR_MAX_ITERS)?;
    let closed_loop_eigenvalues: Vec<Complex<f64>> = quasi_triangular_eigenvalues(&t_cl);
    if closed_loop_eigenvalues.iter().any(|e| e.re >= 0.0) {
        return Err(SynthesisError::NoStabilizingSolution(
            "closed loop is not Hurwitz".into(),
        ));
    }

    Ok(CareSolution {
        residual: residual / (1.0 + p.norm()),
        p,
        k,
        newton_iterations: iterations,
        closed_loop_eigenvalues,
    })
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Absolute Frobenius norm of AᵀP + PA − PGP + Q.
fn care_residual(a: &DMatrix<f64>, g: &DMatrix<f64>, q: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    (a.transpose() * p + p * a - p * g * p + q).norm()
}

/// Solves AᵀX + XA + C = 0 by LU on the Kronecker-vectorized system; fine
/// for the n ≤ 9 problems handled here. Returns None when A has eigenvalue
/// pairs summing to zero (nonunique solution).
fn solve_lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let eye: DMatrix<f64> = DMatrix::identity(n, n);
    let at = a.transpose();
    let m = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DVector::<f64>::from_column_slice(c.as_slice());
    let x = m.lu().solve(&(-rhs))?;
    Some(DMatrix::from_column_slice(n, n, x.as_slice()))
}
