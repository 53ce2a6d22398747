//! Hover-linearized attitude models and LQR/LQRi gain synthesis.
//!
//! The attitude state is `x = [Q_a; ω_B]` (angle-axis error, body rates);
//! the integral-augmented state is `x_aug = [z; Q_a; ω_B]` where `ż = Q_a`.

mod care;
mod schur;

pub use care::{solve_care, CareSolution};

use crate::vehicle::VehicleParams;
use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{0} must be symmetric")]
    NotSymmetric(&'static str),
    #[error("{0} must be positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("{0} must be positive semidefinite")]
    NotPositiveSemidefinite(&'static str),
    #[error("pair is uncontrollable: controllability matrix rank {rank} < {n}")]
    Uncontrollable { rank: usize, n: usize },
    #[error("Hamiltonian eigenvalue with real part {real_part:.3e} lies within {tol:.0e} of the imaginary axis; the stable/unstable split is not well defined")]
    ImaginaryAxisEigenvalue { real_part: f64, tol: f64 },
    #[error("Schur factorization of the Hamiltonian did not converge")]
    SchurFailed,
    #[error("ill-conditioned {what} (measure {measure:.3e})")]
    IllConditioned { what: &'static str, measure: f64 },
    #[error("no stabilizing Riccati solution: {0}")]
    NoStabilizingSolution(String),
}

/// Linear model ẋ = Ax + Bu with (A, B) verified controllable at
/// construction.
#[derive(Debug, Clone)]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self, SynthesisError> {
        if a.nrows() != a.ncols() || b.nrows() != a.nrows() {
            return Err(SynthesisError::DimensionMismatch(format!(
                "A {}x{}, B {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        let n = a.nrows();
        let rank = controllability_rank(&a, &b)?;
        if rank < n {
            return Err(SynthesisError::Uncontrollable { rank, n });
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }
}

/// Integral-augmented model over `x_aug = [z; Q_a; ω_B]`.
#[derive(Debug, Clone)]
pub struct AugmentedStateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl AugmentedStateSpace {
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
}

/// LQR cost matrices, validated: Q symmetric positive semidefinite, R
/// symmetric positive definite.
#[derive(Debug, Clone)]
pub struct CostWeights {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl CostWeights {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self, SynthesisError> {
        if q.nrows() != q.ncols() {
            return Err(SynthesisError::DimensionMismatch(format!(
                "Q {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        if r.nrows() != r.ncols() {
            return Err(SynthesisError::DimensionMismatch(format!(
                "R {}x{}",
                r.nrows(),
                r.ncols()
            )));
        }
        if (&q - q.transpose()).norm() > 1e-9 * (1.0 + q.norm()) {
            return Err(SynthesisError::NotSymmetric("Q"));
        }
        if (&r - r.transpose()).norm() > 1e-9 * (1.0 + r.norm()) {
            return Err(SynthesisError::NotSymmetric("R"));
        }
        let q = (&q + q.transpose()) * 0.5;
        let r = (&r + r.transpose()) * 0.5;
        if q.clone().symmetric_eigenvalues().min() < -1e-12 * (1.0 + q.norm()) {
            return Err(SynthesisError::NotPositiveSemidefinite("Q"));
        }
        if nalgebra::Cholesky::new(r.clone()).is_none() {
            return Err(SynthesisError::NotPositiveDefinite("R"));
        }
        Ok(Self { q, r })
    }

    pub fn from_diagonals(q_diag: &[f64], r_diag: &[f64]) -> Result<Self, SynthesisError> {
        let q = DMatrix::from_diagonal(&DVector::from_row_slice(q_diag));
        let r = DMatrix::from_diagonal(&DVector::from_row_slice(r_diag));
        Self::new(q, r)
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }
}

/// Synthesized feedback gain with its certification data: the Riccati
/// solution, the achieved residual, and the closed-loop spectrum.
#[derive(Debug, Clone)]
pub struct GainMatrix {
    k: DMatrix<f64>,
    p: DMatrix<f64>,
    residual: f64,
    newton_iterations: usize,
    closed_loop_eigenvalues: Vec<Complex<f64>>,
}

impl GainMatrix {
    fn from_solution(sol: CareSolution) -> Self {
        Self {
            k: sol.k,
            p: sol.p,
            residual: sol.residual,
            newton_iterations: sol.newton_iterations,
            closed_loop_eigenvalues: sol.closed_loop_eigenvalues,
        }
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Relative Riccati residual ‖AᵀP + PA − PBR⁻¹BᵀP + Q‖_F / (1 + ‖P‖_F).
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn newton_iterations(&self) -> usize {
        self.newton_iterations
    }

    pub fn closed_loop_eigenvalues(&self) -> &[Complex<f64>] {
        &self.closed_loop_eigenvalues
    }

    pub fn max_closed_loop_real_part(&self) -> f64 {
        self.closed_loop_eigenvalues
            .iter()
            .map(|e| e.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn n_states(&self) -> usize {
        self.k.ncols()
    }

    pub fn n_inputs(&self) -> usize {
        self.k.nrows()
    }
}

/// Numerical rank of `[B, AB, ..., A^{n−1}B]` with the threshold
/// `n·σ_max·ε`.
fn controllability_rank(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<usize, SynthesisError> {
    let n = a.nrows();
    let m = b.ncols();
    let mut ctrb = DMatrix::zeros(n, n * m);
    let mut term = b.clone();
    for i in 0..n {
        ctrb.view_mut((0, i * m), (n, m)).copy_from(&term);
        term = a * term;
    }
    let sv = ctrb
        .try_svd(false, false, f64::EPSILON, 200_000)
        .ok_or(SynthesisError::IllConditioned {
            what: "controllability matrix",
            measure: f64::INFINITY,
        })?
        .singular_values;
    let smax = sv.max();
    if smax <= 0.0 {
        return Ok(0);
    }
    let tol = n as f64 * smax * f64::EPSILON;
    Ok(sv.iter().filter(|&&s| s > tol).count())
}

/// Attitude dynamics linearized about hover:
/// `A = [[0, I], [0, 0]]`, `B = [[0], [J⁻¹]]` over `x = [Q_a; ω_B]`.
pub fn linearize_hover(params: &VehicleParams) -> Result<StateSpace, SynthesisError> {
    let mut a = DMatrix::zeros(6, 6);
    a.view_mut((0, 3), (3, 3))
        .copy_from(&DMatrix::identity(3, 3));
    let mut b = DMatrix::zeros(6, 3);
    for i in 0..3 {
        for j in 0..3 {
            b[(3 + i, j)] = params.inertia_inv()[(i, j)];
        }
    }
    StateSpace::new(a, b)
}

/// Augments the attitude model with the error integral `ż = Q_a`:
/// `A_aug = [[0, I, 0], [0, A]]`, `B_aug = [0; B]`.
pub fn augment_integral(ss: &StateSpace) -> Result<AugmentedStateSpace, SynthesisError> {
    let n = ss.n_states();
    let m = ss.n_inputs();
    if n != 6 || m != 3 {
        return Err(SynthesisError::DimensionMismatch(format!(
            "expected the 6-state 3-input attitude model, got {n} states and {m} inputs"
        )));
    }
    let mut a = DMatrix::zeros(9, 9);
    a.view_mut((0, 3), (3, 3))
        .copy_from(&DMatrix::identity(3, 3));
    a.view_mut((3, 3), (6, 6)).copy_from(ss.a());
    let mut b = DMatrix::zeros(9, 3);
    b.view_mut((3, 0), (6, 3)).copy_from(ss.b());

    let rank = controllability_rank(&a, &b)?;
    if rank < 9 {
        return Err(SynthesisError::Uncontrollable { rank, n: 9 });
    }
    Ok(AugmentedStateSpace { a, b })
}

/// 3×6 LQR gain over `[Q_a; ω_B]` from 6×6 / 3×3 weights.
pub fn synthesize_lqr(
    params: &VehicleParams,
    weights: &CostWeights,
) -> Result<GainMatrix, SynthesisError> {
    let ss = linearize_hover(params)?;
    if weights.q().nrows() != 6 || weights.r().nrows() != 3 {
        return Err(SynthesisError::DimensionMismatch(format!(
            "LQR expects 6x6 Q and 3x3 R, got {}x{} and {}x{}",
            weights.q().nrows(),
            weights.q().ncols(),
            weights.r().nrows(),
            weights.r().ncols()
        )));
    }
    let sol = solve_care(ss.a(), ss.b(), weights.q(), weights.r())?;
    Ok(GainMatrix::from_solution(sol))
}

/// 3×9 integral-augmented LQR gain over `[z; Q_a; ω_B]` from 9×9 / 3×3
/// weights.
pub fn synthesize_lqri(
    params: &VehicleParams,
    weights: &CostWeights,
) -> Result<GainMatrix, SynthesisError> {
    let ss = linearize_hover(params)?;
    let aug = augment_integral(&ss)?;
    if weights.q().nrows() != 9 || weights.r().nrows() != 3 {
        return Err(SynthesisError::DimensionMismatch(format!(
            "LQRi expects 9x9 Q and 3x3 R, got {}x{} and {}x{}",
            weights.q().nrows(),
            weights.q().ncols(),
            weights.r().nrows(),
            weights.r().ncols()
        )));
    }
    let sol = solve_care(aug.a(), aug.b(), weights.q(), weights.r())?;
    Ok(GainMatrix::from_solution(sol))
}
