//! Eigenvalue reordering for real Schur forms.
//!
//! nalgebra produces an unordered real Schur decomposition; reading a stable
//! invariant subspace off it requires the selected eigenvalues to occupy the
//! leading block. This implements the standard adjacent-block exchange: each
//! swap solves a small Sylvester equation (at most 4×4 via Kronecker
//! vectorization) and applies an orthogonal transform obtained from a QR
//! factorization, then verifies that the annihilated block really vanished.

use super::SynthesisError;
use nalgebra::{Complex, DMatrix, DVector, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relative residual tolerated in the block a swap is supposed to zero.
const SWAP_RESIDUAL_LIMIT: f64 = 1e-8;
/// Random-similarity restarts attempted when the plain QR iteration stalls.
const RESTART_ATTEMPTS: u64 = 8;

/// Real Schur decomposition `m = z·t·zᵀ` with a bounded iteration count.
///
/// nalgebra's Francis QR iteration carries no exceptional-shift restart, so
/// it can stall permanently on structured matrices; the sparse Hamiltonians
/// assembled by the Riccati solver, with spectra symmetric about both axes,
/// trigger exactly that. When the plain decomposition fails, retry on
/// Q₀ᵀ·M·Q₀ for a few deterministic random orthogonal Q₀: the similarity
/// scrambles the entry pattern causing the stall without touching the
/// spectrum, and the basis folds back as Z = Q₀·Z′.
pub fn schur_decompose(
    m: &DMatrix<f64>,
    max_iter: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>), SynthesisError> {
    if let Some(s) = Schur::try_new(m.clone(), f64::EPSILON, max_iter) {
        let (z, t) = s.unpack();
        return Ok((z, t));
    }
    for seed in 0..RESTART_ATTEMPTS {
        let q0 = random_orthogonal(m.nrows(), seed);
        let rotated = q0.transpose() * m * &q0;
        if let Some(s) = Schur::try_new(rotated, f64::EPSILON, max_iter) {
            let (z, t) = s.unpack();
            return Ok((&q0 * z, t));
        }
    }
    Err(SynthesisError::SchurFailed)
}

fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
        .qr()
        .q()
}

/// Eigenvalues of a real quasi-upper-triangular matrix, read off its
/// diagonal 1×1 and 2×2 blocks.
pub fn quasi_triangular_eigenvalues(t: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let n = t.nrows();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if block_size(t, i) == 1 {
            out.push(Complex::new(t[(i, i)], 0.0));
            i += 1;
        } else {
            let mean = 0.5 * (t[(i, i)] + t[(i + 1, i + 1)]);
            let half_diff = 0.5 * (t[(i, i)] - t[(i + 1, i + 1)]);
            let disc = half_diff * half_diff + t[(i, i + 1)] * t[(i + 1, i)];
            if disc >= 0.0 {
                out.push(Complex::new(mean + disc.sqrt(), 0.0));
                out.push(Complex::new(mean - disc.sqrt(), 0.0));
            } else {
                let im = (-disc).sqrt();
                out.push(Complex::new(mean, im));
                out.push(Complex::new(mean, -im));
            }
            i += 2;
        }
    }
    out
}

#[derive(Clone, Copy)]
struct Block {
    size: usize,
    selected: bool,
}

/// Reorders `t` (quasi-upper-triangular) and `z` (orthogonal) in place so
/// that all eigenvalues satisfying `select(re, im)` come first, preserving
/// `z·t·zᵀ`. Returns the number of selected eigenvalues.
pub fn reorder_schur(
    t: &mut DMatrix<f64>,
    z: &mut DMatrix<f64>,
    select: impl Fn(f64, f64) -> bool,
) -> Result<usize, SynthesisError> {
    clean_subdiagonal(t);
    split_real_paired_blocks(t, z)?;

    let mut blocks: Vec<Block> = Vec::new();
    {
        let mut start = 0;
        while start < t.nrows() {
            let size = block_size(t, start);
            let (re, im) = block_eigenvalue(t, start, size);
            blocks.push(Block {
                size,
                selected: select(re, im),
            });
            start += size;
        }
    }
    let selected_count = blocks.iter().filter(|b| b.selected).map(|b| b.size).sum();

    let mut i = 0;
    while i < blocks.len() {
        if blocks[i].selected {
            i += 1;
            continue;
        }
        let Some(j) = (i + 1..blocks.len()).find(|&j| blocks[j].selected) else {
            break;
        };
        for k in (i..j).rev() {
            let start: usize = blocks[..k].iter().map(|b| b.size).sum();
            swap_adjacent(t, z, start, blocks[k].size, blocks[k + 1].size)?;
            blocks.swap(k, k + 1);
        }
        i += 1;
    }
    Ok(selected_count)
}

/// Zeroes subdiagonal entries that are negligible relative to their
/// neighboring diagonal, so the block scan sees clean 1×1 blocks.
fn clean_subdiagonal(t: &mut DMatrix<f64>) {
    let n = t.nrows();
    let scale = t.norm();
    for i in 0..n.saturating_sub(1) {
        let local = t[(i, i)].abs() + t[(i + 1, i + 1)].abs();
        let tol = f64::EPSILON * if local > 0.0 { local } else { scale };
        if t[(i + 1, i)].abs() <= tol {
            t[(i + 1, i)] = 0.0;
        }
    }
}

/// Rotates any 2×2 diagonal block whose eigenvalues are real into upper
/// triangular form, so every remaining 2×2 block is a genuine complex pair.
/// Such blocks cannot be moved as a unit when only one of their eigenvalues
/// is selected.
fn split_real_paired_blocks(
    t: &mut DMatrix<f64>,
    z: &mut DMatrix<f64>,
) -> Result<(), SynthesisError> {
    let n = t.nrows();
    let mut i = 0;
    while i + 1 < n {
        if t[(i + 1, i)] == 0.0 {
            i += 1;
            continue;
        }
        let (a, b) = (t[(i, i)], t[(i, i + 1)]);
        let (c, d) = (t[(i + 1, i)], t[(i + 1, i + 1)]);
        let half_diff = 0.5 * (a - d);
        let disc = half_diff * half_diff + b * c;
        if disc < 0.0 {
            i += 2;
            continue;
        }
        // real eigenvalues: align an eigenvector with e1
        let lambda = 0.5 * (a + d) + half_diff.signum() * disc.sqrt();
        let v1 = (b, lambda - a);
        let v2 = (lambda - d, c);
        let v = if v1.0.abs() + v1.1.abs() >= v2.0.abs() + v2.1.abs() {
            v1
        } else {
            v2
        };
        let norm = (v.0 * v.0 + v.1 * v.1).sqrt();
        if norm == 0.0 {
            i += 2;
            continue;
        }
        let u =
            DMatrix::from_column_slice(2, 2, &[v.0 / norm, v.1 / norm, -v.1 / norm, v.0 / norm]);
        apply_window_transform(t, z, i, &u);
        let leak = t[(i + 1, i)].abs();
        let tol = SWAP_RESIDUAL_LIMIT * (1.0 + t.norm());
        if leak > tol {
            return Err(SynthesisError::IllConditioned {
                what: "Schur block standardization",
                measure: leak,
            });
        }
        t[(i + 1, i)] = 0.0;
        i += 1;
    }
    Ok(())
}

fn block_size(t: &DMatrix<f64>, start: usize) -> usize {
    if start + 1 < t.nrows() && t[(start + 1, start)] != 0.0 {
        2
    } else {
        1
    }
}

fn block_eigenvalue(t: &DMatrix<f64>, start: usize, size: usize) -> (f64, f64) {
    if size == 1 {
        (t[(start, start)], 0.0)
    } else {
        let re = 0.5 * (t[(start, start)] + t[(start + 1, start + 1)]);
        let half_diff = 0.5 * (t[(start, start)] - t[(start + 1, start + 1)]);
        let disc = half_diff * half_diff + t[(start, start + 1)] * t[(start + 1, start)];
        (re, (-disc).max(0.0).sqrt())
    }
}

/// Exchanges the adjacent diagonal blocks of sizes `p` then `q` starting at
/// `start`, so the trailing block's eigenvalues move in front.
fn swap_adjacent(
    t: &mut DMatrix<f64>,
    z: &mut DMatrix<f64>,
    start: usize,
    p: usize,
    q: usize,
) -> Result<(), SynthesisError> {
    let s = p + q;
    let t11 = t.view((start, start), (p, p)).into_owned();
    let t12 = t.view((start, start + p), (p, q)).into_owned();
    let t22 = t.view((start + p, start + p), (q, q)).into_owned();

    // X solving T11·X − X·T22 = T12; the swap is ill-posed when the blocks
    // share eigenvalues, which the caller's selection rules out.
    let m = DMatrix::identity(q, q).kronecker(&t11)
        - t22.transpose().kronecker(&DMatrix::identity(p, p));
    let rhs = DVector::from_column_slice(t12.as_slice());
    let x = m.lu().solve(&rhs).ok_or(SynthesisError::IllConditioned {
        what: "Schur block exchange (coincident eigenvalues)",
        measure: f64::INFINITY,
    })?;
    let x = DMatrix::from_column_slice(p, q, x.as_slice());

    // orthogonal U whose leading q columns span [[−X],[I]], the invariant
    // subspace carrying the T22 eigenvalues
    let mut w = DMatrix::zeros(s, s);
    w.view_mut((0, 0), (p, q)).copy_from(&(-&x));
    w.view_mut((p, 0), (q, q))
        .copy_from(&DMatrix::identity(q, q));
    w.view_mut((0, q), (p, p))
        .copy_from(&DMatrix::identity(p, p));
    let u = w.qr().q();
    apply_window_transform(t, z, start, &u);

    let leak = t.view((start + q, start), (p, q)).norm();
    let tol = SWAP_RESIDUAL_LIMIT * (1.0 + t.norm());
    if leak > tol {
        return Err(SynthesisError::IllConditioned {
            what: "Schur block exchange",
            measure: leak,
        });
    }
    t.view_mut((start + q, start), (p, q)).fill(0.0);
    Ok(())
}

/// Similarity-transforms `t` by `diag(I, u, I)` (u square, anchored at
/// `start`) and accumulates the transform into `z`.
fn apply_window_transform(
    t: &mut DMatrix<f64>,
    z: &mut DMatrix<f64>,
    start: usize,
    u: &DMatrix<f64>,
) {
    let s = u.nrows();
    let rows = t.rows(start, s).into_owned();
    t.rows_mut(start, s).copy_from(&(u.transpose() * rows));
    let cols = t.columns(start, s).into_owned();
    t.columns_mut(start, s).copy_from(&(cols * u));
    let zcols = z.columns(start, s).into_owned();
    z.columns_mut(start, s).copy_from(&(zcols * u));
}
