//! Lanczos tridiagonalization.
//!
//! Runs the three-term recurrence
//! `w = L v_j - β_j v_{j-1}; α_j = (w, v_j); w -= α_j v_j; β_{j+1} = ‖w‖`
//! with optional full reorthogonalization of `w` against every previous
//! basis vector. The recurrence itself is sequential; only `L v_j` is
//! parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::laplacian::LinearOperator;
use super::tridiag::TridiagonalMatrix;
use super::{EigenError, Result};

/// β below this ends the iteration: the Krylov space is invariant.
pub const BREAKDOWN: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    pub reorthogonalize: bool,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            reorthogonalize: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LanczosResult {
    pub tridiagonal: TridiagonalMatrix,
    /// Orthonormal basis `v_1..v_j`, one vector per step taken.
    pub basis: Vec<Vec<f64>>,
    /// `β_{j+1}` after the last step (0 on breakdown).
    pub residual_beta: f64,
    pub broke_down: bool,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (a, b) in y.iter_mut().zip(x) {
        *a += alpha * b;
    }
}

/// Two Gram-Schmidt passes of `w` against each vector set.
fn project_out(w: &mut [f64], sets: &[&[Vec<f64>]]) {
    for _ in 0..2 {
        for set in sets {
            for q in set.iter() {
                let c = dot(w, q);
                axpy(w, -c, q);
            }
        }
    }
}

/// Unit start vector from the seed, orthogonal to `deflate`. Returns `None`
/// when `deflate` already spans the whole space.
pub(crate) fn start_vector(n: usize, seed: u64, deflate: &[Vec<f64>]) -> Option<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        project_out(&mut v, &[deflate]);
        let nv = norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            return Some(v);
        }
    }
    None
}

/// `steps` Lanczos iterations from a seeded random unit start vector.
pub fn lanczos(
    op: &mut dyn LinearOperator,
    steps: usize,
    seed: u64,
    options: &LanczosOptions,
) -> Result<LanczosResult> {
    lanczos_deflated(op, steps, seed, options, &[])
}

/// Lanczos restricted to the orthogonal complement of `deflate` (an
/// orthonormal set of already converged eigenvectors).
pub fn lanczos_deflated(
    op: &mut dyn LinearOperator,
    steps: usize,
    seed: u64,
    options: &LanczosOptions,
    deflate: &[Vec<f64>],
) -> Result<LanczosResult> {
    let n = op.dim();
    if n == 0 {
        return Err(EigenError::Domain("operator has dimension 0".into()));
    }
    if steps == 0 || steps > n {
        return Err(EigenError::Domain(format!(
            "steps must be in 1..={n}, got {steps}"
        )));
    }
    let v1 = start_vector(n, seed, deflate)
        .ok_or_else(|| EigenError::Domain("deflation set spans the whole space".into()))?;
    lanczos_from(op, v1, steps, options, deflate)
}

/// Lanczos from a given unit start vector.
pub fn lanczos_from(
    op: &mut dyn LinearOperator,
    v1: Vec<f64>,
    steps: usize,
    options: &LanczosOptions,
    deflate: &[Vec<f64>],
) -> Result<LanczosResult> {
    let n = op.dim();
    if v1.len() != n {
        return Err(EigenError::Domain("start vector has wrong length".into()));
    }
    let mut basis: Vec<Vec<f64>> = vec![v1];
    let mut alphas = Vec::with_capacity(steps);
    let mut betas = Vec::with_capacity(steps);
    let mut beta = 0.0;
    let mut broke_down = false;

    for j in 0..steps {
        let mut w = op.apply(&basis[j])?;
        if j > 0 {
            axpy(&mut w, -beta, &basis[j - 1]);
        }
        let alpha = dot(&w, &basis[j]);
        axpy(&mut w, -alpha, &basis[j]);
        alphas.push(alpha);
        if options.reorthogonalize {
            project_out(&mut w, &[deflate, &basis]);
        } else if !deflate.is_empty() {
            project_out(&mut w, &[deflate]);
        }
        beta = norm(&w);
        if !beta.is_finite() {
            return Err(EigenError::Convergence(
                "Lanczos produced a non-finite vector".into(),
            ));
        }
        if beta < BREAKDOWN {
            broke_down = true;
            beta = 0.0;
            break;
        }
        if j + 1 == steps {
            break;
        }
        betas.push(beta);
        w.iter_mut().for_each(|x| *x /= beta);
        basis.push(w);
    }

    Ok(LanczosResult {
        tridiagonal: TridiagonalMatrix::new(alphas, betas)?,
        basis,
        residual_beta: beta,
        broke_down,
    })
}
