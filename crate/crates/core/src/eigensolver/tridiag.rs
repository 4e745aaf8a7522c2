//! Symmetric tridiagonal eigensolver: implicit QR steps with a Wilkinson
//! shift, deflating converged off-diagonals from the bottom up.

use super::{EigenError, Result};

/// Symmetric tridiagonal matrix: `alphas` on the diagonal, `betas[i]`
/// coupling rows `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalMatrix {
    alphas: Vec<f64>,
    betas: Vec<f64>,
}

impl TridiagonalMatrix {
    pub fn new(alphas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if betas.len() + 1 != alphas.len().max(1) {
            return Err(EigenError::Domain(format!(
                "{} diagonal entries need {} off-diagonal entries, got {}",
                alphas.len(),
                alphas.len().saturating_sub(1),
                betas.len()
            )));
        }
        if alphas.iter().chain(&betas).any(|x| !x.is_finite()) {
            return Err(EigenError::Domain(
                "tridiagonal entries must be finite".into(),
            ));
        }
        Ok(TridiagonalMatrix { alphas, betas })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn dim(&self) -> usize {
        self.alphas.len()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let m = self.dim();
        let mut a = vec![vec![0.0; m]; m];
        for i in 0..m {
            a[i][i] = self.alphas[i];
            if i + 1 < m {
                a[i][i + 1] = self.betas[i];
                a[i + 1][i] = self.betas[i];
            }
        }
        a
    }
}

/// Eigenvalues ascending; `vectors[i]` is the unit eigenvector of
/// `values[i]`.
#[derive(Debug, Clone)]
pub struct TridiagonalEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// `(c, s)` with `[c s; -s c]ᵀ [a; b] = [r; 0]`.
fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else if b.abs() > a.abs() {
        let tau = -a / b;
        let s = 1.0 / (1.0 + tau * tau).sqrt();
        (s * tau, s)
    } else {
        let tau = -b / a;
        let c = 1.0 / (1.0 + tau * tau).sqrt();
        (c, c * tau)
    }
}

/// One implicit shifted QR step on the unreduced block `lo..=hi`.
/// `q` holds eigenvector columns as rows of its transpose: `q[col][row]`.
fn qr_step(d: &mut [f64], e: &mut [f64], lo: usize, hi: usize, q: &mut [Vec<f64>]) {
    let half = (d[hi - 1] - d[hi]) / 2.0;
    let coupling = e[hi - 1];
    let sign = if half >= 0.0 { 1.0 } else { -1.0 };
    let shift = d[hi] - coupling * coupling / (half + sign * half.hypot(coupling));

    let mut x = d[lo] - shift;
    let mut z = e[lo];
    for k in lo..hi {
        let (c, s) = givens(x, z);
        if k > lo {
            e[k - 1] = c * x - s * z;
        }
        let (p, off, r) = (d[k], e[k], d[k + 1]);
        d[k] = c * c * p - 2.0 * c * s * off + s * s * r;
        d[k + 1] = s * s * p + 2.0 * c * s * off + c * c * r;
        e[k] = c * s * (p - r) + (c * c - s * s) * off;
        if k + 1 < hi {
            let next = e[k + 1];
            x = e[k];
            z = -s * next;
            e[k + 1] = c * next;
        }
        let (left, right) = q.split_at_mut(k + 1);
        let (qk, qk1) = (&mut left[k], &mut right[0]);
        for (a, b) in qk.iter_mut().zip(qk1.iter_mut()) {
            let (u, v) = (*a, *b);
            *a = c * u - s * v;
            *b = s * u + c * v;
        }
    }
}

pub fn tridiagonal_eigen(t: &TridiagonalMatrix) -> Result<TridiagonalEigen> {
    let m = t.dim();
    let mut d = t.alphas.clone();
    let mut e = t.betas.clone();
    let mut q: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut col = vec![0.0; m];
            col[i] = 1.0;
            col
        })
        .collect();

    let max_sweeps = 30 * m.max(1);
    let mut sweeps = 0;
    let mut hi = m.saturating_sub(1);
    while hi > 0 {
        for i in 0..hi {
            if e[i].abs() <= f64::EPSILON * (d[i].abs() + d[i + 1].abs()) {
                e[i] = 0.0;
            }
        }
        if e[hi - 1] == 0.0 {
            hi -= 1;
            continue;
        }
        let mut lo = hi - 1;
        while lo > 0 && e[lo - 1] != 0.0 {
            lo -= 1;
        }
        sweeps += 1;
        if sweeps > max_sweeps {
            return Err(EigenError::Convergence(format!(
                "tridiagonal QR did not converge within {max_sweeps} sweeps"
            )));
        }
        qr_step(&mut d, &mut e, lo, hi, &mut q);
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    Ok(TridiagonalEigen {
        values: order.iter().map(|&i| d[i]).collect(),
        vectors: order
            .into_iter()
            .map(|i| std::mem::take(&mut q[i]))
            .collect(),
    })
}
