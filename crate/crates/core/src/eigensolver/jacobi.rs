//! Cyclic Jacobi eigensolver for small dense symmetric matrices. Slow and
//! simple; it exists to check the Lanczos path, not to be used by it.

use super::{EigenError, Result};

const MAX_DIM: usize = 256;
const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone)]
pub struct DenseEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// `vectors[i]` belongs to `values[i]`.
    pub vectors: Vec<Vec<f64>>,
}

fn off_diagonal_norm(a: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for (i, row) in a.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            if i != j {
                s += x * x;
            }
        }
    }
    s.sqrt()
}

pub fn jacobi_eigen_oracle(matrix: &[Vec<f64>]) -> Result<DenseEigen> {
    let n = matrix.len();
    if n > MAX_DIM {
        return Err(EigenError::Domain(format!(
            "oracle limited to n <= {MAX_DIM}, got {n}"
        )));
    }
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != n {
            return Err(EigenError::Domain(format!(
                "row {i} has length {}",
                row.len()
            )));
        }
        for j in 0..i {
            if (row[j] - matrix[j][i]).abs() > 1e-12 {
                return Err(EigenError::Domain(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }

    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    // v[r][c]: eigenvector c is column c
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();

    let scale: f64 = a
        .iter()
        .flatten()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(1.0);
    let target = 1e-13 * scale;
    let mut sweeps = 0;
    while off_diagonal_norm(&a) >= target {
        sweeps += 1;
        if sweeps > MAX_SWEEPS {
            return Err(EigenError::Convergence(format!(
                "Jacobi did not converge in {MAX_SWEEPS} sweeps"
            )));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                a[p][q] = 0.0;
                a[q][p] = 0.0;
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x][x].total_cmp(&a[y][y]).then(x.cmp(&y)));
    Ok(DenseEigen {
        values: order.iter().map(|&i| a[i][i]).collect(),
        vectors: order
            .iter()
            .map(|&c| v.iter().map(|row| row[c]).collect())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity() {
        let eye: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let eig = jacobi_eigen_oracle(&eye).unwrap();
        assert_eq!(eig.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_sorted() {
        let a = vec![
            vec![3.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 2.0],
        ];
        let eig = jacobi_eigen_oracle(&a).unwrap();
        assert_eq!(eig.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(eig.vectors[0], vec![0.0, 1.0, 0.0]);
        assert_eq!(eig.vectors[2], vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_asymmetric() {
        let a = vec![vec![1.0, 2.0], vec![2.1, 1.0]];
        assert!(matches!(
            jacobi_eigen_oracle(&a),
            Err(EigenError::Domain(_))
        ));
    }

    #[test]
    fn recovers_constructed_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10;
        // random orthogonal basis by Gram-Schmidt
        let mut z: Vec<Vec<f64>> = Vec::new();
        while z.len() < n {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            for u in &z {
                let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            z.push(v);
        }
        let lambdas: Vec<f64> = (0..n).map(|i| i as f64 * 0.7 - 2.0).collect();
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|c| z[c][i] * lambdas[c] * z[c][j]).sum())
                    .collect()
            })
            .collect();
        let sym: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| 0.5 * (a[i][j] + a[j][i])).collect())
            .collect();
        let eig = jacobi_eigen_oracle(&sym).unwrap();
        for (got, want) in eig.values.iter().zip(&lambdas) {
            assert!((got - want).abs() < 1e-10);
        }
    }
}
