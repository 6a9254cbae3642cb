//! Small dense linear-algebra helpers on top of `nalgebra` for the K×K
//! symmetric matrices that appear throughout (K ≤ 4 in practice).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Matrix = DMatrix<f64>;

/// Eigen-decomposition of a symmetric matrix with eigenvalues in ascending
/// order and eigenvectors as matching columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

pub fn sym_eigen(m: &Matrix) -> SymEigen {
    let k = m.nrows();
    if k == 0 {
        return SymEigen {
            values: vec![],
            vectors: Matrix::zeros(0, 0),
        };
    }
    let sym = symmetrize(m);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Matrix::zeros(k, k);
    for (col, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).clone_owned();
        // fix the sign so that the largest-magnitude entry is positive
        let (mut best, mut best_abs) = (0, -1.0);
        for r in 0..k {
            if v[r].abs() > best_abs + 1e-14 {
                best = r;
                best_abs = v[r].abs();
            }
        }
        if v[best] < 0.0 {
            v = -v;
        }
        vectors.set_column(col, &v);
    }
    SymEigen { values, vectors }
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// `f(M)` for symmetric `M` through its spectrum.
pub fn sym_apply(m: &Matrix, f: impl Fn(f64) -> f64) -> Matrix {
    let e = sym_eigen(m);
    let k = m.nrows();
    let mut d = Matrix::zeros(k, k);
    for i in 0..k {
        d[(i, i)] = f(e.values[i]);
    }
    &e.vectors * d * e.vectors.transpose()
}

pub fn sym_sqrt(m: &Matrix) -> Matrix {
    sym_apply(m, |v| v.max(0.0).sqrt())
}

pub fn sym_inv_sqrt(m: &Matrix) -> Matrix {
    sym_apply(m, |v| 1.0 / v.sqrt())
}

/// Entrywise maximum norm `max_ij |V_ij|`.
pub fn max_norm(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Spectral norm of a symmetric matrix: largest absolute eigenvalue.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    sym_eigen(m)
        .values
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Frobenius inner product `Σ_ij A_ij B_ij`.
pub fn frobenius_dot(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn quad_form(m: &Matrix, z: &[f64]) -> f64 {
    let k = z.len();
    let mut acc = 0.0;
    for i in 0..k {
        for j in 0..k {
            acc += z[i] * m[(i, j)] * z[j];
        }
    }
    acc
}

pub fn min_eigenvalue(m: &Matrix) -> f64 {
    sym_eigen(m).values.first().copied().unwrap_or(f64::INFINITY)
}

pub fn max_eigenvalue(m: &Matrix) -> f64 {
    sym_eigen(m).values.last().copied().unwrap_or(0.0)
}

/// Largest generalized eigenvalue of `(a, b)` with `b` positive definite,
/// i.e. `max_z zᵀAz / zᵀBz`.
pub fn max_generalized_eigenvalue(a: &Matrix, b: &Matrix) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    let w = sym_inv_sqrt(b);
    max_eigenvalue(&(&w * a * &w))
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn to_dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Determinant of a small square matrix (1 for the empty matrix).
pub fn det(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        1.0
    } else {
        m.determinant()
    }
}

/// Numerically stable `log Σ exp(v_i)`.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = values.into_iter().collect();
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_square_root_reconstructs() {
        let m = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let w = sym_inv_sqrt(&m);
        let id = &w * &m * &w;
        assert!((id - Matrix::identity(2, 2)).abs().max() < 1e-12);
        let s = sym_sqrt(&m);
        assert!((&s * &s - &m).abs().max() < 1e-12);
    }

    #[test]
    fn eigenvectors_orthonormal_and_sorted() {
        let m = Matrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.2, 0.0, 0.2, 1.0]);
        let e = sym_eigen(&m);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let g = e.vectors.transpose() * &e.vectors;
        assert!((g - Matrix::identity(3, 3)).abs().max() < 1e-10);
    }

    #[test]
    fn generalized_eigenvalue_of_scaled_matrix() {
        let b = Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let a = &b * 3.0;
        assert!((max_generalized_eigenvalue(&a, &b) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_handles_large_values() {
        let v = log_sum_exp([1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }
}
