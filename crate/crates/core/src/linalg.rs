//! Thin wrappers over the dense symmetric eigensolver.

use faer::{Mat, Side};

/// Eigenvalues in nondecreasing order with eigenvectors as the columns of `vectors`.
pub(crate) struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

pub(crate) fn sym_eigen(a: &Mat<f64>) -> SymEigen {
    let n = a.nrows();
    if n == 0 {
        return SymEigen { values: Vec::new(), vectors: Mat::zeros(0, 0) };
    }
    let evd = a.self_adjoint_eigen(Side::Lower).expect("symmetric eigendecomposition failed");
    let s = evd.S().column_vector();
    let values = (0..n).map(|i| s[i]).collect();
    SymEigen { values, vectors: evd.U().to_owned() }
}

/// `|| a v - lambda v ||_2` for a unit vector `v`.
pub(crate) fn eigen_residual(a: &Mat<f64>, v: &[f64], lambda: f64) -> f64 {
    let n = a.nrows();
    (0..n)
        .map(|i| {
            let av: f64 = (0..n).map(|j| a[(i, j)] * v[j]).sum();
            (av - lambda * v[i]).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}
