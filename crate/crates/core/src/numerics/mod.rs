//! Dense linear-algebra kernels, vector helpers, deterministic randomness and
//! the CSV matrix format shared by every file the crate reads or writes.

mod csvio;
mod linalg;
mod matrix;
mod rng;

pub use csvio::{read_matrix_csv, read_vector_csv, write_matrix_csv, write_vector_csv};
pub use linalg::{
    jacobi_eigen, operator_norm_sq, orthonormal_column_basis, polar_factor, svd_jacobi,
    symmetric_eig_extremes, Svd, DEFAULT_RANK_TOL,
};
pub use matrix::DenseMatrix;
pub use rng::SeededRng;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| c * x).collect()
}
