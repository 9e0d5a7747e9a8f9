use super::{dot, norm2, DenseMatrix, SeededRng};
use crate::error::{Error, Result};

/// Default relative cutoff on singular values when extracting column spaces.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 80;

fn check_finite(m: &DenseMatrix) -> Result<()> {
    // DenseMatrix guarantees finiteness at construction; from_fn only in debug.
    if m.data().iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid("matrix has non-finite entries"))
    }
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// the columns of the second value. The input is symmetrized first; callers
/// that need a symmetry check should go through [`symmetric_eig_extremes`].
pub fn jacobi_eigen(s: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    if !s.is_square() {
        return Err(Error::invalid(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    check_finite(s)?;
    let n = s.rows();
    let mut a: Vec<f64> = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (s.get(i, j) + s.get(j, i)))
        .data()
        .to_vec();
    let mut v = DenseMatrix::identity(n).data().to_vec();
    let idx = |i: usize, j: usize| i * n + j;

    let total: f64 = a.iter().map(|x| x * x).sum();
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[idx(i, j)] * a[idx(i, j)];
            }
        }
        if off == 0.0 || off <= 1e-32 * total {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[idx(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[idx(p, p)];
                let aqq = a[idx(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                a[idx(p, p)] = app - t * apq;
                a[idx(q, q)] = aqq + t * apq;
                a[idx(p, q)] = 0.0;
                a[idx(q, p)] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let g = a[idx(r, p)];
                        let h = a[idx(r, q)];
                        let rp = c * g - sn * h;
                        let rq = sn * g + c * h;
                        a[idx(r, p)] = rp;
                        a[idx(p, r)] = rp;
                        a[idx(r, q)] = rq;
                        a[idx(q, r)] = rq;
                    }
                    let g = v[idx(r, p)];
                    let h = v[idx(r, q)];
                    v[idx(r, p)] = c * g - sn * h;
                    v[idx(r, q)] = sn * g + c * h;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[idx(i, i)].total_cmp(&a[idx(j, j)]));
    let values = order.iter().map(|&i| a[idx(i, i)]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| v[idx(r, order[c])]);
    Ok((values, vectors))
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn symmetric_eig_extremes(s: &DenseMatrix) -> Result<(f64, f64)> {
    if !s.is_square() {
        return Err(Error::invalid("eigenvalue extremes need a square matrix"));
    }
    check_finite(s)?;
    let n = s.rows();
    if n == 0 {
        return Err(Error::invalid("empty matrix has no eigenvalues"));
    }
    let scale = s.max_abs().max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (s.get(i, j) - s.get(j, i)).abs() > 1e-10 * scale {
                return Err(Error::invalid(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let (values, _) = jacobi_eigen(s)?;
    Ok((values[0], values[n - 1]))
}

/// Thin singular value decomposition `M = U diag(sigma) V^T`.
///
/// `u` is `m x n`, `v` is `n x n`; singular values are sorted descending.
/// Columns of `u` whose singular value is zero are left zero.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd_jacobi(m: &DenseMatrix) -> Result<Svd> {
    check_finite(m)?;
    let (rows, n) = m.shape();
    // Work column-major: cols[j] is column j of M V.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| m.column(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                let gamma = dot(&cols[i], &cols[j]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(j);
                rotate(&mut left[i], &mut right[0], c, s);
                let (left, right) = vcols.split_at_mut(j);
                rotate(&mut left[i], &mut right[0], c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<f64> = cols.iter().map(|c| norm2(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let u = DenseMatrix::from_fn(rows, n, |r, c| {
        let k = order[c];
        if sigma[k] > 0.0 {
            cols[k][r] / sigma[k]
        } else {
            0.0
        }
    });
    let v = DenseMatrix::from_fn(n, n, |r, c| vcols[order[c]][r]);
    sigma = order.iter().map(|&k| sigma[k]).collect();
    let _ = rows;
    Ok(Svd { u, sigma, v })
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let xa = *a;
        let yb = *b;
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Orthonormal basis of the column space of `m`.
///
/// Directions whose singular value is at most `rank_tol` times the largest
/// singular value are dropped. Returns the basis as the columns of an
/// `rows x rank` matrix together with the rank.
pub fn orthonormal_column_basis(m: &DenseMatrix, rank_tol: f64) -> Result<(DenseMatrix, usize)> {
    if !(rank_tol > 0.0) {
        return Err(Error::invalid("rank_tol must be positive"));
    }
    check_finite(m)?;
    let rows = m.rows();
    if m.cols() == 0 || rows == 0 {
        return Ok((DenseMatrix::zeros(rows, 0), 0));
    }
    let svd = svd_jacobi(m)?;
    let top = svd.sigma[0];
    if top == 0.0 {
        return Ok((DenseMatrix::zeros(rows, 0), 0));
    }
    let keep = svd.sigma.iter().take_while(|&&s| s > rank_tol * top).count().min(rows);
    // Two passes of modified Gram-Schmidt tighten orthogonality of the
    // weakly determined trailing columns.
    let mut basis: Vec<Vec<f64>> = (0..keep).map(|j| svd.u.column(j)).collect();
    for _ in 0..2 {
        for j in 0..keep {
            let (done, rest) = basis.split_at_mut(j);
            let col = &mut rest[0];
            for prev in done.iter() {
                let proj = dot(prev, col);
                for (c, p) in col.iter_mut().zip(prev) {
                    *c -= proj * p;
                }
            }
            let nrm = norm2(col);
            if nrm == 0.0 {
                return Err(Error::Numerical("column basis collapsed".into()));
            }
            for c in col.iter_mut() {
                *c /= nrm;
            }
        }
    }
    Ok((DenseMatrix::from_columns(rows, &basis), keep))
}

/// Orthonormal-row factor `U V^T` of a full-row-rank `p x d` matrix (`p <= d`).
pub fn polar_factor(g: &DenseMatrix, rank_tol: f64) -> Result<DenseMatrix> {
    let (p, d) = g.shape();
    if p > d {
        return Err(Error::invalid("polar factor needs rows <= cols"));
    }
    // G^T = A S B^T with A (d x p), so G = B S A^T and the factor is B A^T.
    let svd = svd_jacobi(&g.transpose())?;
    let top = svd.sigma.first().copied().unwrap_or(0.0);
    if top == 0.0 || svd.sigma.iter().any(|&s| s <= rank_tol * top) {
        return Err(Error::Numerical("matrix is rank deficient".into()));
    }
    svd.v.matmul(&svd.u.transpose())
}

/// Squared spectral norm of a linear map by power iteration on `A^T A`.
///
/// The estimate is the running maximum of `||A x_t||^2` over unit iterates,
/// so it never decreases as `iters` grows.
pub fn operator_norm_sq(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    apply_adjoint: impl Fn(&[f64]) -> Vec<f64>,
    dim: usize,
    iters: usize,
    rng: &mut SeededRng,
) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    let mut x = rng.normal_vec(dim);
    let nrm = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nrm);
    let mut best = 0.0f64;
    for _ in 0..iters.max(1) {
        let ax = apply(&x);
        best = best.max(dot(&ax, &ax));
        let w = apply_adjoint(&ax);
        let wn = norm2(&w);
        if wn == 0.0 {
            break;
        }
        x = w.into_iter().map(|v| v / wn).collect();
    }
    best
}
