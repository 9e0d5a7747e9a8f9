//! Independent reference computations. Nothing here calls into the crate's
//! linear algebra; inputs are converted to nalgebra or plain vectors first.

#![allow(dead_code)]

use dripcs::frames::Frame;
use dripcs::measurement::MeasurementMatrix;
use dripcs::numerics::DenseMatrix;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j))
}

pub fn eig_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let e = SymmetricEigen::new(m.clone()).eigenvalues;
    (e.min(), e.max())
}

/// All k-subsets of 0..d in lexicographic order.
pub fn subsets(d: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, d: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            if d - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, d, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, d, k, &mut Vec::new(), &mut out);
    out
}

/// `delta_k` by brute force: for each support, an orthonormal basis of the
/// span of the selected frame columns from nalgebra's SVD, then the spectrum
/// of the compressed Gram matrix.
pub fn delta_oracle(phi: &MeasurementMatrix, frame: &Frame, k: usize) -> f64 {
    let d = to_na(frame.matrix());
    let ptp = {
        let a = to_na(phi.matrix());
        a.transpose() * a
    };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in subsets(frame.d(), k) {
        let cols: Vec<DVector<f64>> = s.iter().map(|&j| d.column(j).into_owned()).collect();
        let ds = DMatrix::from_columns(&cols);
        let svd = ds.clone().svd(true, false);
        let u = svd.u.unwrap();
        let smax = svd.singular_values.max();
        if smax == 0.0 {
            continue;
        }
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > 1e-10 * smax)
            .collect();
        let q = DMatrix::from_columns(&keep.iter().map(|&i| u.column(i).into_owned()).collect::<Vec<_>>());
        let g = q.transpose() * &ptp * &q;
        let g = (&g + g.transpose()) * 0.5;
        let (a, b) = eig_extremes(&g);
        lo = lo.min(a);
        hi = hi.max(b);
    }
    (hi - 1.0).max(1.0 - lo)
}

/// Solves a square system by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot falls below `1e-12` times the largest entry.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return None;
    }
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-12 * scale {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for j in c..n {
                a[r][j] -= f * a[c][j];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|j| a[r][j] * x[j]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Basic feasible solutions of `min ||x||_1 s.t. A x = y` for `A` of full
/// row rank `n`: every `n`-column basis that is nonsingular.
pub fn l1_vertices(a: &DenseMatrix, y: &[f64]) -> Vec<Vec<f64>> {
    let (n, p) = a.shape();
    let mut out = Vec::new();
    for s in subsets(p, n) {
        let m: Vec<Vec<f64>> = (0..n).map(|i| s.iter().map(|&j| a.get(i, j)).collect()).collect();
        if let Some(xs) = gauss_solve(m, y.to_vec()) {
            let mut x = vec![0.0; p];
            for (&j, v) in s.iter().zip(xs) {
                x[j] = v;
            }
            out.push(x);
        }
    }
    out
}

/// True when `beta` attains the LP optimum and every other vertex is worse
/// by more than `margin`, i.e. `beta` is the unique l1 minimizer.
pub fn is_unique_l1_minimizer(a: &DenseMatrix, y: &[f64], beta: &[f64], margin: f64) -> bool {
    let l1 = |x: &[f64]| x.iter().map(|v| v.abs()).sum::<f64>();
    let target = l1(beta);
    let vertices = l1_vertices(a, y);
    let mut found = false;
    for x in &vertices {
        let dist = x.iter().zip(beta).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        if dist <= 1e-9 {
            found = true;
        } else if l1(x) <= target + margin {
            return false;
        }
    }
    found
}

/// Analysis coefficient indices of the `k` largest magnitudes, ties to the
/// lowest index.
pub fn top_k(c: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..c.len()).collect();
    idx.sort_by(|&i, &j| c[j].abs().total_cmp(&c[i].abs()).then(i.cmp(&j)));
    idx.truncate(k);
    idx.sort();
    idx
}

/// `(| ||D^T h|| - ||h|| |, |<D D_T^T h, D D_Tc^T h> - (||D_T^T h||^2 - ||D D_T^T h||^2)|)`
pub fn frame_identities(frame: &Frame, h: &[f64], k: usize) -> (f64, f64) {
    let d = to_na(frame.matrix());
    let h = DVector::from_column_slice(h);
    let c = d.transpose() * &h;
    let t = top_k(c.as_slice(), k);
    let mut on = DVector::zeros(c.len());
    let mut off = c.clone();
    for &i in &t {
        on[i] = c[i];
        off[i] = 0.0;
    }
    let a = &d * &on;
    let b = &d * &off;
    let parseval = (c.norm() - h.norm()).abs();
    let cross = (a.dot(&b) - (on.norm_squared() - a.norm_squared())).abs();
    (parseval, cross)
}

/// Closed-form bound constants `(c0', c1', C0, C1)`.
pub fn bound_constants(delta: f64) -> (f64, f64, f64, f64) {
    let g = 2.0 / 3.0 - delta;
    let c0p = 4.0 * (1.0 + delta).sqrt() / (3.0 * g);
    let c1p = (4.0 * delta + (6.0 * delta * g).sqrt()) / (3.0 * g);
    (c0p, c1p, 2.0 * c0p, 2.0 * (c1p + 1.0))
}
