//! Normalized tight frames `D` (`p x d`, `d >= p`, `D D^T = I`) and the
//! analysis, synthesis and column-restriction operators built on them.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{polar_factor, DenseMatrix, SeededRng};

/// Maximum entrywise deviation of `D D^T` from the identity accepted for a frame.
pub const TIGHTNESS_TOL: f64 = 1e-10;

const MAX_DRAW_ATTEMPTS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    matrix: DenseMatrix,
    label: String,
}

/// Sidecar metadata stored next to a frame's CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub label: String,
    pub p: usize,
    pub d: usize,
}

impl Frame {
    /// Wraps `matrix` as a frame, rejecting anything that is not a
    /// normalized tight frame.
    pub fn new(matrix: DenseMatrix, label: impl Into<String>) -> Result<Self> {
        let (p, d) = matrix.shape();
        if p == 0 || d < p {
            return Err(Error::invalid(format!(
                "frame must satisfy d >= p >= 1, got p = {p}, d = {d}"
            )));
        }
        let residual = tightness_residual(&matrix);
        if residual > TIGHTNESS_TOL {
            return Err(Error::invalid(format!(
                "D D^T deviates from the identity by {residual:e}"
            )));
        }
        Ok(Self {
            matrix,
            label: label.into(),
        })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Signal dimension.
    pub fn p(&self) -> usize {
        self.matrix.rows()
    }

    /// Number of frame vectors.
    pub fn d(&self) -> usize {
        self.matrix.cols()
    }

    pub fn meta(&self) -> FrameMeta {
        FrameMeta {
            label: self.label.clone(),
            p: self.p(),
            d: self.d(),
        }
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.matrix.column(i)
    }

    /// `D^T x`: the frame coefficients `<D_i, x>`.
    pub fn analysis(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.p() {
            return Err(Error::invalid(format!(
                "analysis expects length {}, got {}",
                self.p(),
                x.len()
            )));
        }
        self.matrix.tr_mul_vec(x)
    }

    /// `D v`
    pub fn synthesis(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.d() {
            return Err(Error::invalid(format!(
                "synthesis expects length {}, got {}",
                self.d(),
                v.len()
            )));
        }
        self.matrix.mul_vec(v)
    }

    /// `D_S`: the `p x d` matrix equal to `D` on the columns of `support`
    /// and zero elsewhere.
    pub fn restrict_columns(&self, support: &SupportSet) -> Result<DenseMatrix> {
        if support.ambient() != self.d() {
            return Err(Error::invalid(format!(
                "support over {} indices used with a frame of {} columns",
                support.ambient(),
                self.d()
            )));
        }
        let mut keep = vec![false; self.d()];
        for &i in support.indices() {
            keep[i] = true;
        }
        Ok(DenseMatrix::from_fn(self.p(), self.d(), |i, j| {
            if keep[j] {
                self.matrix.get(i, j)
            } else {
                0.0
            }
        }))
    }
}

/// `max |D D^T - I|`
pub fn tightness_residual(d: &DenseMatrix) -> f64 {
    d.outer_gram().max_abs_diff(&DenseMatrix::identity(d.rows()))
}

/// The identity frame `D = I_p`, under which D-RIP reduces to classical RIP.
pub fn identity_frame(p: usize) -> Result<Frame> {
    if p == 0 {
        return Err(Error::invalid("identity frame needs p >= 1"));
    }
    Frame::new(DenseMatrix::identity(p), "identity")
}

/// Orthonormal-row factor of a `p x d` standard normal draw.
pub fn random_tight_frame(p: usize, d: usize, rng: &mut SeededRng) -> Result<Frame> {
    if p == 0 || d < p {
        return Err(Error::invalid(format!(
            "random tight frame needs d >= p >= 1, got p = {p}, d = {d}"
        )));
    }
    for _ in 0..MAX_DRAW_ATTEMPTS {
        let g = rng.normal_matrix(p, d);
        match polar_factor(&g, 1e-8) {
            Ok(u) => return Frame::new(u, "random_tight"),
            Err(Error::Numerical(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Numerical(format!(
        "no full-rank draw in {MAX_DRAW_ATTEMPTS} attempts"
    )))
}

/// The 2 x 3 "Mercedes-Benz" frame: three unit directions 120 degrees apart,
/// scaled by `sqrt(2/3)`.
pub fn mercedes_benz_frame() -> Frame {
    let s = (2.0f64 / 3.0).sqrt();
    let h = 3.0f64.sqrt() / 2.0;
    let m = DenseMatrix::from_rows(&[
        vec![s, -0.5 * s, -0.5 * s],
        vec![0.0, s * h, -s * h],
    ])
    .expect("finite constants");
    Frame::new(m, "mercedes_benz").expect("Mercedes-Benz frame is tight")
}

/// Ordered set of distinct column indices (0-based) drawn from `0..d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportSet {
    indices: Vec<usize>,
    d: usize,
}

impl SupportSet {
    pub fn new(mut indices: Vec<usize>, d: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("support indices must be distinct"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= d) {
            return Err(Error::invalid(format!(
                "support index {bad} out of range for d = {d}"
            )));
        }
        Ok(Self { indices, d })
    }

    pub fn full(d: usize) -> Self {
        Self {
            indices: (0..d).collect(),
            d,
        }
    }

    pub fn empty(d: usize) -> Self {
        Self {
            indices: Vec::new(),
            d,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn ambient(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn complement(&self) -> Self {
        Self {
            indices: (0..self.d).filter(|&i| !self.contains(i)).collect(),
            d: self.d,
        }
    }

    /// Copy of `v` with entries outside the support set to zero.
    pub fn mask(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(i, &x)| if self.contains(i) { x } else { 0.0 })
            .collect()
    }
}

/// Indices of the `k` largest-magnitude entries; ties go to the lower index.
pub fn top_k_support(coeffs: &[f64], k: usize) -> Result<SupportSet> {
    let d = coeffs.len();
    if k == 0 || k > d {
        return Err(Error::invalid(format!("need 1 <= k <= {d}, got k = {k}")));
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| match coeffs[b].abs().total_cmp(&coeffs[a].abs()) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    order.truncate(k);
    SupportSet::new(order, d)
}
