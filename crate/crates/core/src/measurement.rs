//! Sensing matrices and noisy measurements `y = Phi beta + z`, `||z||_2 <= eps`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numerics::{
    norm2, orthonormal_column_basis, read_vector_csv, write_vector_csv, DenseMatrix, SeededRng,
};

/// `n x p` sensing operator.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix(DenseMatrix);

impl MeasurementMatrix {
    pub fn new(phi: DenseMatrix) -> Result<Self> {
        if phi.rows() == 0 || phi.cols() == 0 {
            return Err(Error::invalid("measurement matrix needs n, p >= 1"));
        }
        Ok(Self(phi))
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn p(&self) -> usize {
        self.0.cols()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.0.mul_vec(x)
    }

    pub fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.0.tr_mul_vec(y)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.scaled(c))
    }
}

/// I.i.d. `N(0, 1/n)` entries, so that `E ||Phi x||^2 = ||x||^2`.
pub fn gaussian_measurement(n: usize, p: usize, rng: &mut SeededRng) -> Result<MeasurementMatrix> {
    if n == 0 || p == 0 {
        return Err(Error::invalid("measurement matrix needs n, p >= 1"));
    }
    let s = 1.0 / (n as f64).sqrt();
    MeasurementMatrix::new(rng.normal_matrix(n, p).scaled(s))
}

/// `n x p` matrix with orthonormal columns (`Phi^T Phi = I`), which makes
/// every restricted isometry constant zero. Requires `n >= p`.
pub fn orthonormal_measurement(n: usize, p: usize, rng: &mut SeededRng) -> Result<MeasurementMatrix> {
    if n < p || p == 0 {
        return Err(Error::invalid(format!(
            "orthonormal columns need n >= p >= 1, got n = {n}, p = {p}"
        )));
    }
    for _ in 0..8 {
        let g = rng.normal_matrix(n, p);
        let (q, rank) = orthonormal_column_basis(&g, 1e-8)?;
        if rank == p {
            return MeasurementMatrix::new(q);
        }
    }
    Err(Error::Numerical("no full-rank draw for orthonormal measurement".into()))
}

/// A signal together with its noisy measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalInstance {
    pub beta: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub eps: f64,
}

impl SignalInstance {
    pub fn noise_norm(&self) -> f64 {
        norm2(&self.z)
    }
}

/// Measures `beta` with noise drawn uniformly on the sphere of radius
/// `noise_fraction * eps`.
pub fn measure(
    phi: &MeasurementMatrix,
    beta: &[f64],
    eps: f64,
    noise_fraction: f64,
    rng: &mut SeededRng,
) -> Result<SignalInstance> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!("eps must be finite and >= 0, got {eps}")));
    }
    if !(0.0..=1.0).contains(&noise_fraction) {
        return Err(Error::invalid(format!(
            "noise_fraction must lie in [0, 1], got {noise_fraction}"
        )));
    }
    if beta.len() != phi.p() {
        return Err(Error::invalid(format!(
            "signal length {} does not match p = {}",
            beta.len(),
            phi.p()
        )));
    }
    let clean = phi.apply(beta)?;
    let radius = noise_fraction * eps;
    let z = if radius > 0.0 {
        sphere_point(phi.n(), radius, rng)
    } else {
        vec![0.0; phi.n()]
    };
    let y = clean.iter().zip(&z).map(|(a, b)| a + b).collect();
    Ok(SignalInstance {
        beta: beta.to_vec(),
        y,
        z,
        eps,
    })
}

fn sphere_point(n: usize, radius: f64, rng: &mut SeededRng) -> Vec<f64> {
    let g = loop {
        let g = rng.normal_vec(n);
        if norm2(&g) > 0.0 {
            break g;
        }
    };
    let s = radius / norm2(&g);
    let mut z: Vec<f64> = g.iter().map(|x| x * s).collect();
    // Rounding may land a hair outside the ball.
    while norm2(&z) > radius {
        z.iter_mut().for_each(|x| *x *= 1.0 - f64::EPSILON);
    }
    z
}

#[derive(Serialize, Deserialize)]
struct InstanceWire {
    beta: String,
    y: String,
    z: String,
    eps: f64,
}

impl Serialize for SignalInstance {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        InstanceWire {
            beta: write_vector_csv(&self.beta),
            y: write_vector_csv(&self.y),
            z: write_vector_csv(&self.z),
            eps: self.eps,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SignalInstance {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let wire = InstanceWire::deserialize(deserializer)?;
        let parse = |s: &str| read_vector_csv(s.as_bytes()).map_err(D::Error::custom);
        let inst = SignalInstance {
            beta: parse(&wire.beta)?,
            y: parse(&wire.y)?,
            z: parse(&wire.z)?,
            eps: wire.eps,
        };
        if inst.y.len() != inst.z.len() {
            return Err(D::Error::custom("y and z lengths differ"));
        }
        Ok(inst)
    }
}
