//! Reconstruction-error bound for l1-analysis recovery under `delta_2k < 2/3`:
//!
//! `||beta - beta_hat||_2 <= C0 eps + C1 ||D^T beta - (D^T beta)_max(k)||_1 / sqrt(k)`
//!
//! with `C0 = 2 C0'`, `C1 = 2 (C1' + 1)` and, writing `g = 2/3 - delta`,
//!
//! * `C0' = 4 sqrt(1 + delta) / (3 g)`
//! * `C1' = (4 delta + sqrt(6 delta g)) / (3 g)`

use serde::{Deserialize, Serialize};

use crate::drip::{CertificateMethod, DripCertificate, DELTA_2K_THRESHOLD};
use crate::error::{Error, Result};
use crate::frames::{top_k_support, Frame};
use crate::measurement::SignalInstance;
use crate::numerics::{norm2, sub};
use crate::solver::RecoveryResult;

pub const DEFAULT_CHECK_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub delta: f64,
    pub c0_prime: f64,
    pub c1_prime: f64,
    pub c0: f64,
    pub c1: f64,
}

pub fn constants(delta: f64) -> Result<BoundConstants> {
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::invalid(format!("delta must be >= 0, got {delta}")));
    }
    if delta >= DELTA_2K_THRESHOLD {
        return Err(Error::OutOfDomain(delta));
    }
    let gap = DELTA_2K_THRESHOLD - delta;
    let c0_prime = 4.0 * (1.0 + delta).sqrt() / (3.0 * gap);
    let c1_prime = (4.0 * delta + (6.0 * delta * gap).sqrt()) / (3.0 * gap);
    Ok(BoundConstants {
        delta,
        c0_prime,
        c1_prime,
        c0: 2.0 * c0_prime,
        c1: 2.0 * (c1_prime + 1.0),
    })
}

/// l1 mass of the analysis coefficients `D^T beta` outside the `k` largest
/// in magnitude (ties resolved as in [`top_k_support`]).
pub fn tail_l1(frame: &Frame, beta: &[f64], k: usize) -> Result<f64> {
    let coeffs = frame.analysis(beta)?;
    let top = top_k_support(&coeffs, k)?;
    Ok(coeffs
        .iter()
        .enumerate()
        .filter(|(i, _)| !top.contains(*i))
        .map(|(_, c)| c.abs())
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheck {
    pub delta: f64,
    pub c0: f64,
    pub c1: f64,
    pub tail: f64,
    pub eps: f64,
    pub k: usize,
    /// `||beta - beta_hat||_2`
    pub measured_error: f64,
    /// `C0 eps + C1 tail / sqrt(k)`
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
}

/// Evaluates both sides of the bound for a converged recovery.
///
/// `cert` must be an exact certificate for sparsity `2k` with
/// `delta < 2/3`. On such inputs `holds` is false only if the solver or the
/// certificate is wrong.
pub fn theorem_check(
    inst: &SignalInstance,
    result: &RecoveryResult,
    cert: &DripCertificate,
    frame: &Frame,
    k: usize,
    check_tol: f64,
) -> Result<TheoremCheck> {
    if cert.k != 2 * k {
        return Err(Error::invalid(format!(
            "certificate is for sparsity {}, the bound needs delta_{}",
            cert.k,
            2 * k
        )));
    }
    if cert.method != CertificateMethod::Exact {
        return Err(Error::invalid("the bound needs an exact certificate"));
    }
    if !result.converged {
        return Err(Error::invalid("recovery did not converge"));
    }
    if result.gamma_hat.len() != inst.beta.len() {
        return Err(Error::invalid("recovered signal and true signal differ in length"));
    }
    let c = constants(cert.delta).map_err(|e| match e {
        Error::OutOfDomain(d) => Error::invalid(format!("certified delta_2k = {d} is not below 2/3")),
        other => other,
    })?;
    let tail = tail_l1(frame, &inst.beta, k)?;
    let measured_error = norm2(&sub(&inst.beta, &result.gamma_hat));
    let rhs = c.c0 * inst.eps + c.c1 * tail / (k as f64).sqrt();
    let margin = rhs - measured_error;
    Ok(TheoremCheck {
        delta: cert.delta,
        c0: c.c0,
        c1: c.c1,
        tail,
        eps: inst.eps,
        k,
        measured_error,
        rhs,
        margin,
        holds: margin >= -check_tol,
    })
}
