//! Dictionary-restricted isometry constants.
//!
//! `delta_k` is the smallest constant with
//! `(1 - delta_k) ||D v||^2 <= ||Phi D v||^2 <= (1 + delta_k) ||D v||^2`
//! for every k-sparse `v`. On a support `S` the ratio ranges over the
//! Rayleigh quotients of `Q^T Phi^T Phi Q`, where `Q` is an orthonormal basis
//! of the column space of `D_S`; directions with `D_S v = 0` satisfy the
//! inequality trivially and are dropped by the rank cutoff.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::Frame;
use crate::measurement::MeasurementMatrix;
use crate::numerics::{
    norm2, orthonormal_column_basis, symmetric_eig_extremes, DenseMatrix, SeededRng,
    DEFAULT_RANK_TOL,
};

pub const DEFAULT_ENUMERATION_BUDGET: u64 = 1_000_000;

/// Threshold on `delta_2k` below which the reconstruction bound applies.
pub const DELTA_2K_THRESHOLD: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateMethod {
    Exact,
    LowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DripCertificate {
    pub k: usize,
    pub delta: f64,
    pub method: CertificateMethod,
    pub supports_examined: u64,
    pub samples: u64,
    pub rank_tol: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct EnumerationOptions {
    pub rank_tol: f64,
    pub budget: u64,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self {
            rank_tol: DEFAULT_RANK_TOL,
            budget: DEFAULT_ENUMERATION_BUDGET,
        }
    }
}

/// Extreme restricted eigenvalues over all supports of one size.
///
/// Supports whose restricted frame has rank zero do not contribute; if none
/// contribute both extremes stay at 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestrictedSpectrum {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub supports_examined: u64,
}

impl RestrictedSpectrum {
    pub fn delta(&self) -> f64 {
        deviation(self.lambda_min, self.lambda_max)
    }

    /// `delta` for `c * Phi`, computed from the same eigen data.
    pub fn delta_scaled(&self, c: f64) -> f64 {
        deviation(c * c * self.lambda_min, c * c * self.lambda_max)
    }
}

fn deviation(lambda_min: f64, lambda_max: f64) -> f64 {
    (lambda_max - 1.0).max(1.0 - lambda_min).max(0.0)
}

/// `C(n, k)` saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// The `rank`-th k-subset of `0..n` in lexicographic order.
fn unrank_combination(n: usize, k: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for slot in 0..k {
        let remaining = k - slot - 1;
        let mut i = start;
        loop {
            let block = binomial(n - i - 1, remaining);
            if rank < block {
                break;
            }
            rank -= block;
            i += 1;
        }
        out.push(i);
        start = i + 1;
    }
    out
}

fn check_budget(d: usize, k: usize, budget: u64) -> Result<u128> {
    if k == 0 || k > d {
        return Err(Error::invalid(format!("need 1 <= k <= d = {d}, got k = {k}")));
    }
    let count = binomial(d, k);
    if count > budget as u128 {
        return Err(Error::BudgetExceeded { d, k, count, budget });
    }
    Ok(count)
}

fn check_dims(phi: &MeasurementMatrix, frame: &Frame) -> Result<()> {
    if phi.p() != frame.p() {
        return Err(Error::invalid(format!(
            "measurement matrix has p = {}, frame has p = {}",
            phi.p(),
            frame.p()
        )));
    }
    Ok(())
}

/// Extreme eigenvalues of `Q^T Phi^T Phi Q` for one support, or `None` when
/// `D_S` has rank zero.
fn support_extremes(
    phi: &DenseMatrix,
    frame: &DenseMatrix,
    support: &[usize],
    rank_tol: f64,
) -> Result<Option<(f64, f64)>> {
    let ds = frame.select_columns(support);
    let (q, rank) = orthonormal_column_basis(&ds, rank_tol)?;
    if rank == 0 {
        return Ok(None);
    }
    let gram = phi.matmul(&q)?.gram();
    symmetric_eig_extremes(&gram).map(Some)
}

/// Scans every k-subset of columns and returns the extreme restricted
/// eigenvalues. The scan is split across threads; min/max reductions make
/// the result independent of the split.
pub fn restricted_spectrum(
    phi: &MeasurementMatrix,
    frame: &Frame,
    k: usize,
    opts: &EnumerationOptions,
) -> Result<RestrictedSpectrum> {
    check_dims(phi, frame)?;
    if !(opts.rank_tol > 0.0) {
        return Err(Error::invalid("rank_tol must be positive"));
    }
    let d = frame.d();
    let count = check_budget(d, k, opts.budget)?;
    let phi_m = phi.matrix();
    let frame_m = frame.matrix();

    let (lo, hi) = (0..count as u64)
        .into_par_iter()
        .map(|r| {
            let s = unrank_combination(d, k, r as u128);
            support_extremes(phi_m, frame_m, &s, opts.rank_tol)
        })
        .try_fold(
            || (1.0f64, 1.0f64),
            |(lo, hi), ext| {
                ext.map(|e| match e {
                    Some((a, b)) => (lo.min(a), hi.max(b)),
                    None => (lo, hi),
                })
            },
        )
        .try_reduce(|| (1.0, 1.0), |a, b| Ok((a.0.min(b.0), a.1.max(b.1))))?;

    Ok(RestrictedSpectrum {
        lambda_min: lo,
        lambda_max: hi,
        supports_examined: count as u64,
    })
}

/// Exact `delta_k` by enumeration of all `C(d, k)` supports.
pub fn delta_exact(
    phi: &MeasurementMatrix,
    frame: &Frame,
    k: usize,
    opts: &EnumerationOptions,
) -> Result<DripCertificate> {
    let spec = restricted_spectrum(phi, frame, k, opts)?;
    Ok(DripCertificate {
        k,
        delta: spec.delta(),
        method: CertificateMethod::Exact,
        supports_examined: spec.supports_examined,
        samples: 0,
        rank_tol: opts.rank_tol,
    })
}

/// Monte-Carlo lower bound on `delta_k`: the largest observed
/// `| ||Phi D v||^2 / ||D v||^2 - 1 |` over random k-sparse `v` with a
/// uniform support and standard normal entries. Draws with
/// `||D v|| <= rank_tol` are skipped.
pub fn delta_lower_mc(
    phi: &MeasurementMatrix,
    frame: &Frame,
    k: usize,
    samples: u64,
    rng: &mut SeededRng,
) -> Result<DripCertificate> {
    check_dims(phi, frame)?;
    let d = frame.d();
    if k == 0 || k > d {
        return Err(Error::invalid(format!("need 1 <= k <= d = {d}, got k = {k}")));
    }
    if samples == 0 {
        return Err(Error::invalid("samples must be >= 1"));
    }
    let rank_tol = DEFAULT_RANK_TOL;
    let dm = frame.matrix();
    let mut delta = 0.0f64;
    let mut dv = vec![0.0; frame.p()];
    for _ in 0..samples {
        let support = rng.subset(d, k);
        dv.iter_mut().for_each(|x| *x = 0.0);
        for &j in &support {
            let c = rng.standard_normal();
            for (i, x) in dv.iter_mut().enumerate() {
                *x += c * dm.get(i, j);
            }
        }
        let den = norm2(&dv);
        if den <= rank_tol {
            continue;
        }
        let num = norm2(&phi.apply(&dv)?);
        let ratio = (num / den).powi(2);
        delta = delta.max((ratio - 1.0).abs());
    }
    Ok(DripCertificate {
        k,
        delta,
        method: CertificateMethod::LowerBound,
        supports_examined: 0,
        samples,
        rank_tol,
    })
}

/// Classical RIP constant of `Phi` (identity dictionary), computed directly
/// from the column slices `Phi_S^T Phi_S` without any basis extraction.
pub fn classical_rip_constant(phi: &MeasurementMatrix, k: usize, budget: u64) -> Result<f64> {
    let p = phi.p();
    let count = check_budget(p, k, budget)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in 0..count {
        let s = unrank_combination(p, k, r);
        let g = phi.matrix().select_columns(&s).gram();
        let (a, b) = symmetric_eig_extremes(&g)?;
        lo = lo.min(a);
        hi = hi.max(b);
    }
    Ok(deviation(lo, hi))
}

/// Whether a certificate establishes `delta_2k < 2/3`.
///
/// An exact certificate decides the question. A lower bound at or above 2/3
/// refutes it; a lower bound below 2/3 is reported as
/// [`Error::Indeterminate`].
pub fn theorem_hypothesis_holds(cert: &DripCertificate) -> Result<bool> {
    match cert.method {
        CertificateMethod::Exact => Ok(cert.delta < DELTA_2K_THRESHOLD),
        CertificateMethod::LowerBound if cert.delta >= DELTA_2K_THRESHOLD => Ok(false),
        CertificateMethod::LowerBound => Err(Error::Indeterminate(cert.delta)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{identity_frame, mercedes_benz_frame, random_tight_frame};
    use crate::measurement::{gaussian_measurement, orthonormal_measurement};

    fn cert(delta: f64, method: CertificateMethod) -> DripCertificate {
        DripCertificate {
            k: 2,
            delta,
            method,
            supports_examined: 0,
            samples: 0,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 4), 210);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(60, 30), 118264581564861424);
    }

    #[test]
    fn unranking_is_lexicographic() {
        let all: Vec<Vec<usize>> = (0..binomial(5, 3)).map(|r| unrank_combination(5, 3, r)).collect();
        assert_eq!(all.first().unwrap(), &vec![0, 1, 2]);
        assert_eq!(all.last().unwrap(), &vec![2, 3, 4]);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(all.len(), 10);
    }

    #[test]
    fn isometry_gives_zero() {
        let mut rng = SeededRng::new(4);
        let phi = orthonormal_measurement(7, 5, &mut rng).unwrap();
        let frame = random_tight_frame(5, 7, &mut rng).unwrap();
        for k in 1..=3 {
            let c = delta_exact(&phi, &frame, k, &Default::default()).unwrap();
            assert!(c.delta < 1e-12, "k = {k}: {}", c.delta);
            assert_eq!(c.supports_examined, binomial(7, k) as u64);
            let mc = delta_lower_mc(&phi, &frame, k, 500, &mut rng).unwrap();
            assert!(mc.delta < 1e-12);
        }
    }

    #[test]
    fn scaled_identity() {
        let phi = MeasurementMatrix::new(DenseMatrix::identity(4).scaled(2.0)).unwrap();
        let c = delta_exact(&phi, &identity_frame(4).unwrap(), 2, &Default::default()).unwrap();
        assert!((c.delta - 3.0).abs() < 1e-12);
        let phi = MeasurementMatrix::new(DenseMatrix::identity(2).scaled(0.5)).unwrap();
        let c = delta_exact(&phi, &mercedes_benz_frame(), 1, &Default::default()).unwrap();
        assert!((c.delta - 0.75).abs() < 1e-12);
    }

    #[test]
    fn budget_and_range_errors() {
        let mut rng = SeededRng::new(1);
        let phi = gaussian_measurement(4, 20, &mut rng).unwrap();
        let frame = identity_frame(20).unwrap();
        let opts = EnumerationOptions {
            budget: 100,
            ..Default::default()
        };
        match delta_exact(&phi, &frame, 3, &opts) {
            Err(Error::BudgetExceeded { count, .. }) => assert_eq!(count, 1140),
            other => panic!("expected budget refusal, got {other:?}"),
        }
        assert!(matches!(
            delta_exact(&phi, &frame, 21, &Default::default()),
            Err(Error::InvalidInput(_))
        ));
        let msg = delta_exact(&phi, &frame, 3, &opts).unwrap_err().to_string();
        assert!(msg.contains("C(20, 3) = 1140"), "{msg}");
    }

    #[test]
    fn rank_deficient_support_of_redundant_frame() {
        // Two identical (scaled) columns: D_S has rank one for S = {0, 1}.
        let s = 0.5f64.sqrt();
        let m = DenseMatrix::from_rows(&[vec![s, s, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let frame = Frame::new(m, "dup").unwrap();
        let phi = MeasurementMatrix::new(DenseMatrix::diag(&[1.5, 1.0])).unwrap();
        let spec = restricted_spectrum(&phi, &frame, 2, &Default::default()).unwrap();
        assert!((spec.lambda_max - 2.25).abs() < 1e-12);
        assert!((spec.lambda_min - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hypothesis_decisions() {
        use CertificateMethod::*;
        assert!(theorem_hypothesis_holds(&cert(0.0, Exact)).unwrap());
        assert!(!theorem_hypothesis_holds(&cert(0.6667, Exact)).unwrap());
        assert!(!theorem_hypothesis_holds(&cert(0.70, LowerBound)).unwrap());
        assert!(matches!(
            theorem_hypothesis_holds(&cert(0.1, LowerBound)),
            Err(Error::Indeterminate(_))
        ));
    }

    #[test]
    fn mc_running_max_is_monotone() {
        let mut rng = SeededRng::new(12);
        let phi = gaussian_measurement(5, 6, &mut rng).unwrap();
        let frame = random_tight_frame(6, 8, &mut rng).unwrap();
        let mut last = 0.0;
        for samples in [1u64, 10, 100, 1000, 10_000] {
            let c = delta_lower_mc(&phi, &frame, 2, samples, &mut SeededRng::new(3)).unwrap();
            assert!(c.delta >= last);
            last = c.delta;
        }
    }

    #[test]
    fn monotone_in_k() {
        let mut rng = SeededRng::new(6);
        let phi = gaussian_measurement(6, 6, &mut rng).unwrap();
        let frame = random_tight_frame(6, 8, &mut rng).unwrap();
        let mut last = 0.0;
        for k in 1..=8 {
            let c = delta_exact(&phi, &frame, k, &Default::default()).unwrap();
            assert!(c.delta + 1e-12 >= last, "k = {k}");
            last = c.delta;
        }
    }

    #[test]
    fn scale_covariance() {
        let mut rng = SeededRng::new(13);
        let phi = gaussian_measurement(5, 6, &mut rng).unwrap();
        let frame = random_tight_frame(6, 7, &mut rng).unwrap();
        let spec = restricted_spectrum(&phi, &frame, 2, &Default::default()).unwrap();
        for c in [0.3, 0.9, 1.7] {
            let scaled = delta_exact(&phi.scaled(c), &frame, 2, &Default::default()).unwrap();
            assert!((scaled.delta - spec.delta_scaled(c)).abs() < 1e-9);
        }
    }

    #[test]
    fn certificate_json_fields() {
        let v = serde_json::to_value(cert(0.25, CertificateMethod::LowerBound)).unwrap();
        let obj = v.as_object().unwrap();
        let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(keys, ["delta", "k", "method", "rank_tol", "samples", "supports_examined"]);
        assert_eq!(obj["method"], "lower_bound");
    }
}
