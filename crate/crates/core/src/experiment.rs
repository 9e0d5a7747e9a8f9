//! End-to-end trials and the self-test suite behind the command-line tool.
//!
//! A trial builds a frame, draws a sensing matrix and a signal
//! `beta = D v` with k-sparse `v`, measures it, certifies `delta_2k`
//! exactly, solves the l1-analysis program and evaluates the error bound.
//! Every trial derives its own generator from `(seed, trial index)`, so
//! trials can run on any number of threads and still produce identical
//! records in trial order.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{constants, tail_l1, theorem_check, TheoremCheck, DEFAULT_CHECK_TOL};
use crate::decompose::{convex_k_sparse_decompose, validate_decomposition, CheckLine};
use crate::drip::{
    binomial, classical_rip_constant, delta_exact, delta_lower_mc, DripCertificate,
    EnumerationOptions, DEFAULT_ENUMERATION_BUDGET, DELTA_2K_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::frames::{
    identity_frame, mercedes_benz_frame, random_tight_frame, top_k_support, Frame,
};
use crate::measurement::{gaussian_measurement, measure, orthonormal_measurement, MeasurementMatrix};
use crate::numerics::{dot, norm1, norm2, norm_inf, sub, SeededRng, DEFAULT_RANK_TOL};
use crate::solver::{check_optimality_witness, solve_l1_analysis, SolverConfig};

pub const SCHEMA: &str = "dripcs.experiment/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    Identity,
    MercedesBenz,
    RandomTight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiKind {
    Gaussian,
    /// Orthonormal columns; every restricted isometry constant is zero.
    Orthonormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub p: usize,
    pub d: usize,
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub frame_kind: FrameKind,
    pub phi_kind: PhiKind,
    pub noise_fraction: f64,
    pub trials: usize,
    pub seed: u64,
    pub solver: SolverConfig,
    pub enumeration_budget: u64,
    /// Adds wall-clock times to the records, which makes output vary
    /// between runs.
    #[serde(default)]
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            p: 8,
            d: 8,
            n: 8,
            k: 1,
            eps: 0.0,
            frame_kind: FrameKind::Identity,
            phi_kind: PhiKind::Gaussian,
            noise_fraction: 1.0,
            trials: 20,
            seed: 1,
            solver: SolverConfig::default(),
            enumeration_budget: DEFAULT_ENUMERATION_BUDGET,
            record_timing: false,
        }
    }
}

impl ExperimentConfig {
    /// Checks the shape constraints; budget refusal is reported separately
    /// as [`Error::BudgetExceeded`].
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.p == 0 || self.n == 0 || self.k == 0 {
            return bad("p, n and k must be >= 1".into());
        }
        if self.d < self.p {
            return bad(format!("need d >= p, got p = {}, d = {}", self.p, self.d));
        }
        if 2 * self.k > self.d {
            return bad(format!("need 2k <= d, got k = {}, d = {}", self.k, self.d));
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return bad(format!("eps must be finite and >= 0, got {}", self.eps));
        }
        if !(0.0..=1.0).contains(&self.noise_fraction) {
            return bad(format!("noise_fraction must lie in [0, 1], got {}", self.noise_fraction));
        }
        match self.frame_kind {
            FrameKind::Identity if self.d != self.p => {
                return bad("identity frame needs d = p".into());
            }
            FrameKind::MercedesBenz if (self.p, self.d) != (2, 3) => {
                return bad("Mercedes-Benz frame needs p = 2, d = 3".into());
            }
            _ => {}
        }
        if self.phi_kind == PhiKind::Orthonormal && self.n < self.p {
            return bad("orthonormal measurement needs n >= p".into());
        }
        self.solver.validate()
    }

    pub fn check_budget(&self) -> Result<()> {
        let count = binomial(self.d, 2 * self.k);
        if count > self.enumeration_budget as u128 {
            return Err(Error::BudgetExceeded {
                d: self.d,
                k: 2 * self.k,
                count,
                budget: self.enumeration_budget,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    /// Hypothesis certified and solver converged; the bound was evaluated.
    Checked,
    HypothesisFailed,
    NotConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryDiagnostics {
    pub converged: bool,
    pub iters_used: usize,
    pub objective: f64,
    pub true_objective: f64,
    pub feas_residual: f64,
    pub residual: f64,
    pub error: f64,
    /// Objective no larger than that of the true signal (within 1e-6).
    pub witness_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub schema: String,
    pub config: ExperimentConfig,
    pub trial: usize,
    pub trial_seed: u64,
    pub certificate: DripCertificate,
    pub certificate_exact: bool,
    pub hypothesis_holds: bool,
    pub tail: f64,
    pub recovery: RecoveryDiagnostics,
    pub theorem: Option<TheoremCheck>,
    pub status: TrialStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

fn trial_seed(seed: u64, trial: usize) -> u64 {
    SeededRng::derive(seed, trial as u64).next_u64()
}

fn build_frame(cfg: &ExperimentConfig, rng: &mut SeededRng) -> Result<Frame> {
    match cfg.frame_kind {
        FrameKind::Identity => identity_frame(cfg.p),
        FrameKind::MercedesBenz => Ok(mercedes_benz_frame()),
        FrameKind::RandomTight => random_tight_frame(cfg.p, cfg.d, rng),
    }
}

fn build_phi(cfg: &ExperimentConfig, rng: &mut SeededRng) -> Result<MeasurementMatrix> {
    match cfg.phi_kind {
        PhiKind::Gaussian => gaussian_measurement(cfg.n, cfg.p, rng),
        PhiKind::Orthonormal => orthonormal_measurement(cfg.n, cfg.p, rng),
    }
}

fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<ExperimentRecord> {
    let start = Instant::now();
    let seed = trial_seed(cfg.seed, trial);
    let mut rng = SeededRng::new(seed);

    let frame = build_frame(cfg, &mut rng)?;
    let phi = build_phi(cfg, &mut rng)?;
    let mut coeffs = vec![0.0; cfg.d];
    for i in rng.subset(cfg.d, cfg.k) {
        coeffs[i] = rng.standard_normal();
    }
    let beta = frame.synthesis(&coeffs)?;
    let inst = measure(&phi, &beta, cfg.eps, cfg.noise_fraction, &mut rng)?;

    let opts = EnumerationOptions {
        rank_tol: DEFAULT_RANK_TOL,
        budget: cfg.enumeration_budget,
    };
    let cert = delta_exact(&phi, &frame, 2 * cfg.k, &opts)?;
    let hypothesis_holds = cert.delta < DELTA_2K_THRESHOLD;

    let result = solve_l1_analysis(&phi, &frame, &inst.y, inst.eps, &cfg.solver)?;
    let true_objective = norm1(&frame.analysis(&beta)?);
    let witness_ok = check_optimality_witness(&result, &beta, &frame, &phi, &inst.y, inst.eps, 1e-6)?;
    let tail = tail_l1(&frame, &beta, cfg.k)?;

    let (theorem, status) = if !hypothesis_holds {
        (None, TrialStatus::HypothesisFailed)
    } else if !result.converged {
        (None, TrialStatus::NotConverged)
    } else {
        let check = theorem_check(&inst, &result, &cert, &frame, cfg.k, DEFAULT_CHECK_TOL)?;
        (Some(check), TrialStatus::Checked)
    };

    Ok(ExperimentRecord {
        schema: SCHEMA.to_string(),
        config: cfg.clone(),
        trial,
        trial_seed: seed,
        certificate_exact: true,
        certificate: cert,
        hypothesis_holds,
        tail,
        recovery: RecoveryDiagnostics {
            converged: result.converged,
            iters_used: result.iters_used,
            objective: result.objective,
            true_objective,
            feas_residual: result.feas_residual,
            residual: result.residual,
            error: norm2(&sub(&beta, &result.gamma_hat)),
            witness_ok,
        },
        theorem,
        status,
        wall_time_ms: cfg
            .record_timing
            .then(|| start.elapsed().as_secs_f64() * 1e3),
    })
}

/// Runs all trials of `cfg`; records come back in trial order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    cfg.check_budget()?;
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, t))
        .collect()
}

/// One JSON object per line.
pub fn records_to_jsonl(records: &[ExperimentRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Summary table with columns
/// `seed,delta2k,eps,tail,lhs,rhs,margin,holds`; the last three are empty
/// for trials where the bound was not evaluated.
pub fn records_to_csv(records: &[ExperimentRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["seed", "delta2k", "eps", "tail", "lhs", "rhs", "margin", "holds"])?;
    for r in records {
        let (rhs, margin, holds) = match &r.theorem {
            Some(t) => (t.rhs.to_string(), t.margin.to_string(), t.holds.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        w.write_record([
            r.trial_seed.to_string(),
            r.certificate.delta.to_string(),
            r.config.eps.to_string(),
            r.tail.to_string(),
            r.recovery.error.to_string(),
            rhs,
            margin,
            holds,
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, Copy)]
pub struct SelftestOptions {
    pub seed: u64,
    /// Flips the sign of the cross term in the frame identity check, which
    /// must make the suite fail.
    pub inject_fault: bool,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self {
            seed: 2024,
            inject_fault: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestReport {
    pub checks: Vec<CheckLine>,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{} {:<32} residual={:.3e} tol={:.1e}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.residual,
                c.tolerance
            ));
        }
        out
    }
}

/// Parseval residual and the cross-term identity residual
/// `<D D_T^T h, D D_{T^c}^T h> - (||D_T^T h||^2 - ||D D_T^T h||^2)`
/// for one frame, signal and `k`.
pub fn frame_identity_residuals(frame: &Frame, h: &[f64], k: usize, flip: bool) -> Result<(f64, f64)> {
    let coeffs = frame.analysis(h)?;
    let parseval = (norm2(&coeffs) - norm2(h)).abs() / norm2(h).max(f64::MIN_POSITIVE);
    let t = top_k_support(&coeffs, k)?;
    let on_t = frame.restrict_columns(&t)?.tr_mul_vec(h)?;
    let off_t = frame.restrict_columns(&t.complement())?.tr_mul_vec(h)?;
    let a = frame.synthesis(&on_t)?;
    let b = frame.synthesis(&off_t)?;
    let mut lhs = dot(&a, &b);
    if flip {
        lhs = -lhs;
    }
    let rhs = dot(&on_t, &on_t) - dot(&a, &a);
    Ok((parseval, (lhs - rhs).abs()))
}

pub fn run_selftest(opts: &SelftestOptions) -> Result<SelftestReport> {
    let mut rng = SeededRng::new(opts.seed);
    let mut checks = Vec::new();

    // Frame identities across all constructors.
    let mut parseval = 0.0f64;
    let mut cross = 0.0f64;
    for i in 0..60 {
        let frame = match i % 3 {
            0 => identity_frame(1 + rng.below(6))?,
            1 => mercedes_benz_frame(),
            _ => {
                let p = 1 + rng.below(6);
                random_tight_frame(p, p + rng.below(5), &mut rng)?
            }
        };
        let h = rng.normal_vec(frame.p());
        let k = 1 + rng.below(frame.d());
        let (a, b) = frame_identity_residuals(&frame, &h, k, opts.inject_fault)?;
        parseval = parseval.max(a);
        cross = cross.max(b);
    }
    checks.push(CheckLine::new("frame.parseval", parseval, 1e-10));
    checks.push(CheckLine::new("frame.cross_term_identity", cross, 1e-9));

    // Decomposition round trips.
    let mut worst = 0.0f64;
    let mut failed = 0usize;
    for _ in 0..100 {
        let n = 1 + rng.below(12);
        let k = 1 + rng.below(n);
        let v = rng.normal_vec(n);
        let cap = norm1(&v).max(k as f64 * norm_inf(&v));
        let dec = convex_k_sparse_decompose(&v, k, cap)?;
        let report = validate_decomposition(&v, &dec, 1e-10);
        if !report.all_passed() {
            failed += 1;
        }
        for c in &report.checks {
            worst = worst.max(c.residual);
        }
    }
    checks.push(CheckLine::new("decompose.round_trip_failures", failed as f64, 0.0));
    checks.push(CheckLine::new("decompose.max_residual", worst, 1e-10));

    // Identity frame: D-RIP equals classical RIP.
    let mut gap = 0.0f64;
    for _ in 0..10 {
        let p = 2 + rng.below(7);
        let n = 1 + rng.below(8);
        let k = 1 + rng.below(p.min(3));
        let phi = gaussian_measurement(n, p, &mut rng)?;
        let frame = identity_frame(p)?;
        let cert = delta_exact(&phi, &frame, k, &EnumerationOptions::default())?;
        let classical = classical_rip_constant(&phi, k, DEFAULT_ENUMERATION_BUDGET)?;
        gap = gap.max((cert.delta - classical).abs());
    }
    checks.push(CheckLine::new("drip.rip_reduction", gap, 1e-10));

    // Sampling never exceeds the exact constant.
    let mut excess = 0.0f64;
    for _ in 0..5 {
        let p = 3 + rng.below(4);
        let phi = gaussian_measurement(p, p, &mut rng)?;
        let frame = random_tight_frame(p, p + 2, &mut rng)?;
        let exact = delta_exact(&phi, &frame, 2, &EnumerationOptions::default())?;
        let mc = delta_lower_mc(&phi, &frame, 2, 2000, &mut rng)?;
        excess = excess.max(mc.delta - exact.delta);
    }
    checks.push(CheckLine::new("drip.sampling_soundness", excess.max(0.0), 1e-9));

    // Constant spot values.
    let c = constants(0.0)?;
    let zero_err = [c.c0_prime - 2.0, c.c1_prime, c.c0 - 4.0, c.c1 - 2.0]
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    checks.push(CheckLine::new("bounds.constants_at_zero", zero_err, 1e-15));
    let third = (constants(1.0 / 3.0)?.c0_prime - 8.0 / 3f64.sqrt()).abs();
    checks.push(CheckLine::new("bounds.constants_at_one_third", third, 1e-13));
    let refused = matches!(constants(2.0 / 3.0), Err(Error::OutOfDomain(_)));
    checks.push(CheckLine::new(
        "bounds.threshold_refused",
        if refused { 0.0 } else { 1.0 },
        0.0,
    ));

    Ok(SelftestReport { checks })
}
