//! l1-preserving convex decomposition of a vector into k-sparse atoms.
//!
//! Given `v` with `||v||_1 <= C` and `||v||_inf <= C/k`, produce k-sparse
//! `w_t` with `||w_t||_1 = ||v||_1`, `||w_t||_inf <= C/k`, and convex weights
//! `x_t` with `v = sum_t x_t w_t`.
//!
//! The construction shifts mass between two unpinned nonzero coordinates
//! along `v + t (sign(v_i) e_i - sign(v_j) e_j)`, which keeps the l1 norm
//! fixed. Both endpoints of the admissible segment pin one more coordinate
//! (at 0 or at `C/k`), and `v` is the convex combination of the endpoints.
//! A vector with more than k nonzeros always has two unpinned nonzeros,
//! because k coordinates at `C/k` plus one more nonzero would exceed `C`.
//! Identical intermediate states are merged level by level, which keeps the
//! tree small in practice.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{norm1, norm_inf};

/// Magnitudes at or below this (times `max(1, C/k)`) count as zero.
pub const ZERO_TOL: f64 = 1e-14;

pub const DEFAULT_ATOM_BUDGET: usize = 1 << 20;

pub const MAX_DIMENSION: usize = 64;

const PRECONDITION_SLACK: f64 = 1e-12;
const MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseDecomposition {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub k: usize,
    pub cap: f64,
}

impl SparseDecomposition {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

#[derive(Serialize)]
struct DecompositionWire<'a> {
    k: usize,
    cap: f64,
    n: usize,
    weights: &'a [f64],
    atoms: Vec<Vec<(usize, f64)>>,
}

impl Serialize for SparseDecomposition {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        DecompositionWire {
            k: self.k,
            cap: self.cap,
            n: self.atoms.first().map_or(0, Vec::len),
            weights: &self.weights,
            atoms: self
                .atoms
                .iter()
                .map(|w| {
                    w.iter()
                        .enumerate()
                        .filter(|(_, x)| **x != 0.0)
                        .map(|(i, x)| (i, *x))
                        .collect()
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

struct Geometry {
    level: f64,
    zero: f64,
    quantum: f64,
}

impl Geometry {
    fn snap(&self, x: f64) -> f64 {
        if x.abs() <= self.zero {
            0.0
        } else if x.abs() >= self.level - self.zero {
            self.level.copysign(x)
        } else {
            x
        }
    }

    fn is_free(&self, x: f64) -> bool {
        x != 0.0 && x.abs() < self.level
    }

    fn key(&self, v: &[f64]) -> Vec<i64> {
        v.iter().map(|x| (x / self.quantum).round() as i64).collect()
    }
}

fn nonzeros(v: &[f64]) -> usize {
    v.iter().filter(|x| **x != 0.0).count()
}

/// Splits `v` into the two endpoints of its mass-shifting segment and
/// their convex weights.
fn split(v: &[f64], geo: &Geometry) -> Result<[(Vec<f64>, f64); 2]> {
    let mut free: Vec<usize> = (0..v.len()).filter(|&i| geo.is_free(v[i])).collect();
    if free.len() < 2 {
        return Err(Error::Numerical(format!(
            "vector with {} nonzeros has {} unpinned coordinates",
            nonzeros(v),
            free.len()
        )));
    }
    free.sort_by(|&a, &b| match v[a].abs().total_cmp(&v[b].abs()) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    let (i, j) = (free[0], free[1]);
    let (a, b) = (v[i].abs(), v[j].abs());
    let (si, sj) = (v[i].signum(), v[j].signum());

    // t > 0 grows |v_i| and shrinks |v_j|; t < 0 does the opposite.
    let up_room_i = geo.level - a;
    let up_room_j = geo.level - b;
    let t_plus = up_room_i.min(b);
    let t_minus = a.min(up_room_j);

    let mut plus = v.to_vec();
    plus[i] = if t_plus == up_room_i { si * geo.level } else { si * (a + t_plus) };
    plus[j] = if t_plus == b { 0.0 } else { sj * (b - t_plus) };
    let mut minus = v.to_vec();
    minus[i] = if t_minus == a { 0.0 } else { si * (a - t_minus) };
    minus[j] = if t_minus == up_room_j { sj * geo.level } else { sj * (b + t_minus) };
    for c in [i, j] {
        plus[c] = geo.snap(plus[c]);
        minus[c] = geo.snap(minus[c]);
    }

    let total = t_plus + t_minus;
    Ok([(plus, t_minus / total), (minus, t_plus / total)])
}

fn insert(map: &mut BTreeMap<Vec<i64>, (Vec<f64>, f64)>, geo: &Geometry, v: Vec<f64>, w: f64) {
    map.entry(geo.key(&v))
        .and_modify(|e| e.1 += w)
        .or_insert((v, w));
}

pub fn convex_k_sparse_decompose(v: &[f64], k: usize, cap: f64) -> Result<SparseDecomposition> {
    convex_k_sparse_decompose_with_budget(v, k, cap, DEFAULT_ATOM_BUDGET)
}

pub fn convex_k_sparse_decompose_with_budget(
    v: &[f64],
    k: usize,
    cap: f64,
    atom_budget: usize,
) -> Result<SparseDecomposition> {
    let n = v.len();
    if n == 0 || n > MAX_DIMENSION {
        return Err(Error::invalid(format!(
            "dimension must lie in 1..={MAX_DIMENSION}, got {n}"
        )));
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!("need 1 <= k <= n = {n}, got k = {k}")));
    }
    if !(cap > 0.0) || !cap.is_finite() {
        return Err(Error::invalid(format!("C must be positive and finite, got {cap}")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("vector has non-finite entries"));
    }
    let l1 = norm1(v);
    if l1 > cap + PRECONDITION_SLACK {
        return Err(Error::invalid(format!("||v||_1 = {l1} exceeds C = {cap}")));
    }
    let level = cap / k as f64;
    let linf = norm_inf(v);
    if linf > level + PRECONDITION_SLACK {
        return Err(Error::invalid(format!(
            "||v||_inf = {linf} exceeds C/k = {level}"
        )));
    }

    let scale = level.max(1.0);
    let geo = Geometry {
        level,
        zero: ZERO_TOL * scale,
        quantum: MERGE_TOL * scale,
    };
    let start: Vec<f64> = v.iter().map(|&x| geo.snap(x)).collect();

    let mut leaves = BTreeMap::new();
    let mut frontier = BTreeMap::new();
    insert(&mut frontier, &geo, start, 1.0);
    while !frontier.is_empty() {
        let mut next = BTreeMap::new();
        for (_, (state, w)) in frontier {
            if nonzeros(&state) <= k {
                insert(&mut leaves, &geo, state, w);
                continue;
            }
            for (child, cw) in split(&state, &geo)? {
                insert(&mut next, &geo, child, w * cw);
            }
            if next.len() + leaves.len() > atom_budget {
                return Err(Error::AtomBudget(atom_budget));
            }
        }
        frontier = next;
    }

    let mut atoms: Vec<(Vec<usize>, Vec<f64>, f64)> = leaves
        .into_values()
        .map(|(a, w)| {
            let support = (0..n).filter(|&i| a[i] != 0.0).collect();
            (support, a, w)
        })
        .collect();
    atoms.sort_by(|x, y| {
        x.0.cmp(&y.0).then_with(|| {
            x.1.iter()
                .zip(&y.1)
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
    });
    let (atoms, weights) = atoms.into_iter().map(|(_, a, w)| (a, w)).unzip();
    Ok(SparseDecomposition {
        atoms,
        weights,
        k,
        cap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckLine {
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            tolerance,
            passed: residual <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub checks: Vec<CheckLine>,
}

impl DecompositionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckLine> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Re-checks every property of a decomposition from scratch:
/// `reconstruction`, `k_sparsity`, `l1_equality`, `linf_cap` and
/// `convex_weights`.
pub fn validate_decomposition(v: &[f64], dec: &SparseDecomposition, tol: f64) -> DecompositionReport {
    let n = v.len();
    let shapes_ok = dec.atoms.len() == dec.weights.len() && dec.atoms.iter().all(|a| a.len() == n);

    let reconstruction = if shapes_ok && !dec.atoms.is_empty() {
        (0..n)
            .map(|i| {
                let s: f64 = dec.atoms.iter().zip(&dec.weights).map(|(a, x)| x * a[i]).sum();
                (s - v[i]).abs()
            })
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };

    let zero = ZERO_TOL * (dec.cap / dec.k.max(1) as f64).max(1.0);
    let max_nnz = dec
        .atoms
        .iter()
        .map(|a| a.iter().filter(|x| x.abs() > zero).count())
        .max()
        .unwrap_or(0);
    let sparsity = max_nnz.saturating_sub(dec.k) as f64;

    let l1 = norm1(v);
    let l1_gap = dec
        .atoms
        .iter()
        .map(|a| (norm1(a) - l1).abs())
        .fold(0.0, f64::max);

    let level = dec.cap / dec.k.max(1) as f64;
    let cap_excess = dec
        .atoms
        .iter()
        .map(|a| (norm_inf(a) - level).max(0.0))
        .fold(0.0, f64::max);

    let sum: f64 = dec.weights.iter().sum();
    let negativity = dec.weights.iter().fold(0.0f64, |m, &x| m.max(-x));
    let convexity = if dec.weights.is_empty() {
        f64::INFINITY
    } else {
        (sum - 1.0).abs().max(negativity)
    };

    DecompositionReport {
        checks: vec![
            CheckLine::new("reconstruction", reconstruction, tol),
            CheckLine::new("k_sparsity", sparsity, 0.0),
            CheckLine::new("l1_equality", l1_gap, tol),
            CheckLine::new("linf_cap", cap_excess, tol),
            CheckLine::new("convex_weights", convexity, tol),
        ],
    }
}
