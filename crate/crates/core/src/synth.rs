//! Approximating a Heisenberg evolution by powers of the collision gate.
//!
//! `G = g^2` advances the singlet phase by `2 theta` per application, so the
//! reachable phases are `{2 k theta}` and the relevant expansion is that of
//! `alpha = theta / pi` reduced mod 1 (step `2 pi alpha` on the circle).

use std::f64::consts::{PI, TAU};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::phases::{circle_distance, tj_reflection, wrap, PhaseGate, RelativeKinematics};

pub const MAX_CONVERGENTS: usize = 64;
/// Distance below which an expansion is treated as having terminated.
pub const RATIONAL_DETECTION: f64 = 1e-15;
pub const DEFAULT_BUDGET: u64 = 10_000_000;
/// A partial quotient above this marks rapid denominator growth.
pub const GROWTH_LIMIT: u64 = 1000;

/// Inverse golden ratio.
pub fn golden_alpha() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuedFraction {
    pub target: f64,
    pub partial_quotients: Vec<BigInt>,
    /// `(p_r, q_r)` for `r = 0, 1, ...`, starting with `(a_0, 1)`.
    pub convergents: Vec<(BigInt, BigInt)>,
    /// The expansion ended because the target was reached (exactly or
    /// within [`RATIONAL_DETECTION`]).
    pub terminated: bool,
}

impl ContinuedFraction {
    /// Exact target as a rational; every finite `f64` is one.
    pub fn exact_target(&self) -> BigRational {
        BigRational::from_float(self.target).expect("finite target")
    }

    pub fn denominators(&self) -> impl Iterator<Item = &BigInt> {
        self.convergents.iter().map(|(_, q)| q)
    }
}

fn reduce_unit(alpha: f64) -> f64 {
    let r = alpha.rem_euclid(1.0);
    if r >= 1.0 { 0.0 } else { r }
}

/// Expansion of `alpha mod 1`, computed exactly from its binary value.
pub fn continued_fraction(alpha: f64, max_convergents: usize) -> Result<ContinuedFraction> {
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} is not finite")));
    }
    if max_convergents == 0 || max_convergents > MAX_CONVERGENTS {
        return Err(Error::InvalidArgument(format!(
            "max_convergents must be in 1..={MAX_CONVERGENTS}, got {max_convergents}"
        )));
    }
    let target = reduce_unit(alpha);
    let exact = BigRational::from_float(target).expect("finite");
    let tol = BigRational::from_float(RATIONAL_DETECTION).expect("finite");
    let mut x = exact.clone();
    let (mut p_prev, mut q_prev) = (BigInt::zero(), BigInt::one());
    let (mut p, mut q) = (BigInt::one(), BigInt::zero());
    let mut quotients = Vec::new();
    let mut convergents = Vec::new();
    let mut terminated = false;
    while convergents.len() < max_convergents {
        let a = x.floor().to_integer();
        let p_next = &a * &p + &p_prev;
        let q_next = &a * &q + &q_prev;
        (p_prev, q_prev, p, q) = (p, q, p_next, q_next);
        quotients.push(a.clone());
        convergents.push((p.clone(), q.clone()));
        let frac = &x - BigRational::from_integer(a);
        let err = (&exact - BigRational::new(p.clone(), q.clone())).abs();
        if frac.is_zero() || err <= tol {
            terminated = true;
            break;
        }
        x = frac.recip();
    }
    Ok(ContinuedFraction { target, partial_quotients: quotients, convergents, terminated })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthesisPlan {
    pub k: u64,
    /// Arc distance between `2 k theta` and `gamma_t`.
    pub achieved_error: f64,
    pub target_phase: f64,
    pub theta: f64,
    pub epsilon: f64,
    /// Convergents examined before the search bound was fixed.
    pub convergents_used: usize,
    /// Denominator that bounded the search, if one was found.
    pub guide_q: Option<u64>,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 1e-12 && epsilon < PI) {
        return Err(Error::InvalidArgument(format!("epsilon = {epsilon} outside (1e-12, pi)")));
    }
    Ok(())
}

/// Smallest `k >= 1` with `|2 k theta - gamma_t| <= epsilon` on the circle.
pub fn plan_power(theta: f64, gamma_t: f64, epsilon: f64) -> Result<SynthesisPlan> {
    plan_power_with_budget(theta, gamma_t, epsilon, DEFAULT_BUDGET)
}

pub fn plan_power_with_budget(theta: f64, gamma_t: f64, epsilon: f64, budget: u64) -> Result<SynthesisPlan> {
    check_epsilon(epsilon)?;
    if !theta.is_finite() || !gamma_t.is_finite() {
        return Err(Error::InvalidArgument("theta and gamma_t must be finite".into()));
    }
    let alpha = reduce_unit(theta / PI);
    let step = TAU * alpha;
    let cf = continued_fraction(alpha, MAX_CONVERGENTS)?;
    let mut plan = SynthesisPlan {
        k: 0,
        achieved_error: f64::NAN,
        target_phase: gamma_t,
        theta,
        epsilon,
        convergents_used: cf.convergents.len(),
        guide_q: None,
    };
    let scan = |limit: u64| -> Option<(u64, f64)> {
        (1..=limit).find_map(|k| {
            let d = circle_distance(k as f64 * step, gamma_t);
            (d <= epsilon).then_some((k, d))
        })
    };

    if cf.terminated {
        // Reachable phases repeat with the period of the final denominator.
        let period = cf.convergents.last().unwrap().1.to_u64().unwrap_or(u64::MAX);
        if period <= budget {
            return match scan(period) {
                Some((k, d)) => Ok(SynthesisPlan { k, achieved_error: d, guide_q: Some(period), ..plan }),
                None => Err(Error::Unreachable { period }),
            };
        }
    }
    // Any angle is within 3 pi / q of some 2 k theta with k <= q.
    for (r, (_, q)) in cf.convergents.iter().enumerate() {
        let Some(q) = q.to_u64() else { break };
        if 3.0 * PI / q as f64 <= epsilon {
            plan.convergents_used = r + 1;
            plan.guide_q = Some(q);
            if let Some((k, d)) = scan(q.min(budget)) {
                return Ok(SynthesisPlan { k, achieved_error: d, ..plan });
            }
            break;
        }
    }
    match scan(budget) {
        Some((k, d)) => Ok(SynthesisPlan { k, achieved_error: d, ..plan }),
        None => Err(Error::BudgetExceeded { cap: budget }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuitabilityReport {
    pub alpha: f64,
    pub epsilon: f64,
    pub spread: f64,
    /// `ceil(2 log2(1/epsilon) + 1)`.
    pub convergents_requested: usize,
    pub convergents_computed: usize,
    /// Denominators as decimal strings.
    pub denominators: Vec<String>,
    /// Denominator in `[1/(c eps), c/eps]` closest to `3 pi / eps` on a log scale.
    pub best_q: Option<u64>,
    /// `3 pi / best_q`.
    pub resolution: Option<f64>,
    pub suitable: bool,
    /// First `(q_r, q_{r+1})` at or below `c / eps` whose partial quotient
    /// exceeds [`GROWTH_LIMIT`].
    pub growth_gap: Option<(String, String)>,
}

pub fn convergents_needed(epsilon: f64) -> usize {
    (2.0 * (1.0 / epsilon).log2() + 1.0).ceil() as usize
}

pub fn suitability(theta: f64, epsilon: f64, spread: f64) -> Result<SuitabilityReport> {
    check_epsilon(epsilon)?;
    if spread < 1.0 {
        return Err(Error::InvalidArgument(format!("spread c = {spread} must be >= 1")));
    }
    let alpha = reduce_unit(theta / PI);
    let requested = convergents_needed(epsilon);
    let cf = continued_fraction(alpha, requested.min(MAX_CONVERGENTS))?;
    let (lo, hi) = (1.0 / (spread * epsilon), spread / epsilon);
    let ideal = (3.0 * PI / epsilon).ln();
    let best_q = cf
        .denominators()
        .filter_map(|q| q.to_u64())
        .filter(|&q| (q as f64) >= lo && (q as f64) <= hi)
        .min_by(|a, b| {
            let da = ((*a as f64).ln() - ideal).abs();
            let db = ((*b as f64).ln() - ideal).abs();
            da.total_cmp(&db)
        });
    let growth_gap = cf
        .convergents
        .windows(2)
        .zip(cf.partial_quotients.iter().skip(1))
        .find(|(w, a)| {
            w[0].1.to_f64().is_some_and(|q| q <= hi) && **a > BigInt::from(GROWTH_LIMIT)
        })
        .map(|(w, _)| (w[0].1.to_string(), w[1].1.to_string()));
    Ok(SuitabilityReport {
        alpha,
        epsilon,
        spread,
        convergents_requested: requested,
        convergents_computed: cf.convergents.len(),
        denominators: cf.denominators().map(|q| q.to_string()).collect(),
        best_q,
        resolution: best_q.map(|q| 3.0 * PI / q as f64),
        suitable: best_q.is_some(),
        growth_gap,
    })
}

/// `G^k`.
pub fn gate_power(gate: &PhaseGate, k: u64) -> PhaseGate {
    gate.power(k)
}

/// `exp(i gamma_t S1.S2) = e^{i gamma_t / 4} diag(1, 1, e^{-i gamma_t}, 1)`.
pub fn heisenberg_target(gamma_t: f64) -> PhaseGate {
    let g = Complex64Ext::polar(gamma_t / 4.0);
    let mut gate = PhaseGate::singlet(-gamma_t);
    for d in gate.diag.iter_mut() {
        *d *= g;
    }
    gate
}

/// Distance from `G^k` to the Heisenberg target once the target's global
/// phase `e^{i gamma_t / 4}` is removed.
pub fn distance_to_heisenberg(gate: &PhaseGate, gamma_t: f64) -> f64 {
    let mut target = heisenberg_target(gamma_t);
    let undo = Complex64Ext::polar(-gamma_t / 4.0);
    for d in target.diag.iter_mut() {
        *d *= undo;
    }
    gate.distance(&target)
}

/// Plan for realising `exp(i gamma_t S1.S2)` up to global phase with a
/// singlet-only gate of phase `theta`: the singlet must acquire `-gamma_t`.
pub fn plan_heisenberg(theta: f64, gamma_t: f64, epsilon: f64) -> Result<SynthesisPlan> {
    plan_power(theta, wrap(-gamma_t), epsilon)
}

struct Complex64Ext;

impl Complex64Ext {
    fn polar(phase: f64) -> num_complex::Complex64 {
        num_complex::Complex64::from_polar(1.0, phase)
    }
}

/// A t-J coupling in `[j_lo, j_hi]` at which `theta(J) / pi = alpha (mod 1)`,
/// found by bracketing on a grid and bisecting.
pub fn tj_coupling_for_alpha(kin: &RelativeKinematics, alpha: f64, j_lo: f64, j_hi: f64) -> Result<f64> {
    let f = |j: f64| -> Result<f64> { Ok(wrap(2.0 * tj_reflection(kin, j)?.0.arg() - TAU * alpha)) };
    let n = 2000;
    let mut prev = (j_lo, f(j_lo)?);
    for i in 1..=n {
        let j = j_lo + (j_hi - j_lo) * i as f64 / n as f64;
        let v = f(j)?;
        // Reject sign changes caused by the branch cut.
        if prev.1.signum() != v.signum() && (v - prev.1).abs() < PI {
            let (mut a, mut b) = (prev.0, j);
            let fa = prev.1;
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if f(m)?.signum() == fa.signum() {
                    a = m;
                } else {
                    b = m;
                }
            }
            return Ok(0.5 * (a + b));
        }
        prev = (j, v);
    }
    Err(Error::InvalidArgument(format!("no coupling in [{j_lo}, {j_hi}] gives alpha = {alpha}")))
}

/// Gaps between consecutive points of `{k alpha mod 1 : 0 <= k < n}`.
pub fn circle_gaps(alpha: f64, n: usize) -> Vec<f64> {
    let mut pts: Vec<f64> = (0..n).map(|k| (k as f64 * alpha).rem_euclid(1.0)).collect();
    pts.sort_by(f64::total_cmp);
    let mut gaps: Vec<f64> = pts.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.push(1.0 - pts[n - 1] + pts[0]);
    gaps
}

/// Number of distinct values in `gaps` up to `tol`.
pub fn distinct_lengths(gaps: &[f64], tol: f64) -> usize {
    let mut sorted = gaps.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut count = 0;
    let mut last = f64::NEG_INFINITY;
    for g in sorted {
        if g - last > tol {
            count += 1;
            last = g;
        }
    }
    count
}

/// Exact check of `gcd(p, q) = 1`, `|alpha - p/q| < 1/q^2` and
/// `q_r^2 >= 2^(r-1)` for every convergent.
pub fn convergent_violations(cf: &ContinuedFraction) -> Vec<String> {
    let alpha = cf.exact_target();
    let mut out = Vec::new();
    for (r, (p, q)) in cf.convergents.iter().enumerate() {
        if !p.gcd(q).is_one() {
            out.push(format!("r = {r}: gcd({p}, {q}) != 1"));
        }
        let err = (&alpha - BigRational::new(p.clone(), q.clone())).abs();
        if err >= BigRational::new(BigInt::one(), q * q) {
            out.push(format!("r = {r}: |alpha - {p}/{q}| >= 1/q^2"));
        }
        if r >= 1 && q * q < (BigInt::one() << (r - 1)) {
            out.push(format!("r = {r}: q = {q} below 2^((r-1)/2)"));
        }
    }
    out
}
