//! Triple-rail logical qubits driven by pairwise exchange gates.
//!
//! Spins are numbered from 1 (rail 1 is the most significant bit of the
//! physical index, spin up = 0). Qubit `q` occupies rails `3q+1..=3q+3`.
//! `|0_L> = |S>|u>` and `|1_L> = sqrt(2/3)|uud> - |T0>|u>/sqrt(3)`.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phases::{circle_distance, PhaseGate};
use crate::synth::{heisenberg_target, plan_heisenberg, plan_power};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub const MAX_LOGICAL: usize = 2;
/// Per-element accuracy target for an encoded CNOT.
pub const CNOT_TARGET: f64 = 6e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct LogicalQubitState {
    pub physical: Vec<Complex64>,
    pub n_logical: usize,
}

impl LogicalQubitState {
    pub fn spins(&self) -> usize {
        3 * self.n_logical
    }

    pub fn norm(&self) -> f64 {
        self.physical.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

fn check_logical(n: usize) -> Result<()> {
    if n == 0 || n > MAX_LOGICAL {
        return Err(Error::InvalidArgument(format!("n_logical must be 1 or 2, got {n}")));
    }
    Ok(())
}

/// Physical index of a spin configuration (`true` = down).
fn index_of(downs: &[bool]) -> usize {
    downs.iter().fold(0, |acc, &d| (acc << 1) | d as usize)
}

/// The two logical basis states of one triple as 8-component vectors.
pub fn triple_codewords() -> [[Complex64; 8]; 2] {
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut zero = [ZERO; 8];
    zero[index_of(&[false, true, false])] = Complex64::new(s2, 0.0);
    zero[index_of(&[true, false, false])] = Complex64::new(-s2, 0.0);
    let mut one = [ZERO; 8];
    let s6 = 1.0 / 6f64.sqrt();
    one[index_of(&[false, false, true])] = Complex64::new((2.0f64 / 3.0).sqrt(), 0.0);
    one[index_of(&[false, true, false])] = Complex64::new(-s6, 0.0);
    one[index_of(&[true, false, false])] = Complex64::new(-s6, 0.0);
    [zero, one]
}

/// Physical vector of logical basis state `logical` (qubit 0 most significant).
pub fn codeword(n: usize, logical: usize) -> Vec<Complex64> {
    let words = triple_codewords();
    let mut out = vec![ONE];
    for q in 0..n {
        let bit = (logical >> (n - 1 - q)) & 1;
        let w = &words[bit];
        let mut next = vec![ZERO; out.len() * 8];
        for (i, a) in out.iter().enumerate() {
            for (j, b) in w.iter().enumerate() {
                next[i * 8 + j] = a * b;
            }
        }
        out = next;
    }
    out
}

pub fn encode(amplitudes: &[Complex64], n: usize) -> Result<LogicalQubitState> {
    check_logical(n)?;
    if amplitudes.len() != 1 << n {
        return Err(Error::InvalidArgument(format!("expected {} logical amplitudes", 1 << n)));
    }
    let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("logical amplitudes have norm^2 {norm}")));
    }
    let mut physical = vec![ZERO; 1 << (3 * n)];
    for (l, a) in amplitudes.iter().enumerate() {
        for (p, c) in physical.iter_mut().zip(codeword(n, l)) {
            *p += a * c;
        }
    }
    Ok(LogicalQubitState { physical, n_logical: n })
}

pub fn encode_bits(bits: &[bool]) -> Result<LogicalQubitState> {
    let n = bits.len();
    check_logical(n)?;
    let mut amps = vec![ZERO; 1 << n];
    amps[index_of(bits)] = ONE;
    encode(&amps, n)
}

/// Logical amplitudes and the norm of the component outside the code space.
pub fn decode(state: &LogicalQubitState) -> (Vec<Complex64>, f64) {
    let n = state.n_logical;
    let amps: Vec<Complex64> = (0..1 << n)
        .map(|l| codeword(n, l).iter().zip(&state.physical).map(|(c, p)| c.conj() * p).sum())
        .collect();
    let kept: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    let total: f64 = state.physical.iter().map(|z| z.norm_sqr()).sum();
    (amps, (total - kept).max(0.0).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleMetadata {
    pub name: String,
    #[serde(default)]
    pub provenance: String,
    pub logical_qubits: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleStep {
    /// 1-based rails.
    pub pair: [usize; 2],
    /// The step realises `exp(i gamma_t S_i.S_j)`.
    pub gamma_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExchangeSchedule {
    pub metadata: ScheduleMetadata,
    #[serde(default, rename = "step")]
    pub steps: Vec<ScheduleStep>,
}

impl ExchangeSchedule {
    pub fn new(name: &str, logical_qubits: usize, steps: Vec<ScheduleStep>) -> Result<Self> {
        let s = ExchangeSchedule {
            metadata: ScheduleMetadata { name: name.into(), provenance: String::new(), logical_qubits },
            steps,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn spins(&self) -> usize {
        3 * self.metadata.logical_qubits
    }

    pub fn parse(text: &str) -> Result<Self> {
        let s: ExchangeSchedule = toml::from_str(text).map_err(|e| Error::ScheduleFile {
            field: e.span().map_or("document".into(), |s| format!("bytes {}..{}", s.start, s.end)),
            message: e.message().to_string(),
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::ScheduleFile {
            field: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schedule serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: String, message: String| Err(Error::ScheduleFile { field, message });
        let n = self.metadata.logical_qubits;
        if n == 0 || n > MAX_LOGICAL {
            return bad("metadata.logical_qubits".into(), format!("must be 1 or 2, got {n}"));
        }
        let rails = 3 * n;
        for (i, s) in self.steps.iter().enumerate() {
            let [a, b] = s.pair;
            if a == 0 || b == 0 || a > rails || b > rails {
                return bad(format!("step[{i}].pair"), format!("rails must be in 1..={rails}, got [{a}, {b}]"));
            }
            if a == b {
                return bad(format!("step[{i}].pair"), format!("rails must differ, got [{a}, {b}]"));
            }
            if !s.gamma_t.is_finite() {
                return bad(format!("step[{i}].gamma_t"), "must be finite".into());
            }
        }
        Ok(())
    }
}

/// How each step's exchange pulse is realised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateSource {
    /// `exp(i gamma_t S_i.S_j)` exactly.
    Exact,
    /// `G^k`, with `k` planned per step so the singlet phase lands within
    /// `epsilon` of `-gamma_t`. `gate` may be analytic or a numerical estimate.
    Powers { gate: PhaseGate, epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRealisation {
    pub pair: [usize; 2],
    pub gamma_t: f64,
    /// Collisions used; 0 for exact pulses.
    pub k: u64,
    /// Singlet-phase error of the realised pulse.
    pub phase_error: f64,
}

fn realise(step: &ScheduleStep, source: &GateSource) -> Result<(PhaseGate, StepRealisation)> {
    let mut rec = StepRealisation { pair: step.pair, gamma_t: step.gamma_t, k: 0, phase_error: 0.0 };
    match source {
        GateSource::Exact => Ok((heisenberg_target(step.gamma_t), rec)),
        GateSource::Powers { gate, epsilon } => {
            let theta = gate.singlet_phase() / 2.0;
            let plan = plan_heisenberg(theta, step.gamma_t, *epsilon)?;
            let g = gate.power(plan.k);
            rec.k = plan.k;
            rec.phase_error = circle_distance(g.singlet_phase(), -step.gamma_t);
            Ok((g, rec))
        }
    }
}

/// Apply a diagonal coupled-basis gate to spins `a` and `b` (1-based).
pub fn apply_pair_gate(psi: &mut [Complex64], spins: usize, a: usize, b: usize, gate: &PhaseGate) {
    let m = gate.uncoupled_matrix();
    let (ba, bb) = (1usize << (spins - a), 1usize << (spins - b));
    for i in 0..psi.len() {
        if i & ba != 0 || i & bb != 0 {
            continue;
        }
        let idx = [i, i | bb, i | ba, i | ba | bb];
        let v = idx.map(|j| psi[j]);
        for (r, &j) in idx.iter().enumerate() {
            psi[j] = (0..4).map(|c| m[r][c] * v[c]).sum();
        }
    }
}

pub fn apply_schedule(
    state: &LogicalQubitState,
    schedule: &ExchangeSchedule,
    source: &GateSource,
) -> Result<(LogicalQubitState, Vec<StepRealisation>)> {
    schedule.validate()?;
    if schedule.metadata.logical_qubits != state.n_logical {
        return Err(Error::InvalidArgument(format!(
            "schedule is for {} logical qubits, state has {}",
            schedule.metadata.logical_qubits, state.n_logical
        )));
    }
    let gates = realise_all(schedule, source)?;
    let mut psi = state.physical.clone();
    for (step, (g, _)) in schedule.steps.iter().zip(&gates) {
        apply_pair_gate(&mut psi, state.spins(), step.pair[0], step.pair[1], g);
    }
    Ok((LogicalQubitState { physical: psi, n_logical: state.n_logical }, gates.into_iter().map(|g| g.1).collect()))
}

fn realise_all(schedule: &ExchangeSchedule, source: &GateSource) -> Result<Vec<(PhaseGate, StepRealisation)>> {
    schedule.steps.par_iter().map(|s| realise(s, source)).collect()
}

/// Full `2^spins` unitary of a schedule.
pub fn schedule_unitary(schedule: &ExchangeSchedule, source: &GateSource) -> Result<DMatrix<Complex64>> {
    schedule.validate()?;
    let spins = schedule.spins();
    let gates = realise_all(schedule, source)?;
    let dim = 1usize << spins;
    let mut u = DMatrix::identity(dim, dim);
    for c in 0..dim {
        let mut col: Vec<Complex64> = u.column(c).iter().cloned().collect();
        for (step, (g, _)) in schedule.steps.iter().zip(&gates) {
            apply_pair_gate(&mut col, spins, step.pair[0], step.pair[1], g);
        }
        u.set_column(c, &nalgebra::DVector::from_vec(col));
    }
    Ok(u)
}

#[derive(Debug, Clone, Serialize)]
pub struct LogicalUnitary {
    /// `block[(i, j)] = <i_L| U |j_L>`.
    #[serde(skip)]
    pub block: DMatrix<Complex64>,
    /// Largest singular value of the code-to-complement part of `U`.
    pub leakage: f64,
    pub steps: Vec<StepRealisation>,
}

impl LogicalUnitary {
    /// Largest element-wise deviation from `target` after removing the best
    /// global phase.
    pub fn max_element_error(&self, target: &DMatrix<Complex64>) -> f64 {
        let overlap: Complex64 = target.iter().zip(self.block.iter()).map(|(t, b)| t.conj() * b).sum();
        let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { ONE };
        target.iter().zip(self.block.iter()).map(|(t, b)| (b - t * phase).norm()).fold(0.0, f64::max)
    }
}

pub fn logical_unitary(schedule: &ExchangeSchedule, source: &GateSource) -> Result<LogicalUnitary> {
    let n = schedule.metadata.logical_qubits;
    check_logical(n)?;
    let dim = 1usize << n;
    let gates = realise_all(schedule, source)?;
    let spins = schedule.spins();
    let words: Vec<Vec<Complex64>> = (0..dim).map(|l| codeword(n, l)).collect();
    let mut block = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut psi = words[j].clone();
        for (step, (g, _)) in schedule.steps.iter().zip(&gates) {
            apply_pair_gate(&mut psi, spins, step.pair[0], step.pair[1], g);
        }
        for i in 0..dim {
            block[(i, j)] = words[i].iter().zip(&psi).map(|(c, p)| c.conj() * p).sum();
        }
    }
    // ||(1 - P) U P||^2 = lambda_max(1 - B^dag B) for unitary U.
    let gram = DMatrix::<Complex64>::identity(dim, dim) - block.adjoint() * &block;
    let lambda = gram.symmetric_eigenvalues().iter().cloned().fold(0.0, f64::max);
    Ok(LogicalUnitary { block, leakage: lambda.max(0.0).sqrt(), steps: gates.into_iter().map(|g| g.1).collect() })
}

/// CNOT with logical qubit 0 as control.
pub fn cnot() -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 1)] = ONE;
    m[(2, 3)] = ONE;
    m[(3, 2)] = ONE;
    m
}

/// `S_z` total applied to `psi`.
pub fn total_sz(psi: &[Complex64], spins: usize) -> Vec<Complex64> {
    psi.iter()
        .enumerate()
        .map(|(i, z)| {
            let downs = i.count_ones() as f64;
            z * (0.5 * (spins as f64 - downs) - 0.5 * downs)
        })
        .collect()
}

/// `S^2` total applied to `psi`, via `S_i.S_j = P_ij / 2 - 1/4`.
pub fn total_s2(psi: &[Complex64], spins: usize) -> Vec<Complex64> {
    let n = spins as f64;
    let diag = 0.75 * n - 0.25 * n * (n - 1.0);
    let mut out: Vec<Complex64> = psi.iter().map(|z| z * diag).collect();
    for a in 0..spins {
        for b in a + 1..spins {
            let (ba, bb) = (1usize << (spins - 1 - a), 1usize << (spins - 1 - b));
            for (i, z) in psi.iter().enumerate() {
                let (x, y) = (i & ba != 0, i & bb != 0);
                let j = if x != y { i ^ ba ^ bb } else { i };
                out[j] += z;
            }
        }
    }
    out
}

fn operator_matrix(spins: usize, f: impl Fn(&[Complex64], usize) -> Vec<Complex64>) -> DMatrix<Complex64> {
    let dim = 1usize << spins;
    let mut m = DMatrix::zeros(dim, dim);
    for c in 0..dim {
        let mut e = vec![ZERO; dim];
        e[c] = ONE;
        for (r, v) in f(&e, spins).into_iter().enumerate() {
            m[(r, c)] = v;
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub sz_commutator: f64,
    pub s2_commutator: f64,
    pub unitarity_defect: f64,
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Element-wise commutators of the schedule unitary with total `S_z` and
/// `S^2`, and `max |U^dag U - 1|`.
pub fn schedule_symmetry(schedule: &ExchangeSchedule, source: &GateSource) -> Result<SymmetryReport> {
    let u = schedule_unitary(schedule, source)?;
    let spins = schedule.spins();
    let sz = operator_matrix(spins, total_sz);
    let s2 = operator_matrix(spins, total_s2);
    let dim = u.nrows();
    Ok(SymmetryReport {
        sz_commutator: max_abs(&(&u * &sz - &sz * &u)),
        s2_commutator: max_abs(&(&u * &s2 - &s2 * &u)),
        unitarity_defect: max_abs(&(u.adjoint() * &u - DMatrix::identity(dim, dim))),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Preparation {
    #[serde(skip)]
    pub state: LogicalQubitState,
    pub collisions: u64,
    /// Singlet phase accumulated by the collisions.
    pub singlet_phase: f64,
    /// Phase applied to spin-down on rail 1, if the fix was used.
    pub fix_phase: Option<f64>,
    pub fidelity: f64,
}

/// Largest plan error accepted by [`prepare_singlet_protocol`].
pub const PREPARATION_THRESHOLD: f64 = 0.1;

/// Start from `|u d u>`, give the singlet component of rails 1 and 2 the
/// planned phase (ideally `pi/2`), then optionally remove the leftover
/// relative phase with an ideal single-spin phase on rail 1.
pub fn prepare_singlet_protocol(plan: &crate::synth::SynthesisPlan, phase_fix: bool) -> Result<Preparation> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    if circle_distance(plan.target_phase, half_pi) > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "plan targets singlet phase {}, expected pi/2",
            plan.target_phase
        )));
    }
    if plan.achieved_error > PREPARATION_THRESHOLD {
        return Err(Error::PlanQuality { error: plan.achieved_error, threshold: PREPARATION_THRESHOLD });
    }
    let phase = 2.0 * plan.k as f64 * plan.theta;
    let mut psi = vec![ZERO; 8];
    psi[index_of(&[false, true, false])] = ONE;
    apply_pair_gate(&mut psi, 3, 1, 2, &PhaseGate::singlet(phase));
    // After an exact pi/2 the state is e^{i pi/4}(|ud> - i|du>)|u>/sqrt 2.
    let fix_phase = phase_fix.then_some(-half_pi);
    if let Some(f) = fix_phase {
        let rot = Complex64::from_polar(1.0, f);
        for (i, z) in psi.iter_mut().enumerate() {
            if i & 0b100 != 0 {
                *z *= rot;
            }
        }
    }
    let state = LogicalQubitState { physical: psi, n_logical: 1 };
    let zero = codeword(1, 0);
    let overlap: Complex64 = zero.iter().zip(&state.physical).map(|(c, p)| c.conj() * p).sum();
    Ok(Preparation { state, collisions: plan.k, singlet_phase: phase, fix_phase, fidelity: overlap.norm_sqr() })
}

/// Plan for the preparation step with a gate of singlet phase `theta` per
/// collision pair.
pub fn preparation_plan(theta: f64, epsilon: f64) -> Result<crate::synth::SynthesisPlan> {
    plan_power(theta, std::f64::consts::FRAC_PI_2, epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasurementStats {
    /// Exact probability that spin 3 reads down.
    pub p_down: f64,
    pub shots: u64,
    pub downs: u64,
    pub frequency: f64,
    /// Binomial standard deviation of `frequency`.
    pub sigma: f64,
    pub seed: u64,
}

const SHOTS_PER_BLOCK: u64 = 1 << 16;

pub fn third_spin_down_probability(state: &LogicalQubitState) -> Result<f64> {
    if state.n_logical != 1 {
        return Err(Error::InvalidArgument("measurement acts on a single logical qubit".into()));
    }
    let total: f64 = state.physical.iter().map(|z| z.norm_sqr()).sum();
    let down: f64 = state.physical.iter().enumerate().filter(|(i, _)| i & 1 == 1).map(|(_, z)| z.norm_sqr()).sum();
    Ok(down / total)
}

/// Measure spin 3 along z `shots` times. Block `b` of shots draws from
/// ChaCha8 seeded with `seed` on stream `b`, so counts do not depend on the
/// thread count.
pub fn measure_third_spin(state: &LogicalQubitState, shots: u64, seed: u64) -> Result<MeasurementStats> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be positive".into()));
    }
    let p = third_spin_down_probability(state)?;
    let blocks = shots.div_ceil(SHOTS_PER_BLOCK);
    let downs: u64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let n = SHOTS_PER_BLOCK.min(shots - b * SHOTS_PER_BLOCK);
            (0..n).filter(|_| rng.random::<f64>() < p).count() as u64
        })
        .sum();
    let frequency = downs as f64 / shots as f64;
    Ok(MeasurementStats { p_down: p, shots, downs, frequency, sigma: (p * (1.0 - p) / shots as f64).sqrt(), seed })
}

/// Probability that a majority over `runs` independent repetitions, each
/// wrong with probability `p`, is wrong. Ties count as half an error.
pub fn majority_vote_error(p: f64, runs: u32) -> f64 {
    let n = runs as usize;
    let mut dist = vec![0.0; n + 1];
    dist[0] = 1.0;
    for m in 0..n {
        for j in (0..=m + 1).rev() {
            let stay = if j <= m { dist[j] * (1.0 - p) } else { 0.0 };
            let up = if j > 0 { dist[j - 1] * p } else { 0.0 };
            dist[j] = stay + up;
        }
    }
    dist.iter()
        .enumerate()
        .map(|(j, d)| match (2 * j).cmp(&n) {
            std::cmp::Ordering::Greater => *d,
            std::cmp::Ordering::Equal => 0.5 * d,
            std::cmp::Ordering::Less => 0.0,
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::heisenberg_target;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn amp(z: f64) -> Complex64 {
        Complex64::new(z, 0.0)
    }

    #[test]
    fn codewords_match_their_definitions() {
        let [zero, one] = triple_codewords();
        let s = 0.5f64.sqrt();
        assert!((zero[0b010] - amp(s)).norm() < 1e-15 && (zero[0b100] - amp(-s)).norm() < 1e-15);
        assert!((one[0b001] - amp((2.0f64 / 3.0).sqrt())).norm() < 1e-15);
        // -|T0>|u>/sqrt3 with |T0> = (|ud> + |du>)/sqrt2
        assert!((one[0b010] - amp(-1.0 / 6f64.sqrt())).norm() < 1e-15);
        assert!((one[0b100] - amp(-1.0 / 6f64.sqrt())).norm() < 1e-15);
        let ov: Complex64 = zero.iter().zip(one.iter()).map(|(a, b)| a.conj() * b).sum();
        assert!(ov.norm() < 1e-15);
    }

    #[test]
    fn codewords_are_spin_half_up() {
        for w in triple_codewords() {
            let sz = total_sz(&w, 3);
            let s2 = total_s2(&w, 3);
            for i in 0..8 {
                assert!((sz[i] - w[i] * 0.5).norm() < 1e-14);
                assert!((s2[i] - w[i] * 0.75).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn encode_decode_round_trip() {
        let a = [Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.5), amp(0.6), Complex64::new(0.0, -0.2)];
        let norm = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let a: Vec<_> = a.iter().map(|z| z / norm).collect();
        let st = encode(&a, 2).unwrap();
        let (back, leak) = decode(&st);
        assert!(leak < 1e-7);
        for (x, y) in a.iter().zip(&back) {
            assert!((x - y).norm() < 1e-14);
        }
        assert!(encode(&[amp(1.0), amp(1.0)], 1).is_err());
        assert!(encode(&[amp(1.0)], 3).is_err());
    }

    #[test]
    fn empty_schedule_is_identity() {
        let s = ExchangeSchedule::new("empty", 2, vec![]).unwrap();
        let lu = logical_unitary(&s, &GateSource::Exact).unwrap();
        assert!((&lu.block - DMatrix::<Complex64>::identity(4, 4)).iter().all(|z| z.norm() < 1e-15));
        assert!(lu.leakage < 1e-7);
    }

    #[test]
    fn full_turn_power_is_identity() {
        // theta = pi/4: four applications of G give a singlet phase of 2 pi.
        let s = ExchangeSchedule::new("turn", 1, vec![ScheduleStep { pair: [1, 2], gamma_t: 0.0 }]).unwrap();
        let src = GateSource::Powers { gate: PhaseGate::singlet(PI / 2.0), epsilon: 1e-9 };
        let st = encode_bits(&[true]).unwrap();
        let (out, rec) = apply_schedule(&st, &s, &src).unwrap();
        assert_eq!(rec[0].k, 4);
        for (a, b) in out.physical.iter().zip(&st.physical) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_state_is_invariant_under_first_pair() {
        let s = ExchangeSchedule::new("s12", 1, vec![ScheduleStep { pair: [1, 2], gamma_t: 0.83 }]).unwrap();
        let st = encode_bits(&[false]).unwrap();
        let (out, _) = apply_schedule(&st, &s, &GateSource::Exact).unwrap();
        let ov: Complex64 = st.physical.iter().zip(&out.physical).map(|(a, b)| a.conj() * b).sum();
        assert!((ov.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn swap_of_first_pair_is_logical_z() {
        // exp(i pi S.S) = e^{-i pi/4} * i * SWAP
        let s = ExchangeSchedule::new("z", 1, vec![ScheduleStep { pair: [1, 2], gamma_t: PI }]).unwrap();
        let lu = logical_unitary(&s, &GateSource::Exact).unwrap();
        let mut z = DMatrix::zeros(2, 2);
        z[(0, 0)] = amp(1.0);
        z[(1, 1)] = amp(-1.0);
        assert!(lu.max_element_error(&z) < 1e-14);
        assert!(lu.leakage < 1e-7);
    }

    #[test]
    fn exact_pulse_is_exponential_of_exchange() {
        // Compare with the dense exponential of S1.S2 on two spins.
        let g = 0.731;
        let s = ExchangeSchedule {
            metadata: ScheduleMetadata { name: "x".into(), provenance: String::new(), logical_qubits: 1 },
            steps: vec![ScheduleStep { pair: [2, 3], gamma_t: g }],
        };
        let u = schedule_unitary(&s, &GateSource::Exact).unwrap();
        // S2.S3 = (P23 - 1/2)/2 ; exp(i g S.S) = e^{-ig/4}(cos(g/2) + i sin(g/2) P)
        let pre = Complex64::from_polar(1.0, -g / 4.0);
        for i in 0..8usize {
            let (b2, b3) = ((i >> 1) & 1, i & 1);
            let j = if b2 != b3 { i ^ 0b011 } else { i };
            let mut want = vec![ZERO; 8];
            want[i] += pre * (g / 2.0).cos();
            want[j] += pre * Complex64::new(0.0, (g / 2.0).sin());
            for r in 0..8 {
                assert!((u[(r, i)] - want[r]).norm() < 1e-14, "{i} {r}");
            }
        }
    }

    #[test]
    fn single_qubit_schedules_never_leak() {
        let steps = vec![
            ScheduleStep { pair: [1, 2], gamma_t: 0.4 },
            ScheduleStep { pair: [2, 3], gamma_t: 1.9 },
            ScheduleStep { pair: [1, 3], gamma_t: -2.2 },
        ];
        let s = ExchangeSchedule::new("q", 1, steps).unwrap();
        let lu = logical_unitary(&s, &GateSource::Exact).unwrap();
        assert!(lu.leakage < 1e-7);
    }

    #[test]
    fn cross_qubit_exchange_leaks() {
        let s = ExchangeSchedule::new("x", 2, vec![ScheduleStep { pair: [3, 4], gamma_t: 1.0 }]).unwrap();
        assert!(logical_unitary(&s, &GateSource::Exact).unwrap().leakage > 1e-2);
    }

    #[test]
    fn schedule_file_round_trip_and_errors() {
        let text = "[metadata]\nname = \"t\"\nlogical_qubits = 2\n\n[[step]]\npair = [1, 4]\ngamma_t = 0.5\n";
        let s = ExchangeSchedule::parse(text).unwrap();
        assert_eq!(s.steps, vec![ScheduleStep { pair: [1, 4], gamma_t: 0.5 }]);
        assert_eq!(ExchangeSchedule::parse(&s.to_toml()).unwrap(), s);
        let out_of_range = text.replace("[1, 4]", "[1, 7]");
        match ExchangeSchedule::parse(&out_of_range) {
            Err(Error::ScheduleFile { field, .. }) => assert_eq!(field, "step[0].pair"),
            other => panic!("{other:?}"),
        }
        assert!(ExchangeSchedule::parse(&text.replace("gamma_t", "gamma")).is_err());
        assert!(ExchangeSchedule::parse(&text.replace("[1, 4]", "[2, 2]")).is_err());
        assert!(ExchangeSchedule::parse(&text.replace("= 2", "= 3")).is_err());
    }

    #[test]
    fn preparation_with_exact_phase() {
        let plan = preparation_plan(PI / 4.0, 1e-9).unwrap();
        assert_eq!(plan.k, 1);
        let p = prepare_singlet_protocol(&plan, true).unwrap();
        assert!((p.fidelity - 1.0).abs() < 1e-12);
        // Without the fix: |<S|(|ud> - i|du>)/sqrt2|^2 = |(1 + i)/2|^2
        let q = prepare_singlet_protocol(&plan, false).unwrap();
        assert!((q.fidelity - 0.5).abs() < 1e-12);
    }

    #[test]
    fn preparation_fidelity_is_quadratic_in_plan_error() {
        let theta = PI * crate::synth::golden_alpha();
        let plan = preparation_plan(theta, 1e-3).unwrap();
        let p = prepare_singlet_protocol(&plan, true).unwrap();
        let d = plan.achieved_error;
        // Relative singlet phase error d gives fidelity cos^2(d/2) with the fix.
        assert!((p.fidelity - (d / 2.0).cos().powi(2)).abs() < 1e-12);
        assert!(1.0 - p.fidelity <= 1e-6);
        let bad = crate::synth::SynthesisPlan { achieved_error: 0.5, ..plan };
        assert!(matches!(prepare_singlet_protocol(&bad, true), Err(Error::PlanQuality { .. })));
    }

    #[test]
    fn third_spin_statistics() {
        let zero = encode_bits(&[false]).unwrap();
        let one = encode_bits(&[true]).unwrap();
        assert_eq!(third_spin_down_probability(&zero).unwrap(), 0.0);
        assert!((third_spin_down_probability(&one).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let a = measure_third_spin(&one, 200_000, 7).unwrap();
        let b = measure_third_spin(&one, 200_000, 7).unwrap();
        assert_eq!(a, b);
        assert!((a.frequency - a.p_down).abs() < 4.0 * a.sigma);
        assert_eq!(measure_third_spin(&zero, 1000, 1).unwrap().downs, 0);
    }

    #[test]
    fn majority_vote_small_cases() {
        assert!((majority_vote_error(0.25, 1) - 0.25).abs() < 1e-15);
        // P(X >= 2) for Bin(3, p)
        let p: f64 = 1.0 / 3.0;
        assert!((majority_vote_error(p, 3) - (3.0 * p * p * (1.0 - p) + p.powi(3))).abs() < 1e-15);
        // tie at n = 2 counts half
        assert!((majority_vote_error(p, 2) - (p * p + p * (1.0 - p))).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn schedules_preserve_total_spin(
            steps in prop::collection::vec((1usize..=6, 1usize..=6, -6.0f64..6.0), 0..8)
        ) {
            let steps: Vec<_> = steps
                .into_iter()
                .filter(|(a, b, _)| a != b)
                .map(|(a, b, g)| ScheduleStep { pair: [a, b], gamma_t: g })
                .collect();
            let s = ExchangeSchedule::new("p", 2, steps).unwrap();
            let r = schedule_symmetry(&s, &GateSource::Exact).unwrap();
            prop_assert!(r.sz_commutator < 1e-10 && r.s2_commutator < 1e-10);
            prop_assert!(r.unitarity_defect < 1e-12);
        }
    }

    #[test]
    fn target_has_global_quarter_phase() {
        let t = heisenberg_target(1.0);
        assert!((t.diag[0] - Complex64::from_polar(1.0, 0.25)).norm() < 1e-15);
        assert!((t.diag[2] - Complex64::from_polar(1.0, -0.75)).norm() < 1e-15);
    }
}
