//! Two-particle wave-packet evolution and numerical phase extraction.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Lattice;
use crate::hamiltonian::{one_particle_h, spin_operators, two_particle_h, ModelParams, PairState, SparseHamiltonian, TwoParticleBasis};
use crate::momentum::Momentum;
use crate::phases::{channel_phase, circle_distance, RelativeKinematics};
use crate::propagate::{Chebyshev, PropagationStats, DEFAULT_TOLERANCE};
use crate::scatter::{packet_on_track, PacketShape};
use crate::sparse::{inner, norm_sqr, CsrMatrix};
use crate::spin::{Coupled, Spin};

/// Boundary probability above which a run is flagged.
pub const LEAKAGE_WARNING: f64 = 1e-3;
/// Boundary probability above which a run is rejected.
pub const LEAKAGE_ERROR: f64 = 1e-2;
/// Largest probability left within graph distance 2 for a finished collision.
pub const COLLISION_DONE: f64 = 1e-3;
/// Sites at the end of the line watched for leakage.
pub const END_WINDOW: usize = 4;
/// Relative distance the packets may travel past nominal separation while
/// waiting for the interaction region to empty.
const EXTENSION_SITES: f64 = 128.0;
/// Evolution is split into chunks of at most this duration for monitoring.
const CHECK_INTERVAL: f64 = 10.0;

pub const SPIN_UP: [Complex64; 2] = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
pub const SPIN_DOWN: [Complex64; 2] = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];

/// One wave packet: `length` sites of `track` starting at `start`, moving
/// along the track for positive `momentum`.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketSpec {
    pub track: Vec<usize>,
    pub start: usize,
    pub length: usize,
    pub momentum: Momentum,
    pub spin: [Complex64; 2],
    pub shape: PacketShape,
}

impl PacketSpec {
    pub fn center(&self) -> usize {
        self.track[self.start + self.length / 2]
    }

    pub fn support(&self) -> &[usize] {
        &self.track[self.start..self.start + self.length]
    }

    pub fn spatial(&self, vertex_count: usize) -> Result<Vec<Complex64>> {
        packet_on_track(vertex_count, &self.track, self.start, self.length, self.momentum, self.shape)
    }
}

/// Amplitudes over the two-fermion basis of [`TwoParticleBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct TwoParticleWavefunction {
    pub basis: TwoParticleBasis,
    pub params: ModelParams,
    pub amplitudes: Vec<Complex64>,
}

impl TwoParticleWavefunction {
    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amplitudes).sqrt()
    }

    /// `<self| P_c |other>` for the spin channel `c`. The channel basis is
    /// `(|a s, b s'> +- |a s', b s>)/sqrt 2` over pairs plus, for the
    /// singlet, the doubly occupied sites.
    pub fn sector_inner(&self, other: &TwoParticleWavefunction, channel: Coupled) -> Complex64 {
        let pairs = self.basis.pair_count();
        let (a, b) = (&self.amplitudes, &other.amplitudes);
        let mut acc: Complex64 = (0..pairs)
            .into_par_iter()
            .with_min_len(4096)
            .map(|p| {
                let x = channel_amplitude(&a[4 * p..4 * p + 4], channel);
                let y = channel_amplitude(&b[4 * p..4 * p + 4], channel);
                x.conj() * y
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum();
        if channel == Coupled::Singlet {
            acc += inner(&a[4 * pairs..], &b[4 * pairs..]);
        }
        acc
    }

    pub fn sector_weight(&self, channel: Coupled) -> f64 {
        self.sector_inner(self, channel).re
    }

    pub fn sector_weights(&self) -> [f64; 4] {
        Coupled::ALL.map(|c| self.sector_weight(c))
    }

    /// Expectation values of total `S_z` and `S^2`.
    pub fn spin_expectations(&self) -> (f64, f64) {
        let (sz, s2) = spin_operators(&self.basis);
        let n = norm_sqr(&self.amplitudes);
        let ev = |m: &CsrMatrix| inner(&self.amplitudes, &m.mul_vec(&self.amplitudes)).re / n;
        (ev(&sz), ev(&s2))
    }
}

fn channel_amplitude(u: &[Complex64], channel: Coupled) -> Complex64 {
    match channel {
        Coupled::TPlus => u[0],
        Coupled::TZero => (u[1] + u[2]) * FRAC_1_SQRT_2,
        Coupled::Singlet => (u[1] - u[2]) * FRAC_1_SQRT_2,
        Coupled::TMinus => u[3],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvolutionReport {
    pub duration: f64,
    /// Largest probability seen at the lattice boundary.
    pub boundary_probability: f64,
    pub leakage_warning: bool,
    pub norm_drift: f64,
    pub matvecs: usize,
    pub error_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseMeasurement {
    pub channel: Coupled,
    /// `Arg <reference| P_c |actual>` in (-pi, pi].
    pub theta: f64,
    /// `|<reference| P_c |actual>|` over the product of the channel norms.
    pub overlap: f64,
    /// Channel weight of the actual state.
    pub weight: f64,
}

/// A lattice with a two-particle Hamiltonian and the bookkeeping needed to
/// watch a collision.
#[derive(Debug, Clone)]
pub struct TwoParticleSystem {
    lattice: Lattice,
    params: ModelParams,
    h: SparseHamiltonian,
    basis: TwoParticleBasis,
    near: Vec<bool>,
    edge: Vec<bool>,
}

impl TwoParticleSystem {
    pub fn new(lattice: Lattice, params: ModelParams) -> Result<Self> {
        if params.t == 0.0 {
            return Err(Error::InvalidArgument("hopping t must be non-zero for dynamics".into()));
        }
        let h = two_particle_h(&lattice, &params)?;
        let basis = h.basis.expect("two-particle Hamiltonian carries its basis");
        let n = lattice.vertex_count();
        let on_edge: Vec<bool> = {
            let mut m = vec![false; n];
            lattice.boundary().iter().for_each(|&v| m[v] = true);
            m
        };
        let close: Vec<Vec<usize>> = (0..n).map(|v| {
            let d = lattice.distances_from(v, 2);
            (0..n).filter(|&u| d[u] != usize::MAX).collect()
        }).collect();
        let near = (0..basis.dim())
            .map(|i| match basis.state(i) {
                PairState::Pair { a, b, .. } => close[a].binary_search(&b).is_ok(),
                PairState::Double { .. } => true,
            })
            .collect();
        let edge = (0..basis.dim())
            .map(|i| match basis.state(i) {
                PairState::Pair { a, b, .. } => on_edge[a] || on_edge[b],
                PairState::Double { a } => on_edge[a],
            })
            .collect();
        Ok(TwoParticleSystem { lattice, params, h, basis, near, edge })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn basis(&self) -> TwoParticleBasis {
        self.basis
    }

    pub fn hamiltonian(&self) -> &SparseHamiltonian {
        &self.h
    }

    /// Antisymmetrised `f (x) g (x) c` projected onto the basis, not
    /// normalised. `c[2 s1 + s2]` is the spin amplitude with particle 1 (on
    /// `f`) in `s1` and particle 2 (on `g`) in `s2`.
    pub fn product_state(&self, f: &[Complex64], g: &[Complex64], c: [Complex64; 4]) -> Vec<Complex64> {
        let basis = self.basis;
        (0..basis.dim())
            .into_par_iter()
            .with_min_len(4096)
            .map(|i| {
                let [(a, sa), (b, sb)] = basis.operators(i);
                let (ia, ib) = (sa.index(), sb.index());
                f[a] * g[b] * c[2 * ia + ib] - f[b] * g[a] * c[2 * ib + ia]
            })
            .collect()
    }

    pub fn prepare(&self, p1: &PacketSpec, p2: &PacketSpec) -> Result<TwoParticleWavefunction> {
        self.prepare_pair(p1, p2, spin_product(p1.spin, p2.spin))
    }

    /// Two packets carrying an arbitrary (possibly entangled) spin pair; the
    /// `spin` fields of the specs are ignored.
    pub fn prepare_pair(&self, p1: &PacketSpec, p2: &PacketSpec, spins: [Complex64; 4]) -> Result<TwoParticleWavefunction> {
        let n = self.lattice.vertex_count();
        for p in [p1, p2] {
            if p.length < 2 {
                return Err(Error::PacketPlacement("packet length must be at least 2".into()));
            }
        }
        let f = p1.spatial(n)?;
        let g = p2.spatial(n)?;
        let need = p1.length.max(p2.length);
        let gap = self.support_distance(p1.support(), p2.support(), need);
        let mut amplitudes = self.product_state(&f, &g, spins);
        let nrm = norm_sqr(&amplitudes).sqrt();
        if nrm < 1e-12 {
            return Err(Error::PauliExclusion);
        }
        if gap < need {
            return Err(Error::PacketPlacement(format!("supports are {gap} sites apart, need at least {need}")));
        }
        amplitudes.par_iter_mut().for_each(|a| *a /= nrm);
        Ok(TwoParticleWavefunction { basis: self.basis, params: self.params, amplitudes })
    }

    /// Smallest graph distance between the two supports, capped at `cap`.
    fn support_distance(&self, s1: &[usize], s2: &[usize], cap: usize) -> usize {
        let mut best = cap;
        for &v in s1 {
            let d = self.lattice.distances_from(v, cap);
            for &u in s2 {
                best = best.min(d[u]);
            }
        }
        best
    }

    pub fn boundary_probability(&self, psi: &TwoParticleWavefunction) -> f64 {
        masked_weight(&psi.amplitudes, &self.edge)
    }

    /// Probability within graph distance 2 (the interaction region).
    pub fn interaction_occupancy(&self, psi: &TwoParticleWavefunction) -> f64 {
        masked_weight(&psi.amplitudes, &self.near)
    }

    /// `exp(-i H T)` applied in place. Leakage above [`LEAKAGE_ERROR`] is an error.
    pub fn evolve(&self, psi: &mut TwoParticleWavefunction, duration: f64) -> Result<EvolutionReport> {
        let before = psi.norm();
        let prop = Chebyshev::new(&self.h.matrix);
        let chunks = ((duration.abs() / CHECK_INTERVAL).ceil() as usize).max(1);
        let mut worst = self.boundary_probability(psi);
        let mut total = PropagationStats { steps: 0, matvecs: 0, error_bound: 0.0 };
        if duration != 0.0 {
            for _ in 0..chunks {
                let s = prop.evolve_in_place(&mut psi.amplitudes, duration / chunks as f64, DEFAULT_TOLERANCE / chunks as f64);
                total.matvecs += s.matvecs;
                total.error_bound += s.error_bound;
                worst = worst.max(self.boundary_probability(psi));
            }
        }
        if worst > LEAKAGE_ERROR {
            return Err(Error::BoundaryLeakage { leakage: worst });
        }
        Ok(EvolutionReport {
            duration,
            boundary_probability: worst,
            leakage_warning: worst > LEAKAGE_WARNING,
            norm_drift: (psi.norm() - before).abs(),
            matvecs: total.matvecs,
            error_bound: total.error_bound,
        })
    }

    /// The two packets evolved as free fermions (no hard core, no
    /// interaction) for `duration`, built from single-particle evolutions.
    pub fn free_reference(&self, p1: &PacketSpec, p2: &PacketSpec, duration: f64) -> Result<TwoParticleWavefunction> {
        self.free_reference_pair(p1, p2, spin_product(p1.spin, p2.spin), duration)
    }

    pub fn free_reference_pair(
        &self,
        p1: &PacketSpec,
        p2: &PacketSpec,
        spins: [Complex64; 4],
        duration: f64,
    ) -> Result<TwoParticleWavefunction> {
        let n = self.lattice.vertex_count();
        let h1 = one_particle_h(&self.lattice, self.params.t);
        let prop = Chebyshev::new(&h1.matrix);
        let (f0, g0) = (p1.spatial(n)?, p2.spatial(n)?);
        let (f, _) = prop.evolve(&f0, duration, DEFAULT_TOLERANCE);
        let (g, _) = prop.evolve(&g0, duration, DEFAULT_TOLERANCE);
        // Normalise as the unprojected antisymmetrised product would be.
        let scale = antisymmetrised_norm(&f0, &g0, spins);
        let amplitudes = self.product_state(&f, &g, spins).into_iter().map(|a| a / scale).collect();
        Ok(TwoParticleWavefunction { basis: self.basis, params: self.params.free(), amplitudes })
    }
}

/// `chi1 (x) chi2` in the layout used by [`TwoParticleSystem::product_state`].
pub fn spin_product(chi1: [Complex64; 2], chi2: [Complex64; 2]) -> [Complex64; 4] {
    [chi1[0] * chi2[0], chi1[0] * chi2[1], chi1[1] * chi2[0], chi1[1] * chi2[1]]
}

fn masked_weight(amps: &[Complex64], mask: &[bool]) -> f64 {
    amps.par_chunks(4096)
        .zip(mask.par_chunks(4096))
        .map(|(a, m)| a.iter().zip(m).filter(|(_, &m)| m).map(|(z, _)| z.norm_sqr()).sum::<f64>())
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

/// Norm of the antisymmetrised `f (x) g (x) c`:
/// `sqrt(|f|^2 |g|^2 |c|^2 - |<f|g>|^2 sum conj(c_st) c_ts)`.
fn antisymmetrised_norm(f: &[Complex64], g: &[Complex64], c: [Complex64; 4]) -> f64 {
    let c_norm: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    let swapped = (0..4).map(|i| c[i].conj() * c[2 * (i % 2) + i / 2]).sum::<Complex64>().re;
    (norm_sqr(f) * norm_sqr(g) * c_norm - inner(f, g).norm_sqr() * swapped).sqrt()
}

/// Phase of `actual` relative to `reference` in one spin channel. The
/// collision must be over (interaction-region occupancy below
/// [`COLLISION_DONE`]) and the overlap must be at least 0.5.
pub fn extract_phase(
    system: &TwoParticleSystem,
    actual: &TwoParticleWavefunction,
    reference: &TwoParticleWavefunction,
    channel: Coupled,
) -> Result<PhaseMeasurement> {
    let occupancy = system.interaction_occupancy(actual);
    if occupancy >= COLLISION_DONE {
        return Err(Error::CollisionIncomplete { occupancy });
    }
    let weight = actual.sector_weight(channel);
    let ref_weight = reference.sector_weight(channel);
    let ov = reference.sector_inner(actual, channel);
    let overlap = if weight > 0.0 && ref_weight > 0.0 { ov.norm() / (weight * ref_weight).sqrt() } else { 0.0 };
    if overlap < 0.5 {
        return Err(Error::UnreliablePhase { overlap });
    }
    Ok(PhaseMeasurement { channel, theta: ov.arg(), overlap, weight })
}

/// A head-on collision on an open line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineCollision {
    pub params: ModelParams,
    pub kinematics: RelativeKinematics,
    pub length: usize,
    pub shape: PacketShape,
    #[serde(skip)]
    pub spins: ([Complex64; 2], [Complex64; 2]),
    /// Lower bound on the number of sites.
    pub min_sites: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CollisionOutcome {
    pub sites: usize,
    pub duration: f64,
    pub report: EvolutionReport,
    pub interaction_occupancy: f64,
    /// Measured phases for every channel with weight above 1e-8.
    pub phases: Vec<PhaseMeasurement>,
    pub sz_drift: f64,
    pub s2_drift: f64,
    pub initial_weights: [f64; 4],
    pub final_weights: [f64; 4],
}

impl LineCollision {
    pub fn new(params: ModelParams, kinematics: RelativeKinematics, length: usize) -> Self {
        LineCollision {
            params,
            kinematics,
            length,
            shape: PacketShape::Square,
            spins: (SPIN_UP, SPIN_DOWN),
            min_sites: 512,
        }
    }

    fn speeds(&self) -> Result<(f64, f64)> {
        let v1 = self.kinematics.k1.group_velocity(self.params.t);
        let v2 = -self.kinematics.k2.group_velocity(self.params.t);
        if v1 <= 0.0 || v2 <= 0.0 {
            return Err(Error::InvalidArgument(
                "line collisions need the left packet moving right and the right packet moving left".into(),
            ));
        }
        Ok((v1, v2))
    }

    /// Extra evolution time allowed after nominal separation.
    pub fn extension_time(&self) -> Result<f64> {
        let (v1, v2) = self.speeds()?;
        Ok((2.0 * self.length as f64).max(EXTENSION_SITES) / (v1 + v2))
    }

    /// Line length, packets and the time at which the packets should have
    /// separated again.
    pub fn layout(&self) -> Result<(usize, PacketSpec, PacketSpec, f64)> {
        let (v1, v2) = self.speeds()?;
        let l = self.length as f64;
        let vr = v1 + v2;
        // centres start 2L + 1 apart (gap of L sites)
        let t_meet = (2.0 * l + 1.0) / vr;
        let duration = (4.0 * l + 1.0) / vr;
        // Square-packet tails leave the interaction region slowly; leave room
        // to keep evolving past the nominal separation time.
        let horizon = duration + (2.0 * l).max(EXTENSION_SITES) / vr;
        let margin = l + END_WINDOW as f64 + 8.0;
        let left = (v1 * t_meet).max(v2 * (horizon - t_meet)) + l / 2.0 + margin;
        let right = (v2 * t_meet).max(v1 * (horizon - t_meet)) + l / 2.0 + margin;
        let sites = self.min_sites.max((left + right).ceil() as usize);
        let meet = (sites as f64 * left / (left + right)).round();
        let c1 = (meet - v1 * t_meet).round() as usize;
        let track: Vec<usize> = (0..sites).collect();
        let start1 = c1 - self.length / 2;
        let start2 = start1 + 2 * self.length;
        let mk = |start, k: Momentum, spin| PacketSpec {
            track: track.clone(),
            start,
            length: self.length,
            momentum: k,
            spin,
            shape: self.shape,
        };
        Ok((
            sites,
            mk(start1, self.kinematics.k1, self.spins.0),
            mk(start2, self.kinematics.k2, self.spins.1),
            duration,
        ))
    }

    pub fn run(&self) -> Result<CollisionOutcome> {
        let (sites, p1, p2, duration) = self.layout()?;
        let (v1, v2) = self.speeds()?;
        let vr = v1 + v2;
        let l = self.length as f64;
        let extensions = ((2.0 * l).max(EXTENSION_SITES) / l).floor() as usize;
        let system = TwoParticleSystem::new(Lattice::line(sites, END_WINDOW), self.params)?;
        let mut psi = system.prepare(&p1, &p2)?;
        let initial_weights = psi.sector_weights();
        let (sz0, s20) = psi.spin_expectations();
        let mut report = system.evolve(&mut psi, duration)?;
        let mut total = duration;
        let step = l / vr;
        for _ in 0..extensions {
            if system.interaction_occupancy(&psi) < COLLISION_DONE {
                break;
            }
            let more = system.evolve(&mut psi, step)?;
            report.boundary_probability = report.boundary_probability.max(more.boundary_probability);
            report.leakage_warning |= more.leakage_warning;
            report.norm_drift += more.norm_drift;
            report.matvecs += more.matvecs;
            report.error_bound += more.error_bound;
            total += step;
        }
        report.duration = total;
        let reference = system.free_reference(&p1, &p2, total)?;
        let final_weights = psi.sector_weights();
        let mut phases = Vec::new();
        for c in Coupled::ALL {
            if final_weights[c.index()] > 1e-8 {
                phases.push(extract_phase(&system, &psi, &reference, c)?);
            }
        }
        let (sz1, s21) = psi.spin_expectations();
        Ok(CollisionOutcome {
            sites,
            duration: total,
            report,
            interaction_occupancy: system.interaction_occupancy(&psi),
            phases,
            sz_drift: (sz1 - sz0).abs(),
            s2_drift: (s21 - s20).abs(),
            initial_weights,
            final_weights,
        })
    }
}

impl CollisionOutcome {
    pub fn phase(&self, channel: Coupled) -> Option<&PhaseMeasurement> {
        self.phases.iter().find(|p| p.channel == channel)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub length: usize,
    pub sites: usize,
    pub theta_measured: f64,
    pub theta_analytic: f64,
    pub phase_error: f64,
    /// `1 - |<reference|actual>|` in the singlet channel.
    pub overlap_deficit: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingStudy {
    pub rows: Vec<ScalingRow>,
    pub deficit_decreasing: bool,
    pub error_decreasing: bool,
    /// Least-squares slope of `ln(deficit)` against `ln(L)`.
    pub deficit_slope: f64,
}

/// Singlet-channel phase error and overlap deficit over ascending packet
/// lengths. Runs the lengths concurrently.
pub fn scaling_study(params: ModelParams, kin: RelativeKinematics, lengths: &[usize], shape: PacketShape) -> Result<ScalingStudy> {
    if lengths.len() < 3 {
        return Err(Error::InvalidArgument("a scaling study needs at least 3 packet lengths".into()));
    }
    if lengths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("packet lengths must be strictly ascending".into()));
    }
    let analytic = channel_phase(&params, &kin, Coupled::Singlet)?;
    let rows: Vec<Result<ScalingRow>> = lengths
        .par_iter()
        .map(|&l| {
            let mut run = LineCollision::new(params, kin, l);
            run.shape = shape;
            let out = run.run()?;
            let m = out
                .phase(Coupled::Singlet)
                .ok_or_else(|| Error::InvalidArgument("no singlet weight in the collision".into()))?;
            Ok(ScalingRow {
                length: l,
                sites: out.sites,
                theta_measured: m.theta,
                theta_analytic: analytic,
                phase_error: circle_distance(m.theta, analytic),
                overlap_deficit: 1.0 - m.overlap,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let deficit_decreasing = rows.windows(2).all(|w| w[1].overlap_deficit < w[0].overlap_deficit);
    let error_decreasing = rows.windows(2).all(|w| w[1].phase_error < w[0].phase_error);
    let deficit_slope = log_log_slope(
        &rows.iter().map(|r| r.length as f64).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.overlap_deficit).collect::<Vec<_>>(),
    );
    Ok(ScalingStudy { rows, deficit_decreasing, error_decreasing, deficit_slope })
}

pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Spin label of a single-spin state that is exactly up or down.
pub fn pure_spin(chi: [Complex64; 2]) -> Option<Spin> {
    if chi[1] == Complex64::new(0.0, 0.0) {
        Some(Spin::Up)
    } else if chi[0] == Complex64::new(0.0, 0.0) {
        Some(Spin::Down)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn small_line(n: usize, params: ModelParams) -> TwoParticleSystem {
        TwoParticleSystem::new(Lattice::line(n, END_WINDOW), params).unwrap()
    }

    fn spec(n: usize, start: usize, len: usize, k: f64, spin: [Complex64; 2]) -> PacketSpec {
        PacketSpec {
            track: (0..n).collect(),
            start,
            length: len,
            momentum: Momentum::new(k),
            spin,
            shape: PacketShape::Square,
        }
    }

    #[test]
    fn pauli_and_placement_errors() {
        let sys = small_line(40, ModelParams::tj(1.0, 1.0));
        let a = spec(40, 5, 4, 0.5, SPIN_UP);
        assert!(matches!(sys.prepare(&a, &a), Err(Error::PauliExclusion)));
        let near = spec(40, 10, 4, -0.5, SPIN_DOWN);
        assert!(matches!(sys.prepare(&a, &near), Err(Error::PacketPlacement(_))));
        let far = spec(40, 20, 4, -0.5, SPIN_DOWN);
        let psi = sys.prepare(&a, &far).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn up_down_splits_evenly() {
        let sys = small_line(40, ModelParams::hubbard(1.0, 2.0));
        let psi = sys.prepare(&spec(40, 2, 6, 0.5, SPIN_UP), &spec(40, 20, 6, -0.5, SPIN_DOWN)).unwrap();
        let w = psi.sector_weights();
        assert!((w[Coupled::Singlet.index()] - 0.5).abs() < 1e-12);
        assert!((w[Coupled::TZero.index()] - 0.5).abs() < 1e-12);
        assert!(w[Coupled::TPlus.index()].abs() < 1e-15);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn free_reference_equals_free_evolution() {
        // With U = 0 the Hubbard evolution is the free-fermion reference itself.
        let n = 100;
        let sys = small_line(n, ModelParams::hubbard(1.0, 0.0));
        let p1 = spec(n, 30, 8, PI / 4.0, SPIN_UP);
        let p2 = spec(n, 50, 8, -PI / 2.0, SPIN_DOWN);
        let mut psi = sys.prepare(&p1, &p2).unwrap();
        sys.evolve(&mut psi, 6.0).unwrap();
        let reference = sys.free_reference(&p1, &p2, 6.0).unwrap();
        let diff: f64 = psi.amplitudes.iter().zip(&reference.amplitudes).map(|(a, b)| (a - b).norm_sqr()).sum();
        assert!(diff.sqrt() < 1e-10);
    }

    #[test]
    fn zero_duration_and_conservation() {
        let n = 100;
        let sys = small_line(n, ModelParams::xxz(1.0, 0.7, 1.9));
        let p1 = spec(n, 34, 6, 0.9, [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]);
        let p2 = spec(n, 52, 6, -1.2, SPIN_DOWN);
        let psi0 = sys.prepare(&p1, &p2).unwrap();
        let mut psi = psi0.clone();
        sys.evolve(&mut psi, 0.0).unwrap();
        assert_eq!(psi, psi0);
        let (sz0, _) = psi.spin_expectations();
        let rep = sys.evolve(&mut psi, 8.0).unwrap();
        assert!(rep.norm_drift < 1e-10);
        let (sz1, _) = psi.spin_expectations();
        assert!((sz1 - sz0).abs() < 1e-10);
    }

    #[test]
    fn singlet_stays_singlet() {
        let n = 100;
        let sys = small_line(n, ModelParams::tj(1.0, 2.5));
        let s = FRAC_1_SQRT_2;
        // (up, down) minus (down, up) on the same spatial pair gives a pure singlet
        let p1 = spec(n, 34, 6, 0.9, SPIN_UP);
        let p2 = spec(n, 52, 6, -1.2, SPIN_DOWN);
        let mut a = sys.prepare(&p1, &p2).unwrap();
        let b = sys
            .prepare(&PacketSpec { spin: SPIN_DOWN, ..p1.clone() }, &PacketSpec { spin: SPIN_UP, ..p2.clone() })
            .unwrap();
        for (x, y) in a.amplitudes.iter_mut().zip(&b.amplitudes) {
            *x = (*x - *y) * s;
        }
        let w0 = a.sector_weights();
        assert!((w0[Coupled::Singlet.index()] - 1.0).abs() < 1e-12);
        sys.evolve(&mut a, 8.0).unwrap();
        let w = a.sector_weights();
        assert!(w[Coupled::TZero.index()] < 1e-20 && w[Coupled::TPlus.index()] < 1e-20);
    }

    #[test]
    fn leakage_is_reported() {
        let n = 30;
        let sys = small_line(n, ModelParams::tj(1.0, 0.0));
        let p1 = spec(n, 4, 4, -PI / 2.0, SPIN_UP);
        let p2 = spec(n, 20, 4, PI / 2.0, SPIN_UP);
        let mut psi = sys.prepare(&p1, &p2).unwrap();
        assert!(matches!(sys.evolve(&mut psi, 6.0), Err(Error::BoundaryLeakage { .. })));
    }

    #[test]
    fn hard_core_collision_gives_pi() {
        let kin = RelativeKinematics::head_on(PI / 4.0, PI / 2.0).unwrap();
        let out = LineCollision::new(ModelParams::tj(1.0, 0.0), kin, 16).run().unwrap();
        let s = out.phase(Coupled::Singlet).unwrap();
        assert!(circle_distance(s.theta, PI) < 0.3, "{s:?}");
        let t0 = out.phase(Coupled::TZero).unwrap();
        assert!(t0.theta.abs() < 1e-6 && t0.overlap > 1.0 - 1e-6, "{t0:?}");
        assert!(out.sz_drift < 1e-10 && out.s2_drift < 1e-10);
    }

    #[test]
    fn free_hubbard_collision_gives_zero() {
        let kin = RelativeKinematics::head_on(PI / 4.0, PI / 2.0).unwrap();
        let out = LineCollision::new(ModelParams::hubbard(1.0, 0.0), kin, 16).run().unwrap();
        let s = out.phase(Coupled::Singlet).unwrap();
        assert!(s.theta.abs() < 1e-8 && s.overlap > 1.0 - 1e-8);
    }

    #[test]
    fn scaling_study_rejects_short_lists() {
        let kin = RelativeKinematics::head_on(PI / 4.0, PI / 2.0).unwrap();
        assert!(scaling_study(ModelParams::tj(1.0, 1.0), kin, &[16], PacketShape::Square).is_err());
        assert!(scaling_study(ModelParams::tj(1.0, 1.0), kin, &[32, 16, 64], PacketShape::Square).is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let x = [16.0, 32.0, 64.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.75)).collect();
        assert!((log_log_slope(&x, &y) + 0.75).abs() < 1e-12);
    }
}
