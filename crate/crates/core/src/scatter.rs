//! Single-particle stationary scattering and wave-packet propagation.
//!
//! On rail `j` the stationary state at distance `d` from its terminal is
//! `delta_{j,in} e^{-ikd} + S_{j,in} e^{ikd}` (the terminal itself is
//! `d = 0`). Eliminating the rails leaves the core equation
//! `(A - 2cos k + sum_j e^{ik} P_{t_j}) psi = 2i sin k e_{t_in}`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{RailedGraph, ScatterGraph};
use crate::hamiltonian::one_particle_h;
use crate::momentum::Momentum;
use crate::propagate::{Chebyshev, DEFAULT_TOLERANCE};
use crate::sparse::{norm, norm_sqr};

/// Scattering amplitudes between rails at one momentum. `entries[(out, in)]`
/// uses zero-based terminal positions, so the terminal labelled 1 is index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SMatrix {
    pub momentum: Momentum,
    pub entries: DMatrix<Complex64>,
}

impl SMatrix {
    pub fn terminals(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, out: usize, inp: usize) -> Complex64 {
        self.entries[(out, inp)]
    }

    /// `max |(S^dagger S - I)_ij|`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.terminals();
        let prod = self.entries.adjoint() * &self.entries - DMatrix::<Complex64>::identity(n, n);
        prod.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// S-matrix of `core` with rails on its terminals at momentum `k`.
/// The hopping strength drops out of the stationary problem; `t` only has to be non-zero.
pub fn s_matrix(core: &ScatterGraph, k: Momentum, t: f64) -> Result<SMatrix> {
    if t == 0.0 {
        return Err(Error::InvalidArgument("hopping t must be non-zero".into()));
    }
    if !k.is_propagating() {
        return Err(Error::InvalidArgument(format!("momentum {k} is not propagating (need 0 < |k| < pi)")));
    }
    let kv = k.value();
    let n = core.vertex_count();
    let terms = core.terminals();
    let lambda = 2.0 * kv.cos();
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for &(u, v) in core.edges() {
        m[(u, v)] += Complex64::new(1.0, 0.0);
        m[(v, u)] += Complex64::new(1.0, 0.0);
    }
    let outgoing = Complex64::from_polar(1.0, kv);
    for i in 0..n {
        m[(i, i)] -= Complex64::new(lambda, 0.0);
    }
    for &tv in terms {
        m[(tv, tv)] += outgoing;
    }
    let drive = Complex64::new(0.0, 2.0 * kv.sin());
    let mut rhs = DMatrix::<Complex64>::zeros(n, terms.len());
    for (col, &tin) in terms.iter().enumerate() {
        rhs[(tin, col)] = drive;
    }
    let psi = solve_core(m, &rhs, kv)?;
    let mut entries = DMatrix::<Complex64>::zeros(terms.len(), terms.len());
    for col in 0..terms.len() {
        for (row, &tout) in terms.iter().enumerate() {
            let incident = if row == col { 1.0 } else { 0.0 };
            entries[(row, col)] = psi[(tout, col)] - incident;
        }
    }
    Ok(SMatrix { momentum: k, entries })
}

/// Solve the core system. For propagating `k` a null vector of the (complex
/// symmetric) core matrix vanishes on every terminal, so bound states that
/// sit inside the band decouple: the system stays consistent and the terminal
/// amplitudes are unique. Those cases go through a pseudo-inverse; anything
/// that still fails to satisfy the equations is reported as singular.
fn solve_core(m: DMatrix<Complex64>, rhs: &DMatrix<Complex64>, kv: f64) -> Result<DMatrix<Complex64>> {
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let svd = m.clone().svd(true, true);
    let smallest = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    let psi = if smallest > 1e-9 * scale {
        m.clone().lu().solve(rhs).ok_or_else(|| Error::SingularScattering {
            k: kv,
            detail: "LU factorisation broke down".into(),
        })?
    } else {
        svd.solve(rhs, 1e-9 * scale).map_err(|e| Error::SingularScattering { k: kv, detail: e.to_string() })?
    };
    let residual = (&m * &psi - rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !residual.is_finite() || residual > 1e-9 * scale {
        return Err(Error::SingularScattering {
            k: kv,
            detail: format!("no consistent stationary state (residual {residual:e}, smallest singular value {smallest:e})"),
        });
    }
    Ok(psi)
}

#[derive(Debug, Clone, Serialize)]
pub struct SwitchReport {
    pub passed: bool,
    pub k_low: f64,
    pub k_high: f64,
    pub tolerance: f64,
    /// `|S_31(k_low)|`
    pub s31_low: f64,
    /// `|S_32(k_high)|`
    pub s32_high: f64,
    /// `|S_21|` at `k_low` and `k_high`
    pub s21_low: f64,
    pub s21_high: f64,
    pub unitarity_defect: f64,
    pub note: Option<String>,
}

/// Check perfect routing 1 <-> 3 at `k_low` and 2 <-> 3 at `k_high`, with
/// terminals 1 and 2 isolated from each other at both momenta.
pub fn verify_switch(core: &ScatterGraph, k_low: Momentum, k_high: Momentum, tol: f64) -> Result<SwitchReport> {
    let mut report = SwitchReport {
        passed: false,
        k_low: k_low.value(),
        k_high: k_high.value(),
        tolerance: tol,
        s31_low: 0.0,
        s32_high: 0.0,
        s21_low: 0.0,
        s21_high: 0.0,
        unitarity_defect: 0.0,
        note: None,
    };
    if core.terminals().len() != 3 {
        report.note = Some(format!("expected 3 terminals, found {}", core.terminals().len()));
        return Ok(report);
    }
    let low = s_matrix(core, k_low, 1.0)?;
    let high = s_matrix(core, k_high, 1.0)?;
    report.s31_low = low.get(2, 0).norm();
    report.s32_high = high.get(2, 1).norm();
    report.s21_low = low.get(1, 0).norm();
    report.s21_high = high.get(1, 0).norm();
    report.unitarity_defect = low.unitarity_defect().max(high.unitarity_defect());
    report.passed = report.s31_low >= 1.0 - tol
        && report.s32_high >= 1.0 - tol
        && report.s21_low <= tol
        && report.s21_high <= tol;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PacketShape {
    /// Constant modulus over `length` sites.
    Square,
    /// Gaussian envelope with standard deviation `length / 4` sites,
    /// truncated to `length` sites.
    Gaussian,
}

impl std::str::FromStr for PacketShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(PacketShape::Square),
            "gaussian" => Ok(PacketShape::Gaussian),
            other => Err(Error::InvalidArgument(format!("unknown packet shape `{other}`"))),
        }
    }
}

/// Envelope-times-plane-wave amplitudes for positions `0..length` along a
/// track, normalised. Position `s` carries phase `e^{iks}`.
pub fn packet_profile(length: usize, k: Momentum, shape: PacketShape) -> Vec<Complex64> {
    let centre = (length as f64 - 1.0) / 2.0;
    let sigma = length as f64 / 4.0;
    let mut amps: Vec<Complex64> = (0..length)
        .map(|s| {
            let env = match shape {
                PacketShape::Square => 1.0,
                PacketShape::Gaussian => (-((s as f64 - centre) / sigma).powi(2) / 2.0).exp(),
            };
            Complex64::from_polar(env, k.value() * s as f64)
        })
        .collect();
    let n = norm(&amps);
    amps.iter_mut().for_each(|a| *a /= n);
    amps
}

/// A normalised packet placed on `track` (a list of vertex indices, each
/// adjacent to the next), occupying track positions `start..start + length`.
pub fn packet_on_track(
    vertex_count: usize,
    track: &[usize],
    start: usize,
    length: usize,
    k: Momentum,
    shape: PacketShape,
) -> Result<Vec<Complex64>> {
    if length < 2 || start + length > track.len() {
        return Err(Error::PacketPlacement(format!(
            "packet of length {length} at {start} does not fit on a track of {} sites",
            track.len()
        )));
    }
    let mut psi = vec![Complex64::new(0.0, 0.0); vertex_count];
    for (s, a) in packet_profile(length, k, shape).into_iter().enumerate() {
        psi[track[start + s]] = a;
    }
    Ok(psi)
}

#[derive(Debug, Clone)]
pub struct Evolved1p {
    pub state: Vec<Complex64>,
    /// Largest probability seen in the rail-end windows over the run.
    pub boundary_probability: f64,
    /// Set when `boundary_probability` exceeds `1e-3`.
    pub contaminated: bool,
}

/// Sites at the far end of each rail watched for truncation artefacts.
pub const RAIL_END_WINDOW: usize = 4;
const BOUNDARY_WARNING: f64 = 1e-3;
const BOUNDARY_CHECKS: usize = 16;

/// `exp(-i H T) psi0` for `H = -t A` on the railed graph.
pub fn evolve_1p(g: &RailedGraph, psi0: &[Complex64], duration: f64, t: f64) -> Result<Evolved1p> {
    if psi0.len() != g.vertex_count() {
        return Err(Error::InvalidArgument(format!(
            "state has {} entries, graph has {} vertices",
            psi0.len(),
            g.vertex_count()
        )));
    }
    if (norm(psi0) - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument("initial state must be normalised".into()));
    }
    let lattice = g.lattice(RAIL_END_WINDOW);
    let h = one_particle_h(&lattice, t);
    let prop = Chebyshev::new(&h.matrix);
    let boundary = lattice.boundary().to_vec();
    let watch = |s: &[Complex64]| boundary.iter().map(|&v| s[v].norm_sqr()).sum::<f64>();
    let mut state = psi0.to_vec();
    let mut worst = watch(&state);
    let chunks = if duration == 0.0 { 0 } else { BOUNDARY_CHECKS };
    for _ in 0..chunks {
        prop.evolve_in_place(&mut state, duration / chunks as f64, DEFAULT_TOLERANCE / chunks as f64);
        worst = worst.max(watch(&state));
    }
    Ok(Evolved1p { state, boundary_probability: worst, contaminated: worst > BOUNDARY_WARNING })
}

/// Probability found on each rail after sending a packet of length `length`
/// and momentum `k` into terminal `input` and letting it scatter off the core.
pub fn packet_routing(core: &ScatterGraph, k: Momentum, input: usize, length: usize, shape: PacketShape) -> Result<Vec<f64>> {
    let speed = k.group_velocity(1.0).abs();
    if speed < 1e-6 {
        return Err(Error::InvalidArgument("packet does not move".into()));
    }
    let rail = 7 * length;
    let g = crate::graph::attach_rails(core, rail)?;
    let track = g.incoming_track(input);
    // Leading edge 1.5 L from the terminal; run until the centre is about 2.5 L past it.
    let start = track.len() - 1 - (3 * length) / 2 - length;
    let psi0 = packet_on_track(g.vertex_count(), &track, start, length, Momentum::new(k.value().abs()), shape)?;
    let travel = 2.0 * length as f64 + 2.5 * length as f64;
    let out = evolve_1p(&g, &psi0, travel / speed, 1.0)?;
    Ok((0..g.rail_count()).map(|j| g.rail(j).map(|v| out.state[v].norm_sqr()).sum()).collect())
}

/// Expected displacement of a packet's centre after `duration`: `2 t sin k * T`.
pub fn center_of_mass(state: &[Complex64], track: &[usize]) -> f64 {
    let total: f64 = track.iter().map(|&v| state[v].norm_sqr()).sum();
    track.iter().enumerate().map(|(s, &v)| s as f64 * state[v].norm_sqr()).sum::<f64>() / total
}

/// The momenta used to exercise S-matrix properties.
pub const PROBE_MOMENTA: [f64; 5] = [PI / 8.0, PI / 4.0, PI / 3.0, PI / 2.0, 3.0 * PI / 4.0];

pub fn probability(state: &[Complex64]) -> f64 {
    norm_sqr(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{attach_rails, build_path};
    use crate::switch::{catalog_switch, DEFAULT_SWITCH};

    fn bare_line() -> ScatterGraph {
        ScatterGraph::new(1, [], vec![0, 0]).unwrap()
    }

    #[test]
    fn bare_line_transmits() {
        for &k in &PROBE_MOMENTA {
            let s = s_matrix(&bare_line(), Momentum::new(k), 1.0).unwrap();
            assert!((s.get(1, 0).norm() - 1.0).abs() < 1e-14);
            assert!(s.get(0, 0).norm() < 1e-14);
        }
    }

    /// Oracle for a path core: transfer across n vertices of free line is a
    /// pure phase e^{ik(n-1)} with no reflection.
    #[test]
    fn path_core_is_transparent() {
        for n in 2..6 {
            let g = build_path(n).unwrap();
            for &k in &PROBE_MOMENTA {
                let s = s_matrix(&g, Momentum::new(k), 1.0).unwrap();
                let want = Complex64::from_polar(1.0, k * (n as f64 - 1.0));
                assert!((s.get(1, 0) - want).norm() < 1e-12, "n={n} k={k}");
                assert!(s.get(0, 0).norm() < 1e-12);
            }
        }
    }

    /// A single pendant vertex on a line acts as an energy-dependent
    /// on-site potential 1/lambda at the junction.
    #[test]
    fn side_coupled_vertex_matches_self_energy_oracle() {
        let g = ScatterGraph::new(2, [(0, 1)], vec![0, 0]).unwrap();
        for &k in &PROBE_MOMENTA {
            let lam = 2.0 * k.cos();
            if lam.abs() < 1e-9 {
                // pendant vertex at zero energy blocks completely
                let s = s_matrix(&g, Momentum::new(k), 1.0).unwrap();
                assert!(s.get(1, 0).norm() < 1e-12);
                continue;
            }
            // Effective on-site potential sigma = 1/lambda at the junction:
            // r = -sigma / (2i sin k + sigma), tau = 1 + r.
            let sigma = Complex64::new(1.0 / lam, 0.0);
            let r = -sigma / (Complex64::new(0.0, 2.0 * k.sin()) + sigma);
            let s = s_matrix(&g, Momentum::new(k), 1.0).unwrap();
            assert!((s.get(0, 0) - r).norm() < 1e-12);
            assert!((s.get(1, 0) - (r + 1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn unitary_and_time_reversal_symmetric() {
        let graphs = [bare_line(), build_path(4).unwrap(), catalog_switch(DEFAULT_SWITCH).unwrap()];
        for g in &graphs {
            for &k in &PROBE_MOMENTA {
                let s = s_matrix(g, Momentum::new(k), 1.0).unwrap();
                assert!(s.unitarity_defect() < 1e-10);
                let sm = s_matrix(g, Momentum::new(-k), 1.0).unwrap();
                let diff = (&s.entries - sm.entries.map(|z| z.conj())).iter().map(|z| z.norm()).fold(0.0, f64::max);
                assert!(diff < 1e-10);
            }
        }
    }

    #[test]
    fn switch_routes_by_momentum() {
        let sw = catalog_switch(DEFAULT_SWITCH).unwrap();
        let r = verify_switch(&sw, Momentum::new(PI / 4.0), Momentum::new(PI / 2.0), 1e-10).unwrap();
        assert!(r.passed, "{r:?}");
        let r = verify_switch(&sw, Momentum::new(PI / 3.0), Momentum::new(PI / 2.0), 1e-10).unwrap();
        assert!(!r.passed);
        assert!((r.s21_low - 0.5).abs() < 1e-10, "{r:?}");
        let fake = build_path(3).unwrap();
        let r = verify_switch(&fake, Momentum::new(PI / 4.0), Momentum::new(PI / 2.0), 1e-10).unwrap();
        assert!(!r.passed && r.note.is_some());
    }

    #[test]
    fn decoupled_bound_state_in_band() {
        // A triangle hanging off the line through vertex 0 has the eigenvector
        // (0, 1, -1) at A-eigenvalue -1, i.e. k = 2pi/3, which never touches the
        // rail. Only the symmetric mode of the 1-2 dimer couples, with self
        // energy 2 / (lambda - 1).
        let g = ScatterGraph::new(3, [(0, 1), (0, 2), (1, 2)], vec![0, 0]).unwrap();
        let k = 2.0 * PI / 3.0;
        let s = s_matrix(&g, Momentum::new(k), 1.0).unwrap();
        let lam = 2.0 * k.cos();
        let sigma = Complex64::new(2.0 / (lam - 1.0), 0.0);
        let r = -sigma / (Complex64::new(0.0, 2.0 * k.sin()) + sigma);
        assert!((s.get(0, 0) - r).norm() < 1e-10);
        assert!(s.unitarity_defect() < 1e-10);
    }

    #[test]
    fn packet_moves_at_group_velocity() {
        let g = attach_rails(&build_path(1).unwrap(), 399).unwrap();
        let track = g.incoming_track(0);
        for k in [PI / 4.0, PI / 2.0, 1.0] {
            let psi = packet_on_track(g.vertex_count(), &track, 150, 60, Momentum::new(k), PacketShape::Square).unwrap();
            let x0 = center_of_mass(&psi, &track);
            let dur = 60.0;
            let out = evolve_1p(&g, &psi, dur, 1.0).unwrap();
            let v = (center_of_mass(&out.state, &track) - x0) / dur;
            assert!((v / (2.0 * k.sin()) - 1.0).abs() < 0.02, "k={k} v={v}");
            assert!((norm(&out.state) - 1.0).abs() < 1e-10, "{}", norm(&out.state) - 1.0);
            assert!(!out.contaminated);
        }
    }

    #[test]
    fn zero_duration_is_identity() {
        let g = attach_rails(&build_path(2).unwrap(), 10).unwrap();
        let track = g.incoming_track(0);
        let psi = packet_on_track(g.vertex_count(), &track, 0, 5, Momentum::new(0.3), PacketShape::Gaussian).unwrap();
        let out = evolve_1p(&g, &psi, 0.0, 1.0).unwrap();
        assert_eq!(out.state, psi);
    }

    #[test]
    fn contamination_flag() {
        let g = attach_rails(&build_path(2).unwrap(), 10).unwrap();
        let track = g.incoming_track(0);
        let psi = packet_on_track(g.vertex_count(), &track, 5, 4, Momentum::new(-PI / 2.0), PacketShape::Square).unwrap();
        let out = evolve_1p(&g, &psi, 5.0, 1.0).unwrap();
        assert!(out.contaminated);
    }

    #[test]
    fn switch_packet_routing_improves_with_length() {
        let sw = catalog_switch(DEFAULT_SWITCH).unwrap();
        let mut last = f64::INFINITY;
        for l in [16, 32, 64] {
            let probs = packet_routing(&sw, Momentum::new(PI / 4.0), 0, l, PacketShape::Square).unwrap();
            let miss = 1.0 - probs[2];
            assert!(miss < last, "L={l}: {miss} vs {last}");
            last = miss;
        }
        assert!(last < 0.1, "{last}");
    }
}
