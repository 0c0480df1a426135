//! Closed-form two-particle scattering amplitudes and the spin gates they
//! induce.
//!
//! Two particles with momenta `k1` (the left one) and `k2` (the right one)
//! reduce to one particle in the relative coordinate `r` with hopping
//! `c = 2 cos(p1/2)` and energy `-2c cos p2`. Amplitudes below are the ratio
//! of the outgoing to the incoming wave in `e^{i p2 r} + R e^{-i p2 r}`.
//! The symmetric spatial channel pairs with the spin singlet, the
//! antisymmetric one with the triplets.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{Model, ModelParams};
use crate::momentum::Momentum;
use crate::spin::{to_coupled, to_uncoupled, Coupled};

/// Denominators smaller than this are treated as singular.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelativeKinematics {
    pub k1: Momentum,
    pub k2: Momentum,
}

impl RelativeKinematics {
    /// `k1` belongs to the particle on the left, `k2` to the one on the right.
    pub fn new(k1: Momentum, k2: Momentum) -> Result<Self> {
        let kin = RelativeKinematics { k1, k2 };
        if kin.half_hopping().abs() < SINGULAR_THRESHOLD {
            return Err(Error::InvalidArgument(format!(
                "cos(p1/2) vanishes for k1 = {k1}, k2 = {k2}"
            )));
        }
        Ok(kin)
    }

    /// Packets with speeds set by `|k_left|` and `|k_right|` moving toward
    /// each other: the left one moves right, the right one moves left.
    pub fn head_on(k_left: f64, k_right: f64) -> Result<Self> {
        Self::new(Momentum::new(k_left.abs()), Momentum::new(-k_right.abs()))
    }

    pub fn p1(&self) -> f64 {
        -(self.k1.value() + self.k2.value())
    }

    pub fn p2(&self) -> f64 {
        (self.k2.value() - self.k1.value()) / 2.0
    }

    fn half_hopping(&self) -> f64 {
        (self.p1() / 2.0).cos()
    }

    /// Hopping in the relative coordinate, `2 cos(p1/2)`.
    pub fn relative_hopping(&self) -> f64 {
        2.0 * self.half_hopping()
    }

    /// True when the left particle is faster than the right one, so that the
    /// pair is actually approaching and the amplitudes describe a collision.
    pub fn is_incoming(&self) -> bool {
        self.half_hopping() * self.p2().sin() < 0.0
    }

    /// Energy of the pair, `-2t (cos k1 + cos k2)`.
    pub fn energy(&self, t: f64) -> f64 {
        self.k1.energy(t) + self.k2.energy(t)
    }
}

/// Diagonal two-spin unitary in the coupled basis `{T+, T0, S, T-}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseGate {
    pub diag: [Complex64; 4],
}

impl PhaseGate {
    pub fn identity() -> Self {
        PhaseGate { diag: [Complex64::new(1.0, 0.0); 4] }
    }

    /// `diag(1, e^{i theta1}, e^{i theta2}, 1)`.
    pub fn from_phases(theta_t0: f64, theta_s: f64) -> Self {
        let one = Complex64::new(1.0, 0.0);
        PhaseGate {
            diag: [one, Complex64::from_polar(1.0, theta_t0), Complex64::from_polar(1.0, theta_s), one],
        }
    }

    /// `diag(1, 1, e^{i theta}, 1)`.
    pub fn singlet(theta: f64) -> Self {
        Self::from_phases(0.0, theta)
    }

    pub fn singlet_phase(&self) -> f64 {
        self.diag[2].arg()
    }

    pub fn compose(&self, other: &PhaseGate) -> PhaseGate {
        let mut diag = self.diag;
        for (d, o) in diag.iter_mut().zip(other.diag) {
            *d *= o;
        }
        PhaseGate { diag }
    }

    /// `G^k`.
    pub fn power(&self, k: u64) -> PhaseGate {
        let mut diag = self.diag;
        for d in diag.iter_mut() {
            // Raising the phase angle avoids error growth in repeated products.
            *d = Complex64::from_polar(1.0, d.arg() * k as f64) * d.norm().powf(k as f64);
        }
        PhaseGate { diag }
    }

    /// Largest `| |d_i| - 1 |`.
    pub fn unitarity_defect(&self) -> f64 {
        self.diag.iter().map(|d| (d.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Sup-norm distance, equal to the operator norm for diagonal gates.
    pub fn distance(&self, other: &PhaseGate) -> f64 {
        self.diag.iter().zip(other.diag).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// The gate as a 4x4 matrix in the uncoupled basis `{uu, ud, du, dd}`.
    pub fn uncoupled_matrix(&self) -> [[Complex64; 4]; 4] {
        let mut out = [[Complex64::new(0.0, 0.0); 4]; 4];
        for col in 0..4 {
            let mut e = [Complex64::new(0.0, 0.0); 4];
            e[col] = Complex64::new(1.0, 0.0);
            let mut c = to_coupled(e);
            for (ci, d) in c.iter_mut().zip(self.diag) {
                *ci *= d;
            }
            let u = to_uncoupled(c);
            for row in 0..4 {
                out[row][col] = u[row];
            }
        }
        out
    }
}

fn checked_ratio(num: Complex64, den: Complex64) -> Result<Complex64> {
    let magnitude = den.norm();
    if magnitude < SINGULAR_THRESHOLD {
        return Err(Error::SingularPhase { magnitude });
    }
    Ok(num / den)
}

/// t-J singlet amplitudes: `T = 0` and
/// `R = -e^{2ip2} (J - c e^{-ip2}) / (J - c e^{ip2})` with `c = 2 cos(p1/2)`.
pub fn tj_reflection(kin: &RelativeKinematics, j: f64) -> Result<(Complex64, Complex64)> {
    let c = kin.relative_hopping();
    let z = Complex64::from_polar(1.0, kin.p2());
    let r = -z * z * checked_ratio(j - c / z, j - c * z)?;
    Ok((r, Complex64::new(0.0, 0.0)))
}

/// Dilute Hubbard singlet amplitude `T + R = 1 - 2U / (U + 4i cos(p1/2) sin p2)`.
pub fn hubbard_phase(kin: &RelativeKinematics, u: f64) -> Result<Complex64> {
    let den = Complex64::new(u, 4.0 * (kin.p1() / 2.0).cos() * kin.p2().sin());
    Ok(1.0 - checked_ratio(Complex64::new(2.0 * u, 0.0), den)?)
}

/// Coupling for [`gate_g`]: `J` for t-J, `U` for Hubbard.
pub fn gate_g(model: Model, kin: &RelativeKinematics, coupling: f64) -> Result<PhaseGate> {
    let amp = match model {
        Model::TJ => tj_reflection(kin, coupling)?.0,
        Model::Hubbard => hubbard_phase(kin, coupling)?,
        Model::XXZ => {
            return Err(Error::InvalidArgument("use gate_g_xxz for the XXZ model".into()));
        }
    };
    Ok(PhaseGate::singlet(amp.arg()))
}

/// Per-channel XXZ phases relative to free fermions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XxzPhases {
    /// Phase of the `T+` and `T-` channels, factored out as a global phase.
    pub global: f64,
    /// `theta1`, the `T0` phase relative to `T+-`.
    pub theta_t0: f64,
    /// `theta2`, the singlet phase relative to `T+-`.
    pub theta_s: f64,
}

/// Hard-core scattering off a nearest-neighbour potential `v`; same algebra
/// as t-J with `J = -v`. Returns the amplitude relative to free fermions in
/// the symmetric (`symmetric = true`) or antisymmetric channel.
fn channel_amplitude(kin: &RelativeKinematics, v: f64, symmetric: bool) -> Result<Complex64> {
    let (r, _) = tj_reflection(kin, -v)?;
    Ok(if symmetric { r } else { -r })
}

pub fn xxz_phases(kin: &RelativeKinematics, jx: f64, jz: f64) -> Result<XxzPhases> {
    let t_pm = channel_amplitude(kin, jz / 4.0, false)?.arg();
    let t_0 = channel_amplitude(kin, jx / 2.0 - jz / 4.0, false)?.arg();
    let s = channel_amplitude(kin, -jx / 2.0 - jz / 4.0, true)?.arg();
    Ok(XxzPhases { global: t_pm, theta_t0: wrap(t_0 - t_pm), theta_s: wrap(s - t_pm) })
}

/// `diag(1, e^{i theta1}, e^{i theta2}, 1)` with the `T+-` phase factored out.
pub fn gate_g_xxz(kin: &RelativeKinematics, jx: f64, jz: f64) -> Result<PhaseGate> {
    let p = xxz_phases(kin, jx, jz)?;
    Ok(PhaseGate::from_phases(p.theta_t0, p.theta_s))
}

/// Scattering phase of one spin channel relative to free fermions, with no
/// global phase factored out: for XXZ the `T+-` channel carries
/// [`XxzPhases::global`].
pub fn channel_phase(params: &ModelParams, kin: &RelativeKinematics, channel: Coupled) -> Result<f64> {
    let singlet = channel == Coupled::Singlet;
    Ok(match params.model {
        Model::TJ if singlet => tj_reflection(kin, params.j)?.0.arg(),
        Model::Hubbard if singlet => hubbard_phase(kin, params.u)?.arg(),
        Model::TJ | Model::Hubbard => 0.0,
        Model::XXZ => {
            let v = match channel {
                Coupled::TPlus | Coupled::TMinus => params.jz / 4.0,
                Coupled::TZero => params.jx / 2.0 - params.jz / 4.0,
                Coupled::Singlet => -params.jx / 2.0 - params.jz / 4.0,
            };
            channel_amplitude(kin, v, singlet)?.arg()
        }
    })
}

/// Map an angle onto (-pi, pi].
pub fn wrap(x: f64) -> f64 {
    let mut y = (x + PI).rem_euclid(TAU) - PI;
    if y <= -PI {
        y += TAU;
    }
    y
}

/// Arc distance between two angles.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    wrap(a - b).abs()
}

/// Which curve [`phase_curve`] sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CurveModel {
    /// Grid is `J`.
    TJ,
    /// Grid is `U`.
    Hubbard,
    /// Grid is `J` with `Jx = J` and `Jz = anisotropy * J`.
    XXZ { anisotropy: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub coupling: f64,
    /// Principal value in (-pi, pi]; NaN at singular points.
    pub theta: f64,
    pub theta_unwrapped: f64,
    /// The singlet amplitude (`R`, `T + R`, or `e^{i theta2}` for XXZ).
    pub amplitude: Complex64,
    /// XXZ only: `theta1`, unwrapped.
    pub theta_t0_unwrapped: Option<f64>,
    pub singular: bool,
}

/// Evaluate the singlet phase over `grid`. Unwrapping starts from the
/// principal value at the first regular point and steps by the shortest arc
/// between consecutive regular points; singular points are skipped.
pub fn phase_curve(model: CurveModel, kin: &RelativeKinematics, grid: &[f64]) -> Result<Vec<CurveRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("coupling grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    let mut last: Option<(f64, f64)> = None;
    let mut last_t0: Option<(f64, f64)> = None;
    for &x in grid {
        let eval = match model {
            CurveModel::TJ => tj_reflection(kin, x).map(|(r, _)| (r, None)),
            CurveModel::Hubbard => hubbard_phase(kin, x).map(|a| (a, None)),
            CurveModel::XXZ { anisotropy } => xxz_phases(kin, x, anisotropy * x)
                .map(|p| (Complex64::from_polar(1.0, p.theta_s), Some(p.theta_t0))),
        };
        match eval {
            Ok((amp, t0)) => {
                let theta = amp.arg();
                let unwrapped = unwrap_step(&mut last, theta);
                let t0_unwrapped = t0.map(|v| unwrap_step(&mut last_t0, v));
                rows.push(CurveRow {
                    coupling: x,
                    theta,
                    theta_unwrapped: unwrapped,
                    amplitude: amp,
                    theta_t0_unwrapped: t0_unwrapped,
                    singular: false,
                });
            }
            Err(Error::SingularPhase { .. }) => rows.push(CurveRow {
                coupling: x,
                theta: f64::NAN,
                theta_unwrapped: f64::NAN,
                amplitude: Complex64::new(f64::NAN, f64::NAN),
                theta_t0_unwrapped: matches!(model, CurveModel::XXZ { .. }).then_some(f64::NAN),
                singular: true,
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(rows)
}

fn unwrap_step(last: &mut Option<(f64, f64)>, theta: f64) -> f64 {
    let value = match *last {
        None => theta,
        Some((prev_wrapped, prev_unwrapped)) => prev_unwrapped + wrap(theta - prev_wrapped),
    };
    *last = Some((theta, value));
    value
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent route to the amplitudes: integrate the relative-coordinate
    /// recursion `-c (psi(r+1) + psi(r-1)) + V(r) psi(r) = E psi(r)` from the
    /// origin and split the free-region values into `A e^{ip2 r} + B e^{-ip2 r}`.
    fn recursion_ratio(kin: &RelativeKinematics, start: (f64, f64), r0: i32, v_at_r0: f64) -> Complex64 {
        let c = kin.relative_hopping();
        let p2 = kin.p2();
        let e = -2.0 * c * p2.cos();
        let (psi_prev, psi0) = start;
        let psi1 = ((v_at_r0 - e) / c) * psi0 - psi_prev;
        let (ra, rb) = (r0 as f64, r0 as f64 + 1.0);
        let (a0, b0) = (Complex64::from_polar(1.0, p2 * ra), Complex64::from_polar(1.0, -p2 * ra));
        let (a1, b1) = (Complex64::from_polar(1.0, p2 * rb), Complex64::from_polar(1.0, -p2 * rb));
        let det = a0 * b1 - b0 * a1;
        let a = (Complex64::new(psi0, 0.0) * b1 - b0 * psi1) / det;
        let b = (a0 * psi1 - Complex64::new(psi0, 0.0) * a1) / det;
        b / a
    }

    fn tj_oracle(kin: &RelativeKinematics, j: f64) -> Complex64 {
        // hard core: psi(0) = 0, psi(1) = 1, potential -J at r = 1
        recursion_ratio(kin, (0.0, 1.0), 1, -j)
    }

    fn hubbard_oracle(kin: &RelativeKinematics, u: f64) -> Complex64 {
        // symmetric: psi(-1) = psi(1), so r = 0 gives psi(1) = (U - E) / 2c
        let c = kin.relative_hopping();
        let e = -2.0 * c * kin.p2().cos();
        let psi1 = (u - e) / (2.0 * c);
        recursion_ratio(kin, (psi1, 1.0), 0, u)
    }

    fn fig_kinematics() -> RelativeKinematics {
        RelativeKinematics::head_on(PI / 4.0, PI / 2.0).unwrap()
    }

    #[test]
    fn kinematics_definitions() {
        let kin = fig_kinematics();
        assert!((kin.p1() - PI / 4.0).abs() < 1e-15);
        assert!((kin.p2() + 3.0 * PI / 8.0).abs() < 1e-15);
        assert!(kin.is_incoming());
        let receding = RelativeKinematics::new(Momentum::new(-PI / 4.0), Momentum::new(PI / 2.0)).unwrap();
        assert!(!receding.is_incoming());
        assert!(RelativeKinematics::new(Momentum::new(PI / 2.0), Momentum::new(PI / 2.0)).is_err());
    }

    #[test]
    fn tj_limits() {
        let kin = fig_kinematics();
        let (r, t) = tj_reflection(&kin, 0.0).unwrap();
        assert!((r + 1.0).norm() < 1e-15);
        assert_eq!(t, Complex64::new(0.0, 0.0));
        let (r, _) = tj_reflection(&kin, 1e12).unwrap();
        let limit = -Complex64::from_polar(1.0, 2.0 * kin.p2());
        assert!((r - limit).norm() < 1e-10);
        assert!((gate_g(Model::TJ, &kin, 0.0).unwrap().singlet_phase() - PI).abs() < 1e-15);
    }

    #[test]
    fn tj_matches_recursion_oracle() {
        for (a, b) in [(PI / 4.0, PI / 2.0), (0.3, 1.1), (0.9, 2.4)] {
            let kin = RelativeKinematics::head_on(a, b).unwrap();
            for j in [0.0, 0.5, 1.0, 2.0, 4.0, 7.5] {
                let (r, _) = tj_reflection(&kin, j).unwrap();
                assert!((r - tj_oracle(&kin, j)).norm() < 1e-12, "{a} {b} {j}");
            }
        }
    }

    #[test]
    fn hubbard_matches_recursion_oracle_and_limits() {
        let kin = fig_kinematics();
        assert!((hubbard_phase(&kin, 0.0).unwrap() - 1.0).norm() < 1e-15);
        assert!((hubbard_phase(&kin, 1e13).unwrap() + 1.0).norm() < 1e-10);
        assert_eq!(gate_g(Model::Hubbard, &kin, 0.0).unwrap(), PhaseGate::identity());
        for u in [0.3, 1.0, 4.0, 20.0] {
            let a = hubbard_phase(&kin, u).unwrap();
            assert!((a - hubbard_oracle(&kin, u)).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_denominators() {
        // J = c e^{i p2} needs sin p2 = 0, which happens for k1 = k2.
        let kin = RelativeKinematics::new(Momentum::new(0.4), Momentum::new(0.4)).unwrap();
        let c = kin.relative_hopping();
        assert!(matches!(tj_reflection(&kin, c), Err(Error::SingularPhase { .. })));
        assert!(matches!(hubbard_phase(&kin, 0.0), Err(Error::SingularPhase { .. })));
        assert!(hubbard_phase(&kin, 1.0).is_ok());
    }

    #[test]
    fn gate_square_and_uncoupled_form() {
        let kin = fig_kinematics();
        let g = gate_g(Model::TJ, &kin, 2.0).unwrap();
        let theta = g.singlet_phase();
        let big_g = g.power(2);
        assert!((big_g.diag[2] - Complex64::from_polar(1.0, 2.0 * theta)).norm() < 1e-14);
        assert!(big_g.distance(&g.compose(&g)) < 1e-14);
        assert_eq!(g.power(0), PhaseGate::identity());
        let m = g.uncoupled_matrix();
        // uu and dd untouched, ud/du block is (1 + e)/2 on the diagonal, (1 - e)/2 off it
        let e = Complex64::from_polar(1.0, theta);
        assert!((m[0][0] - 1.0).norm() < 1e-15 && (m[3][3] - 1.0).norm() < 1e-15);
        assert!((m[1][1] - (1.0 + e) / 2.0).norm() < 1e-15);
        assert!((m[1][2] - (1.0 - e) / 2.0).norm() < 1e-15);
        // unitarity of the uncoupled matrix
        for i in 0..4 {
            for j in 0..4 {
                let dot: Complex64 = (0..4).map(|r| m[r][i].conj() * m[r][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn xxz_reductions() {
        let kin = fig_kinematics();
        // no interaction: only the hard core, which is invisible to the
        // antisymmetric channels and costs pi in the symmetric one
        let g = gate_g_xxz(&kin, 0.0, 0.0).unwrap();
        assert!(g.distance(&PhaseGate::from_phases(0.0, PI)) < 1e-14);
        // isotropic exchange cannot split T0 from T+-
        for j in [0.5, 2.0, 3.0] {
            let p = xxz_phases(&kin, j, j).unwrap();
            assert!(p.theta_t0.abs() < 1e-14);
        }
        // isotropic XXZ = t-J exchange + J/4 nearest-neighbour repulsion in every channel
        let j = 1.7;
        let p = xxz_phases(&kin, j, j).unwrap();
        let (r_s, _) = tj_reflection(&kin, 3.0 * j / 4.0).unwrap();
        let (r_t, _) = tj_reflection(&kin, -j / 4.0).unwrap();
        assert!(circle_distance(p.theta_s, r_s.arg() - (-r_t).arg()) < 1e-13);
    }

    #[test]
    fn tj_curve_is_monotone() {
        let kin = fig_kinematics();
        let grid: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.01).collect();
        let rows = phase_curve(CurveModel::TJ, &kin, &grid).unwrap();
        assert!((rows[0].theta_unwrapped - PI).abs() < 1e-15);
        for w in rows.windows(2) {
            assert!(!w[1].singular);
            assert!(w[1].theta_unwrapped > w[0].theta_unwrapped);
        }
        // large J approaches -e^{2ip2} = e^{i pi/4}, reached from below on the branch above 2 pi
        let last = rows.last().unwrap().theta_unwrapped;
        assert!(last < PI / 4.0 + TAU && last > PI / 4.0 + TAU - 0.1);
        let h = phase_curve(CurveModel::Hubbard, &kin, &[0.0]).unwrap();
        assert_eq!(h[0].theta_unwrapped, 0.0);
    }

    #[test]
    fn curve_flags_singular_rows() {
        let kin = RelativeKinematics::new(Momentum::new(0.4), Momentum::new(0.4)).unwrap();
        let c = kin.relative_hopping();
        let rows = phase_curve(CurveModel::TJ, &kin, &[0.0, c, 2.0 * c]).unwrap();
        assert!(!rows[0].singular && rows[1].singular && !rows[2].singular);
        assert!(phase_curve(CurveModel::TJ, &kin, &[]).is_err());
    }

    proptest! {
        #[test]
        fn amplitudes_are_unimodular(k1 in -3.1f64..3.1, k2 in -3.1f64..3.1, j in -20.0f64..20.0) {
            if let Ok(kin) = RelativeKinematics::new(Momentum::new(k1), Momentum::new(k2)) {
                if let Ok((r, t)) = tj_reflection(&kin, j) {
                    prop_assert!((r.norm() - 1.0).abs() < 1e-12);
                    prop_assert_eq!(t, Complex64::new(0.0, 0.0));
                }
                if let Ok(a) = hubbard_phase(&kin, j) {
                    prop_assert!((a.norm() - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
