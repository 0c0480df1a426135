//! Two spin-1/2 states in the uncoupled `{uu, ud, du, dd}` and coupled
//! `{T+, T0, S, T-}` bases.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Index of a single spin: up = 0, down = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn index(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }

    pub fn from_index(i: usize) -> Spin {
        if i == 0 {
            Spin::Up
        } else {
            Spin::Down
        }
    }

    /// `2 S_z`.
    pub fn sign(self) -> f64 {
        match self {
            Spin::Up => 1.0,
            Spin::Down => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairBasis {
    /// `{uu, ud, du, dd}`
    Uncoupled,
    /// `{T+, T0, S, T-}`
    Coupled,
}

/// A coupled-basis label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Coupled {
    TPlus,
    TZero,
    Singlet,
    TMinus,
}

impl Coupled {
    pub const ALL: [Coupled; 4] = [Coupled::TPlus, Coupled::TZero, Coupled::Singlet, Coupled::TMinus];

    pub fn index(self) -> usize {
        match self {
            Coupled::TPlus => 0,
            Coupled::TZero => 1,
            Coupled::Singlet => 2,
            Coupled::TMinus => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Coupled::TPlus => "T+",
            Coupled::TZero => "T0",
            Coupled::Singlet => "S",
            Coupled::TMinus => "T-",
        }
    }

    /// Total spin quantum number `S(S+1)`.
    pub fn s_squared(self) -> f64 {
        if self == Coupled::Singlet {
            0.0
        } else {
            2.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinHalfPairState {
    pub amplitudes: [Complex64; 4],
    pub basis: PairBasis,
}

/// Coupled amplitudes from uncoupled ones.
pub fn to_coupled(u: [Complex64; 4]) -> [Complex64; 4] {
    let s = FRAC_1_SQRT_2;
    [u[0], (u[1] + u[2]) * s, (u[1] - u[2]) * s, u[3]]
}

/// Uncoupled amplitudes from coupled ones.
pub fn to_uncoupled(c: [Complex64; 4]) -> [Complex64; 4] {
    let s = FRAC_1_SQRT_2;
    [c[0], (c[1] + c[2]) * s, (c[1] - c[2]) * s, c[3]]
}

/// The coupled basis vectors expressed in the uncoupled basis, as columns
/// `B[:, c]`, so that `uncoupled = B * coupled`.
pub fn coupled_basis_matrix() -> [[f64; 4]; 4] {
    let s = FRAC_1_SQRT_2;
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, s, s, 0.0],
        [0.0, s, -s, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

impl SpinHalfPairState {
    pub fn uncoupled(amplitudes: [Complex64; 4]) -> Self {
        SpinHalfPairState { amplitudes, basis: PairBasis::Uncoupled }
    }

    pub fn coupled(amplitudes: [Complex64; 4]) -> Self {
        SpinHalfPairState { amplitudes, basis: PairBasis::Coupled }
    }

    /// Product state of two single spins given as `(up, down)` amplitudes.
    pub fn product(a: [Complex64; 2], b: [Complex64; 2]) -> Self {
        Self::uncoupled([a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]])
    }

    pub fn basis_state(label: Coupled) -> Self {
        let mut amps = [Complex64::new(0.0, 0.0); 4];
        amps[label.index()] = Complex64::new(1.0, 0.0);
        Self::coupled(amps)
    }

    pub fn convert(&self, target: PairBasis) -> Self {
        let amplitudes = match (self.basis, target) {
            (a, b) if a == b => self.amplitudes,
            (PairBasis::Uncoupled, PairBasis::Coupled) => to_coupled(self.amplitudes),
            _ => to_uncoupled(self.amplitudes),
        };
        SpinHalfPairState { amplitudes, basis: target }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Convenience: coupled/uncoupled conversion entry point.
pub fn coupled_uncoupled(state: &SpinHalfPairState, target: PairBasis) -> SpinHalfPairState {
    state.convert(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn up_down_splits_into_t0_and_singlet() {
        let ud = SpinHalfPairState::uncoupled([c(0.0), c(1.0), c(0.0), c(0.0)]);
        let cpl = ud.convert(PairBasis::Coupled).amplitudes;
        assert!((cpl[1] - c(FRAC_1_SQRT_2)).norm() < 1e-16);
        assert!((cpl[2] - c(FRAC_1_SQRT_2)).norm() < 1e-16);
        assert_eq!(cpl[0], c(0.0));
        assert_eq!(cpl[3], c(0.0));
    }

    #[test]
    fn t_plus_is_up_up() {
        let tp = SpinHalfPairState::basis_state(Coupled::TPlus).convert(PairBasis::Uncoupled);
        assert_eq!(tp.amplitudes, [c(1.0), c(0.0), c(0.0), c(0.0)]);
    }

    #[test]
    fn basis_matrix_matches_conversion() {
        let b = coupled_basis_matrix();
        for label in Coupled::ALL {
            let u = SpinHalfPairState::basis_state(label).convert(PairBasis::Uncoupled);
            for row in 0..4 {
                assert!((u.amplitudes[row].re - b[row][label.index()]).abs() < 1e-16);
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip_and_norm(v in proptest::collection::vec(-1.0f64..1.0, 8)) {
            let amps = [
                Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3]),
                Complex64::new(v[4], v[5]), Complex64::new(v[6], v[7]),
            ];
            let s = SpinHalfPairState::uncoupled(amps);
            let n0 = s.norm();
            let there = s.convert(PairBasis::Coupled);
            prop_assert!((there.norm() - n0).abs() < 1e-12);
            let back = there.convert(PairBasis::Uncoupled);
            for i in 0..4 {
                prop_assert!((back.amplitudes[i] - amps[i]).norm() < 1e-15);
            }
        }
    }
}
