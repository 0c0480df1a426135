use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Lattice momentum in radians per site, stored in its canonical
/// representative on (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(into = "f64", from = "f64")]
pub struct Momentum(f64);

impl Momentum {
    pub fn new(value: f64) -> Self {
        let mut k = (value + PI).rem_euclid(TAU) - PI;
        // rem_euclid maps +pi onto -pi; the representative interval is half-open on the left.
        if k <= -PI {
            k += TAU;
        }
        Momentum(k)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Energy of a plane wave with this momentum under `-t A`.
    pub fn energy(self, t: f64) -> f64 {
        -2.0 * t * self.0.cos()
    }

    /// Group velocity `dE/dk` under `-t A`.
    pub fn group_velocity(self, t: f64) -> f64 {
        2.0 * t * self.0.sin()
    }

    /// True for momenta carrying a propagating mode (0 < |k| < pi).
    pub fn is_propagating(self) -> bool {
        let a = self.0.abs();
        a > 0.0 && a < PI
    }
}

impl From<f64> for Momentum {
    fn from(value: f64) -> Self {
        Momentum::new(value)
    }
}

impl From<Momentum> for f64 {
    fn from(k: Momentum) -> f64 {
        k.0
    }
}

impl fmt::Display for Momentum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
