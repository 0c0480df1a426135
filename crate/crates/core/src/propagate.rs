//! Chebyshev expansion of `exp(-i H t) v` for sparse Hermitian `H`.
//!
//! With the spectrum mapped onto [-1, 1] by `H = a X + b`,
//! `exp(-i H t) = exp(-i b t) [J_0(a t) + 2 sum_n (-i)^n J_n(a t) T_n(X)]`.
//! `|T_n(X)| <= 1` on that interval, so the neglected tail of Bessel
//! coefficients bounds the 2-norm error of the truncated series directly.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::sparse::CsrMatrix;

/// Largest `a * dt` taken in one expansion. Longer durations are split.
const MAX_STEP_PHASE: f64 = 30.0;

/// Error budget used by the evolution drivers. The contract is 1e-8 in the
/// 2-norm; running tighter costs a handful of extra terms and keeps the norm
/// drift below 1e-10.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// Bessel functions `J_0(x) ..= J_n_max(x)` for `x >= 0` by Miller's
/// backward recurrence, normalised with `J_0 + 2 sum J_2k = 1`.
pub fn bessel_j_sequence(x: f64, n_max: usize) -> Vec<f64> {
    assert!(x >= 0.0, "bessel_j_sequence expects x >= 0");
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let top = n_max.max(x.ceil() as usize);
    let mut start = top + 20 + (40.0 * top as f64).sqrt() as usize;
    start += start % 2;
    let mut j_next = 0.0;
    let mut j_cur = 1e-300;
    let mut even_sum = 0.0;
    let mut seq = vec![0.0; start + 1];
    seq[start] = j_cur;
    for n in (1..=start).rev() {
        let j_prev = 2.0 * n as f64 / x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        seq[n - 1] = j_cur;
        if j_cur.abs() > 1e250 {
            for v in seq[n - 1..].iter_mut() {
                *v *= 1e-250;
            }
            j_cur *= 1e-250;
            j_next *= 1e-250;
        }
    }
    for (n, v) in seq.iter().enumerate() {
        if n > 0 && n % 2 == 0 {
            even_sum += v;
        }
    }
    let scale = seq[0] + 2.0 * even_sum;
    for (o, v) in out.iter_mut().zip(&seq) {
        *o = v / scale;
    }
    out
}

/// Upper bound on `2 sum_{n > order} |J_n(x)|`.
fn tail_bound(x: f64, order: usize) -> f64 {
    // |J_n(x)| <= (x/2)^n / n!, and beyond n >= x the terms at least halve.
    let n = order + 1;
    if (n as f64) < x {
        return f64::INFINITY;
    }
    let mut ln_term = n as f64 * (x / 2.0).ln();
    for i in 2..=n {
        ln_term -= (i as f64).ln();
    }
    4.0 * ln_term.exp()
}

fn order_for(x: f64, budget: f64) -> usize {
    let mut order = x.ceil() as usize;
    while tail_bound(x, order) > budget {
        order += 1;
    }
    order
}

/// Summary of one propagation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationStats {
    pub steps: usize,
    pub matvecs: usize,
    /// Certified bound on the truncation error in the 2-norm, relative to `|v|`.
    pub error_bound: f64,
}

/// Propagator for a fixed Hamiltonian.
#[derive(Debug, Clone)]
pub struct Chebyshev<'a> {
    h: &'a CsrMatrix,
    centre: f64,
    half_width: f64,
}

impl<'a> Chebyshev<'a> {
    pub fn new(h: &'a CsrMatrix) -> Self {
        let (lo, hi) = h.gershgorin_bounds();
        let centre = 0.5 * (lo + hi);
        // A little slack keeps rounding from pushing eigenvalues outside [-1, 1].
        let half_width = (0.5 * (hi - lo)) * (1.0 + 1e-12) + 1e-12;
        Chebyshev { h, centre, half_width }
    }

    pub fn spectral_bounds(&self) -> (f64, f64) {
        (self.centre - self.half_width, self.centre + self.half_width)
    }

    /// `exp(-i H duration) v` with truncation error at most `tolerance * |v|`.
    pub fn evolve(&self, v: &[Complex64], duration: f64, tolerance: f64) -> (Vec<Complex64>, PropagationStats) {
        let mut state = v.to_vec();
        let stats = self.evolve_in_place(&mut state, duration, tolerance);
        (state, stats)
    }

    pub fn evolve_in_place(&self, state: &mut [Complex64], duration: f64, tolerance: f64) -> PropagationStats {
        if duration == 0.0 || state.is_empty() {
            return PropagationStats { steps: 0, matvecs: 0, error_bound: 0.0 };
        }
        let total_phase = self.half_width * duration.abs();
        let steps = ((total_phase / MAX_STEP_PHASE).ceil() as usize).max(1);
        let dt = duration / steps as f64;
        let x = self.half_width * dt.abs();
        let budget = tolerance / steps as f64;
        let order = order_for(x, budget);
        let mut coeffs = bessel_j_sequence(x, order);
        if dt < 0.0 {
            // J_n(-x) = (-1)^n J_n(x)
            for (n, c) in coeffs.iter_mut().enumerate() {
                if n % 2 == 1 {
                    *c = -*c;
                }
            }
        }
        let mut bufs = Workspace::new(state.len());
        for _ in 0..steps {
            self.step(state, dt, &coeffs, &mut bufs);
        }
        PropagationStats {
            steps,
            matvecs: steps * order,
            error_bound: steps as f64 * tail_bound(x, order),
        }
    }

    fn step(&self, state: &mut [Complex64], dt: f64, coeffs: &[f64], ws: &mut Workspace) {
        let inv_a = 1.0 / self.half_width;
        let b = self.centre;
        let Workspace { prev, cur, hv, acc } = ws;
        prev.copy_from_slice(state);
        // T_1 = X v
        self.h.apply(prev, hv);
        cur.par_iter_mut()
            .zip(hv.par_iter())
            .zip(prev.par_iter())
            .for_each(|((c, &h), &p)| *c = (h - p * b) * inv_a);
        let c0 = coeffs[0];
        let c1 = Complex64::new(0.0, -2.0 * coeffs.get(1).copied().unwrap_or(0.0));
        acc.par_iter_mut()
            .zip(prev.par_iter())
            .zip(cur.par_iter())
            .for_each(|((a, &p), &c)| *a = p * c0 + c * c1);
        let mut phase = Complex64::new(0.0, -1.0);
        for &jn in coeffs.iter().skip(2) {
            phase *= Complex64::new(0.0, -1.0);
            let cn = phase * (2.0 * jn);
            self.h.apply(cur, hv);
            // prev <- 2 X cur - prev, then swap roles so cur holds T_{n}
            prev.par_iter_mut()
                .zip(hv.par_iter())
                .zip(cur.par_iter())
                .zip(acc.par_iter_mut())
                .for_each(|(((p, &h), &c), a)| {
                    let next = (h - c * b) * (2.0 * inv_a) - *p;
                    *p = next;
                    *a += next * cn;
                });
            std::mem::swap(prev, cur);
        }
        let global = Complex64::from_polar(1.0, -b * dt);
        state.par_iter_mut().zip(acc.par_iter()).for_each(|(s, &a)| *s = a * global);
    }
}

struct Workspace {
    prev: Vec<Complex64>,
    cur: Vec<Complex64>,
    hv: Vec<Complex64>,
    acc: Vec<Complex64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n];
        Workspace { prev: z.clone(), cur: z.clone(), hv: z.clone(), acc: z }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Lattice;
    use crate::hamiltonian::{one_particle_h, two_particle_h, ModelParams};
    use crate::sparse::norm;
    use nalgebra::{DMatrix, DVector};

    fn dense_expm_apply(h: &CsrMatrix, v: &[Complex64], t: f64) -> Vec<Complex64> {
        let d: DMatrix<Complex64> = h.to_dense();
        let eig = nalgebra::SymmetricEigen::new(d);
        let q = &eig.eigenvectors;
        let phases = DVector::from_iterator(
            eig.eigenvalues.len(),
            eig.eigenvalues.iter().map(|&e| Complex64::from_polar(1.0, -e * t)),
        );
        let vv = DVector::from_column_slice(v);
        let coeff = q.adjoint() * vv;
        let evolved = q * coeff.component_mul(&phases);
        evolved.iter().copied().collect()
    }

    #[test]
    fn bessel_reference_values() {
        let j = bessel_j_sequence(1.0, 3);
        assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!((j[2] - 0.114_903_484_931_900_5).abs() < 1e-15);
        let j = bessel_j_sequence(10.0, 12);
        assert!((j[0] + 0.245_935_764_451_348_3).abs() < 1e-14);
        assert!((j[5] + 0.234_061_528_186_793_6).abs() < 1e-14);
        assert!((j[12] - 0.063_370_254_970_156_0).abs() < 1e-14);
        let j = bessel_j_sequence(30.0, 1);
        assert!((j[0] + 0.086_367_983_581_040_2).abs() < 1e-14);
    }

    #[test]
    fn tail_bound_dominates() {
        let x = 12.0;
        let j = bessel_j_sequence(x, 80);
        for order in 12..60 {
            let tail: f64 = j[order + 1..].iter().map(|v| 2.0 * v.abs()).sum();
            assert!(tail <= tail_bound(x, order) + 1e-300);
        }
    }

    #[test]
    fn matches_dense_exponential() {
        let lat = Lattice::line(9, 0);
        let h = two_particle_h(&lat, &ModelParams::tj(1.0, 1.3)).unwrap();
        let dim = h.dim();
        let v: Vec<Complex64> = (0..dim)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let nv = norm(&v);
        let v: Vec<Complex64> = v.iter().map(|z| z / nv).collect();
        for t in [0.3, 7.0, 41.5, -3.0] {
            let (got, stats) = Chebyshev::new(&h.matrix).evolve(&v, t, 1e-10);
            let want = dense_expm_apply(&h.matrix, &v, t);
            let err: f64 = got.iter().zip(&want).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            assert!(err < 1e-9, "t={t} err={err}");
            assert!(stats.error_bound <= 1e-10);
        }
    }

    #[test]
    fn zero_duration_is_identity() {
        let h = one_particle_h(&Lattice::line(5, 0), 1.0);
        let v = vec![Complex64::new(0.0, 1.0); 5];
        let (out, stats) = Chebyshev::new(&h.matrix).evolve(&v, 0.0, 1e-8);
        assert_eq!(out, v);
        assert_eq!(stats.matvecs, 0);
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let lat = Lattice::line(40, 0);
        let h = two_particle_h(&lat, &ModelParams::hubbard(1.0, 2.0)).unwrap();
        let v: Vec<Complex64> = (0..h.dim()).map(|i| Complex64::new(1.0 / (1.0 + i as f64), 0.0)).collect();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| Chebyshev::new(&h.matrix).evolve(&v, 5.0, 1e-8).0)
        };
        assert_eq!(run(1), run(4));
    }
}
