//! Compressed-sparse-row complex matrices with a deterministic parallel
//! matrix-vector product.

use num_complex::Complex64;
use rayon::prelude::*;

/// Rows per rayon task in [`CsrMatrix::apply`]. Each output element is
/// accumulated by one thread in column order, so results do not depend on
/// the size of the thread pool.
const ROW_CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl CsrMatrix {
    /// Assemble from `(row, col, value)` triplets. Duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside {dim}x{dim}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut m = CsrMatrix { dim, row_ptr, cols, vals };
        m.drop_zeros();
        m
    }

    fn drop_zeros(&mut self) {
        if self.vals.iter().all(|v| *v != Complex64::new(0.0, 0.0)) {
            return;
        }
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for r in 0..self.dim {
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.vals[i] != Complex64::new(0.0, 0.0) {
                    cols.push(self.cols[i]);
                    vals.push(self.vals[i]);
                }
            }
            row_ptr[r + 1] = cols.len();
        }
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.vals = vals;
    }

    pub fn zeros(dim: usize) -> Self {
        CsrMatrix {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(i) => self.vals[span.start + i],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// `out = self * x`.
    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        out.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(chunk, block)| {
            let base = chunk * ROW_CHUNK;
            for (i, o) in block.iter_mut().enumerate() {
                let r = base + i;
                let mut acc = Complex64::new(0.0, 0.0);
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.vals[k] * x[self.cols[k]];
                }
                *o = acc;
            }
        });
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        self.apply(x, &mut out);
        out
    }

    /// Largest `|A_ij - conj(A_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        (0..self.dim)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Gershgorin enclosure `[lo, hi]` of the spectrum of a Hermitian matrix.
    pub fn gershgorin_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..self.dim {
            let mut centre = 0.0;
            let mut radius = 0.0;
            for (c, v) in self.row(r) {
                if c == r {
                    centre = v.re;
                } else {
                    radius += v.norm();
                }
            }
            lo = lo.min(centre - radius);
            hi = hi.max(centre + radius);
        }
        if self.dim == 0 {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<Complex64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// `self * other - other * self`, dense; only for small test operators.
    pub fn commutator_norm(&self, other: &CsrMatrix) -> f64 {
        let a = self.to_dense();
        let b = other.to_dense();
        let c = &a * &b - &b * &a;
        c.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    norm_sqr(a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn assembly_sums_duplicates() {
        let m = CsrMatrix::from_triplets(
            3,
            vec![(0, 1, c(1.0, 0.0)), (0, 1, c(0.5, 1.0)), (2, 0, c(0.0, 0.0)), (1, 1, c(2.0, 0.0))],
        );
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), c(1.5, 1.0));
        assert_eq!(m.get(2, 0), c(0.0, 0.0));
        let y = m.mul_vec(&[c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)]);
        assert_eq!(y, vec![c(-1.0, 1.5), c(0.0, 2.0), c(0.0, 0.0)]);
    }

    #[test]
    fn gershgorin_encloses_path_spectrum() {
        let n = 7;
        let trip = (1..n)
            .flat_map(|i| [(i - 1, i, c(-1.0, 0.0)), (i, i - 1, c(-1.0, 0.0))])
            .collect();
        let m = CsrMatrix::from_triplets(n, trip);
        let (lo, hi) = m.gershgorin_bounds();
        assert_eq!((lo, hi), (-2.0, 2.0));
        assert_eq!(m.hermiticity_defect(), 0.0);
    }

    #[test]
    fn apply_is_thread_count_independent() {
        let n = 3 * ROW_CHUNK + 17;
        let trip: Vec<_> = (0..n)
            .flat_map(|i| {
                let j = (i * 7919 + 13) % n;
                [(i, j, c(0.1 * (i % 5) as f64, 0.3)), (j, i, c(0.1 * (i % 5) as f64, -0.3))]
            })
            .collect();
        let m = CsrMatrix::from_triplets(n, trip);
        let x: Vec<_> = (0..n).map(|i| c((i as f64).sin(), (i as f64).cos())).collect();
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = single.install(|| m.mul_vec(&x));
        let b = many.install(|| m.mul_vec(&x));
        assert!(a.iter().zip(&b).all(|(p, q)| p.re.to_bits() == q.re.to_bits() && p.im.to_bits() == q.im.to_bits()));
    }
}
