//! Sparse Hamiltonians for one and two particles on a lattice.
//!
//! Two-fermion basis: a state is `c†_{a,sa} c†_{b,sb} |0>` with the creation
//! operators in canonical order `(a, sa) < (b, sb)` (site first, then
//! up before down). Pair states with `a < b` carry all four spin labels
//! and are indexed `4 * pair_index(a, b) + 2 * sa + sb`; the Hubbard basis
//! appends one doubly occupied state `c†_{a,up} c†_{a,down} |0>` per site.
//! The hard-core models (t-J and XXZ) simply omit those states, which is how
//! the single-occupancy projector is enforced.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Lattice;
use crate::sparse::CsrMatrix;
use crate::spin::Spin;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    #[serde(rename = "tj")]
    TJ,
    Hubbard,
    #[serde(rename = "xxz")]
    XXZ,
}

impl Model {
    pub fn hard_core(self) -> bool {
        !matches!(self, Model::Hubbard)
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::TJ => "tj",
            Model::Hubbard => "hubbard",
            Model::XXZ => "xxz",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tj" | "t-j" => Ok(Model::TJ),
            "hubbard" => Ok(Model::Hubbard),
            "xxz" => Ok(Model::XXZ),
            other => Err(Error::InvalidArgument(format!("unsupported model `{other}`"))),
        }
    }
}

/// Couplings for all three models; only those relevant to `model` are read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub model: Model,
    pub t: f64,
    pub j: f64,
    pub u: f64,
    pub jx: f64,
    pub jz: f64,
}

impl ModelParams {
    pub fn tj(t: f64, j: f64) -> Self {
        ModelParams { model: Model::TJ, t, j, u: 0.0, jx: 0.0, jz: 0.0 }
    }

    pub fn hubbard(t: f64, u: f64) -> Self {
        ModelParams { model: Model::Hubbard, t, j: 0.0, u, jx: 0.0, jz: 0.0 }
    }

    pub fn xxz(t: f64, jx: f64, jz: f64) -> Self {
        ModelParams { model: Model::XXZ, t, j: 0.0, u: 0.0, jx, jz }
    }

    /// Exchange coupling of the strong-coupling limit, `J = 4 t^2 / U`.
    pub fn exchange_from_u(&self) -> f64 {
        4.0 * self.t * self.t / self.u
    }

    /// The same model with every interaction switched off (hopping kept).
    pub fn free(&self) -> Self {
        ModelParams { j: 0.0, u: 0.0, jx: 0.0, jz: 0.0, ..*self }
    }

    /// 4x4 nearest-neighbour spin operator in the uncoupled basis
    /// `{uu, ud, du, dd}` of (lower site, upper site).
    fn bond_operator(&self) -> [[f64; 4]; 4] {
        let (diag_par, diag_anti, flip) = match self.model {
            // J (S.S - 1/4): triplets 0, singlet -J.
            Model::TJ => (0.0, -self.j / 2.0, self.j / 2.0),
            Model::XXZ => (self.jz / 4.0, -self.jz / 4.0, self.jx / 2.0),
            Model::Hubbard => (0.0, 0.0, 0.0),
        };
        [
            [diag_par, 0.0, 0.0, 0.0],
            [0.0, diag_anti, flip, 0.0],
            [0.0, flip, diag_anti, 0.0],
            [0.0, 0.0, 0.0, diag_par],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisTag {
    OneParticle,
    TwoParticleTJ,
    TwoParticleHubbard,
    TwoParticleXXZ,
}

/// One element of the two-fermion basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairState {
    /// Sites `a < b` with their spins.
    Pair { a: usize, b: usize, sa: Spin, sb: Spin },
    /// Both particles on site `a` (spin singlet).
    Double { a: usize },
}

/// Index arithmetic for the antisymmetrised two-fermion basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwoParticleBasis {
    sites: usize,
    hard_core: bool,
}

impl TwoParticleBasis {
    pub fn new(sites: usize, hard_core: bool) -> Self {
        TwoParticleBasis { sites, hard_core }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn hard_core(&self) -> bool {
        self.hard_core
    }

    pub fn pair_count(&self) -> usize {
        self.sites * self.sites.saturating_sub(1) / 2
    }

    pub fn dim(&self) -> usize {
        4 * self.pair_count() + if self.hard_core { 0 } else { self.sites }
    }

    pub fn pair_index(&self, a: usize, b: usize) -> usize {
        debug_assert!(a < b && b < self.sites);
        a * (2 * self.sites - a - 1) / 2 + (b - a - 1)
    }

    /// Inverse of [`Self::pair_index`].
    pub fn pair_sites(&self, p: usize) -> (usize, usize) {
        let n = self.sites;
        // Row a starts at a*(2n - a - 1)/2; solve the quadratic then fix up.
        let nf = n as f64;
        let disc = (2.0 * nf - 1.0).powi(2) - 8.0 * p as f64;
        let mut a = ((2.0 * nf - 1.0 - disc.max(0.0).sqrt()) / 2.0).floor() as usize;
        while a > 0 && a * (2 * n - a - 1) / 2 > p {
            a -= 1;
        }
        while (a + 1) * (2 * n - a - 2) / 2 <= p {
            a += 1;
        }
        let start = a * (2 * n - a - 1) / 2;
        (a, a + 1 + (p - start))
    }

    pub fn index(&self, state: PairState) -> Option<usize> {
        match state {
            PairState::Pair { a, b, sa, sb } => {
                Some(4 * self.pair_index(a, b) + 2 * sa.index() + sb.index())
            }
            PairState::Double { a } => {
                (!self.hard_core).then(|| 4 * self.pair_count() + a)
            }
        }
    }

    pub fn state(&self, index: usize) -> PairState {
        let pairs = 4 * self.pair_count();
        if index >= pairs {
            return PairState::Double { a: index - pairs };
        }
        let (a, b) = self.pair_sites(index / 4);
        let s = index % 4;
        PairState::Pair { a, b, sa: Spin::from_index(s / 2), sb: Spin::from_index(s % 2) }
    }

    /// Canonicalise the operator string `c†_{x,sx} c†_{y,sy}`. Returns the
    /// basis index and the sign picked up by reordering, or `None` when the
    /// product vanishes or lies outside the basis.
    pub fn canonical(&self, x: usize, sx: Spin, y: usize, sy: Spin) -> Option<(usize, f64)> {
        let first = (x, sx);
        let second = (y, sy);
        if first == second {
            return None;
        }
        let (lo, hi, sign) = if first < second { (first, second, 1.0) } else { (second, first, -1.0) };
        if lo.0 == hi.0 {
            // (a, up) < (a, down) after ordering
            return self.index(PairState::Double { a: lo.0 }).map(|i| (i, sign));
        }
        self.index(PairState::Pair { a: lo.0, b: hi.0, sa: lo.1, sb: hi.1 }).map(|i| (i, sign))
    }

    /// The two creation operators of a basis state in canonical order.
    pub fn operators(&self, index: usize) -> [(usize, Spin); 2] {
        match self.state(index) {
            PairState::Pair { a, b, sa, sb } => [(a, sa), (b, sb)],
            PairState::Double { a } => [(a, Spin::Up), (a, Spin::Down)],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    pub matrix: CsrMatrix,
    pub basis_tag: BasisTag,
    /// Present for two-particle Hamiltonians.
    pub basis: Option<TwoParticleBasis>,
}

impl SparseHamiltonian {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// `-t A` on the position space; spin is a spectator for one particle.
pub fn one_particle_h(lattice: &Lattice, t: f64) -> SparseHamiltonian {
    let mut trip = Vec::new();
    for (u, v) in lattice.edges() {
        trip.push((u, v, Complex64::new(-t, 0.0)));
        trip.push((v, u, Complex64::new(-t, 0.0)));
    }
    SparseHamiltonian {
        matrix: CsrMatrix::from_triplets(lattice.vertex_count(), trip),
        basis_tag: BasisTag::OneParticle,
        basis: None,
    }
}

/// Two-particle Hamiltonian of the chosen model on `lattice`.
pub fn two_particle_h(lattice: &Lattice, params: &ModelParams) -> Result<SparseHamiltonian> {
    let n = lattice.vertex_count();
    let basis = TwoParticleBasis::new(n, params.model.hard_core());
    let dim = basis.dim();
    let hop = Complex64::new(-params.t, 0.0);
    let mut trip: Vec<(usize, usize, Complex64)> = Vec::with_capacity(dim * 2 * lattice.max_degree() + dim);

    for idx in 0..dim {
        let ops = basis.operators(idx);
        for moving in 0..2 {
            let (site, spin) = ops[moving];
            let (other, other_spin) = ops[1 - moving];
            for &dest in lattice.neighbors(site) {
                // c†_dest c_site replaces the operator in place without a sign.
                let (x, sx, y, sy) = if moving == 0 {
                    (dest, spin, other, other_spin)
                } else {
                    (other, other_spin, dest, spin)
                };
                if let Some((target, sign)) = basis.canonical(x, sx, y, sy) {
                    if target > idx {
                        let v = hop * sign;
                        trip.push((target, idx, v));
                        trip.push((idx, target, v.conj()));
                    }
                }
            }
        }
    }

    match params.model {
        Model::TJ | Model::XXZ => {
            let op = params.bond_operator();
            for (a, b) in lattice.edges() {
                let base = 4 * basis.pair_index(a, b);
                for (r, row) in op.iter().enumerate() {
                    for (c, &v) in row.iter().enumerate() {
                        if v != 0.0 {
                            trip.push((base + r, base + c, Complex64::new(v, 0.0)));
                        }
                    }
                }
            }
        }
        Model::Hubbard => {
            if params.u != 0.0 {
                for a in 0..n {
                    let i = basis.index(PairState::Double { a }).expect("Hubbard basis has doubles");
                    trip.push((i, i, Complex64::new(params.u, 0.0)));
                }
            }
        }
    }

    let basis_tag = match params.model {
        Model::TJ => BasisTag::TwoParticleTJ,
        Model::Hubbard => BasisTag::TwoParticleHubbard,
        Model::XXZ => BasisTag::TwoParticleXXZ,
    };
    Ok(SparseHamiltonian {
        matrix: CsrMatrix::from_triplets(dim, trip),
        basis_tag,
        basis: Some(basis),
    })
}

/// Total `S_z` and total `S^2` on the two-particle basis.
pub fn spin_operators(basis: &TwoParticleBasis) -> (CsrMatrix, CsrMatrix) {
    let dim = basis.dim();
    let mut sz = Vec::new();
    let mut s2 = Vec::new();
    for idx in 0..dim {
        match basis.state(idx) {
            PairState::Pair { sa, sb, .. } => {
                let m = 0.5 * (sa.sign() + sb.sign());
                sz.push((idx, idx, Complex64::new(m, 0.0)));
                if sa == sb {
                    s2.push((idx, idx, Complex64::new(2.0, 0.0)));
                } else {
                    // 3/2 + 2 S_a.S_b on {ud, du} is [[1, 1], [1, 1]].
                    let partner = idx - 2 * sa.index() - sb.index() + 2 * sb.index() + sa.index();
                    s2.push((idx, idx, Complex64::new(1.0, 0.0)));
                    s2.push((idx, partner, Complex64::new(1.0, 0.0)));
                }
            }
            PairState::Double { .. } => {}
        }
    }
    (CsrMatrix::from_triplets(dim, sz), CsrMatrix::from_triplets(dim, s2))
}
