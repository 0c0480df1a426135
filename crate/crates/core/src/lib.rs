//! Wave-packet scattering on graphs for the Fermi-Hubbard, t-J and XXZ
//! models: single-particle S-matrices and momentum switches, closed-form and
//! numerically extracted two-particle scattering phases, sparse time
//! evolution, continued-fraction gate planning and a triple-rail logic layer.

pub mod channel;
pub mod error;
pub mod evolve;
pub mod gadget;
pub mod graph;
pub mod hamiltonian;
pub mod logic;
pub mod momentum;
pub mod phases;
pub mod propagate;
pub mod scatter;
pub mod sparse;
pub mod spin;
pub mod switch;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{attach_rails, build_path, Lattice, RailedGraph, ScatterGraph};
pub use hamiltonian::{one_particle_h, two_particle_h, Model, ModelParams, SparseHamiltonian};
pub use momentum::Momentum;
pub use spin::{coupled_uncoupled, Coupled, PairBasis, Spin, SpinHalfPairState};
