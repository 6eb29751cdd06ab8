//! Static relativistic mean-field equations of the atomic nucleus on a
//! periodic lattice: Dirac nucleon orbitals discretized by plane waves,
//! meson/photon fields solved in closed form, energy minimization under
//! orthonormality and negative-spectral-projector constraints, and
//! property checks for the operator inequalities, projector identities and
//! variational characterizations the model satisfies.
//!
//! Entry points:
//! - [`scf::scf_solve`] / [`scf::scf_solve_constrained`] — the self-consistent
//!   field driver,
//! - [`variational::energy`] — the energy functional and its breakdown,
//! - [`retraction::retract`] — constraint restoration from an approximately
//!   feasible point,
//! - [`config::RunConfig`] / [`run::run`] — file-driven orchestration behind
//!   the `rmf` binary.
//!
//! Units are natural (hbar = c = 1) with lengths in 1/m_b and energies in
//! m_b; the default nucleon mass is 1.

pub mod config;
pub mod error;
pub mod fields;
pub mod hamiltonian;
pub mod lattice;
pub mod linalg;
pub mod report;
pub mod retraction;
pub mod run;
pub mod scf;
pub mod testutil;
pub mod variational;

pub use error::RmfError;
