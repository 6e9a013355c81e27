//! Numerical core for the zero-energy inverse-scattering solution of the
//! Novikov-Veselov equation: potentials and their criticality classification,
//! the forward scattering transform through complex-geometric-optics solves,
//! phase evolution of the data, the conjugate-linear inverse solve, and a
//! direct pseudo-spectral integrator used for cross-validation.

pub mod cgo;
pub mod classify;
pub mod config;
pub mod dbar;
pub mod error;
pub mod evolve;
pub mod fft;
pub mod field;
pub mod gmres;
pub mod io;
pub mod oracle;
pub mod potentials;
pub mod reconstruct;
pub mod scatter;
pub mod spectral;

pub use cgo::{scattering_coefficient, solve_cgo, CgoParams, CgoResult};
pub use classify::{classify, classify_by_form, ClassificationReport, Criticality};
pub use config::RunConfig;
pub use dbar::{DbarContext, DbarOptions, DbarResult};
pub use error::{Error, Result, Stage};
pub use evolve::evolve;
pub use field::{Field, Grid};
pub use oracle::{default_steps, linear_solution, step_nv};
pub use potentials::{build_potential, PotentialFamily, PotentialSpec};
pub use reconstruct::{
    assemble, identity_defects, nv_residual, reconstruct, Reconstruction, ReconstructOptions,
};
pub use scatter::{
    scattering_transform, small_k_fit, symmetry_defect, x_norm, KGrid, RaySpec, ScatteringData,
    SmallKFit,
};
