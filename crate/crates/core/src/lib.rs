//! Singular self-similar profiles of the fast-diffusion and logarithmic
//! diffusion equations, their far-field and envelope properties, a monotone
//! implicit solver for the radial parabolic problem, and `m -> 0` limit
//! studies.

pub mod error;
pub mod farfield;
pub mod interp;
pub mod ode;
pub mod parabolic;
pub mod params;
pub mod profile;
pub mod reference;
pub mod sweeps;
pub mod verify;

pub use error::{Error, Result};
pub use params::{DerivedConstants, Params, ValidationReport};
pub use profile::{integrate_profile, ProfileOptions, ProfileSolution};
pub use reference::{BarenblattSolution, SelfSimilarSolution, SpaceTimeField};
pub use parabolic::{AnnulusGrid, BoundarySource, ParabolicSolution, SolverOptions};
pub use sweeps::{NormRow, SweepReport};
