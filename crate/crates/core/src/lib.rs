//! Wave-particle dynamics of a bead threaded on a vibrating string.
//!
//! * [`analytic`]: closed-form transparency solutions and their kinematics.
//! * [`solver`]: finite-difference / RK4 integrator for the coupled system.
//! * [`diagnostics`]: conservation ledgers, transparency metrics, refinement
//!   studies.
//! * [`scenarios`]: reference set-ups and the validation suite built on them.

pub mod analytic;
pub mod diagnostics;
pub mod scenarios;
pub mod solver;
