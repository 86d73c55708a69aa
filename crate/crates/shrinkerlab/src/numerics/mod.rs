//! Small numerical kernels used across the crate.

pub mod fd;
pub mod fit;
pub mod linalg;
pub mod ode;
