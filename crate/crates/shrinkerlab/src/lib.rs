//! Numerical laboratory for self-shrinkers of mean curvature flow.

// Negated comparisons double as NaN guards.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ancient;
pub mod barriers;
pub mod error;
pub mod functionals;
pub mod graphflow;
pub mod numerics;
pub mod persist;
pub mod selftest;
pub mod shrinker;
pub mod spectral;
pub mod surface;
