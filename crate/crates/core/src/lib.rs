//! Numerical laboratory for averaging of perturbed KdV on the circle.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averaging;
pub mod dynamics;
pub mod hill;
pub mod lab;
pub mod measures;
pub mod spectral;
