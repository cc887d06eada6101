//! Simulation and verification lab for mean curvature flow of star-shaped
//! hypersurfaces.
//!
//! The library evolves symmetry-reduced radial graphs under mean curvature
//! flow and checks, against analytic oracles where available, the monitored
//! quantities attached to star-shaped flows: the positive quantity
//! `F = a1 <X,nu> + (a2 + 2 a1 t) H`, chordal noncollapsing extremes,
//! convexity and gradient ratios, the sqrt(t)-rescaled flow with its
//! weighted-area one-sided minimization, tangent-flow classification at
//! blowup scales, and the elliptically regularized arrival-time problem.

pub mod arrival;
pub mod config;
pub mod flow;
pub mod geometry;
pub mod monitors;
pub mod report;
pub mod rescaling;
pub mod runner;

pub use geometry::{build_shape, compute_frame, star_gauge, Mode, RadialGraph, ShapeSpec, SurfaceFrame};
