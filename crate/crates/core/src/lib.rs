//! Image segmentation under a convexity shape prior.
//!
//! The object is the zero set of a binary indicator `u` (background is 1).
//! Convexity of the object is enforced through disc-kernel constraints
//! `u (b_r * u) - u / 2 >= 0`, handled by Lagrange multipliers, while a
//! Gaussian-mixture region force and a smoothed length term drive the
//! threshold updates.

pub mod conv;
pub mod convexity;
pub mod error;
pub mod grid;
pub mod hull;
pub mod phantom;
pub mod region_force;
pub mod scalar;
pub mod solver;

pub use conv::{convolve, convolve_direct, make_disc_kernel, make_gaussian_kernel, FftConvolver, Kernel, KernelKind, PadMode};
pub use convexity::{
    constraint_field, convexity_score, discretization_slack, half_ball_test, is_convex_discrete, min_violation,
    BoundaryView, ConstraintField, CONVEXITY_TOLERANCE,
};
pub use error::{Error, Result};
pub use grid::{boundary_extract, distance_beyond, jaccard, relative_variation, BinaryField, Image, PixelSet, ScalarField};
pub use hull::{convex_hull, hull_mask, rasterize_hull, rasterize_polygon, Polygon};
pub use phantom::{gen_phantom, FgSeed, Phantom, PhantomSpec, Shape};
pub use region_force::{build_force, fit_gmm, gmm_density, init_models, EmOptions, ForceField, ForceParams, Gmm, GmmFit};
pub use scalar::Real;
pub use solver::{
    initialize, linearized_cost, narrow_band, run, update_multipliers, update_u, ConstraintGradient, LabelConstraints,
    LengthPad, RunReport, Solver, SolverConfig, SolverState, StepRecord, StopReason,
};

pub type ScalarFieldF64 = ScalarField<f64>;
pub type ScalarFieldF32 = ScalarField<f32>;
pub type ImageF64 = Image<f64>;
pub type ImageF32 = Image<f32>;
pub type KernelF64 = Kernel<f64>;
pub type KernelF32 = Kernel<f32>;
pub type GmmF64 = Gmm<f64>;
pub type GmmF32 = Gmm<f32>;
pub type SolverF64 = Solver<f64>;
pub type SolverF32 = Solver<f32>;
