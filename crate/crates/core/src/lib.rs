//! Geometric segmentation losses for volumetric lesion masks.
//!
//! The crate is organised bottom-up:
//!
//! - [`volume`]: grids, probability maps, binary masks and the GVOL file format.
//! - [`transform`]: finite-difference gradient and Laplacian stencils (with exact
//!   adjoints) and an exact anisotropic Euclidean distance transform.
//! - [`loss`]: the generic ratio-of-sums loss evaluator, its closed-form
//!   instantiations (Dice, BCE, boundary, Hausdorff, first-order and
//!   second-order gradient losses), weighted composites and a finite-difference
//!   gradient checker.
//! - [`metrics`]: connected components, DSC and lesion-wise detection metrics.
//! - [`phantom`]: seeded synthetic lesion volumes and simulated model outputs.
//! - [`optim`]: direct optimisation of a logit field against a mask.
//!
//! All arithmetic is carried out in `f64`; on-disk payloads are `f32`.

pub mod error;
pub mod loss;
pub mod metrics;
pub mod optim;
pub mod phantom;
pub mod transform;
pub mod volume;

pub use error::{GeoError, Result};
pub use loss::{
    CompositeLoss, CompositeResult, Gamma, GeoLossSpec, LossConfig, LossResult, Psi, Theta, WeightSchedule,
};
pub use metrics::{LabelMap, LesionMetrics};
pub use transform::{
    Axes, Axis, Boundary, DerivativeOp, DistanceMap, GeometricOperator, OperatorKind, Stencil, VectorField,
};
pub use volume::{BinaryMask, GridSpec, ProbabilityMap, ScalarField, Volume, VoxelIndex};
