//! Spatially invariant geometric operators: first-order gradients, the
//! discrete Laplacian, and the Euclidean distance transform.

mod edt;
mod stencil;

pub use edt::{boundary_voxels, edt, DistanceMap};
pub use stencil::{fog, fog_adjoint, gradient_magnitude, sog, sog_adjoint, VectorField};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Subset of the three axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Axes([bool; 3]);

impl Axes {
    pub const ALL: Axes = Axes([true; 3]);

    pub fn only(axis: Axis) -> Self {
        let mut a = [false; 3];
        a[axis.index()] = true;
        Axes(a)
    }

    pub fn from_slice(axes: &[Axis]) -> Self {
        let mut a = [false; 3];
        for axis in axes {
            a[axis.index()] = true;
        }
        Axes(a)
    }

    pub fn contains(&self, axis: Axis) -> bool {
        self.0[axis.index()]
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }

    pub fn iter(&self) -> impl Iterator<Item = Axis> + '_ {
        Axis::ALL.into_iter().filter(|a| self.contains(*a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stencil {
    /// `(f[i+1] - f[i-1]) / (2 s)`
    #[default]
    Central,
    /// `(f[i+1] - f[i]) / s`
    Forward,
}

/// How samples outside the volume are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Clamp to the nearest edge voxel.
    #[default]
    Replicate,
    /// Treat outside samples as zero.
    Zero,
}

/// Discretisation of a derivative operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct DerivativeOp {
    #[serde(default)]
    pub stencil: Stencil,
    #[serde(default)]
    pub boundary: Boundary,
}

impl DerivativeOp {
    pub fn new(stencil: Stencil, boundary: Boundary) -> Self {
        Self { stencil, boundary }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    FogFull,
    FogX,
    FogY,
    FogZ,
    Sog,
    DtmUnsigned,
    DtmSigned,
}

impl OperatorKind {
    pub fn is_fog(self) -> bool {
        matches!(
            self,
            OperatorKind::FogFull | OperatorKind::FogX | OperatorKind::FogY | OperatorKind::FogZ
        )
    }

    pub fn is_dtm(self) -> bool {
        matches!(self, OperatorKind::DtmUnsigned | OperatorKind::DtmSigned)
    }

    /// Axes differentiated by a first-order kind.
    pub fn fog_axes(self) -> Option<Axes> {
        match self {
            OperatorKind::FogFull => Some(Axes::ALL),
            OperatorKind::FogX => Some(Axes::only(Axis::X)),
            OperatorKind::FogY => Some(Axes::only(Axis::Y)),
            OperatorKind::FogZ => Some(Axes::only(Axis::Z)),
            _ => None,
        }
    }
}

/// The operator φ: kind plus discretisation. Distance-transform kinds ignore
/// the stencil and boundary fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GeometricOperator {
    pub kind: OperatorKind,
    #[serde(default)]
    pub stencil: Stencil,
    #[serde(default)]
    pub boundary: Boundary,
}

impl GeometricOperator {
    pub fn new(kind: OperatorKind) -> Self {
        Self {
            kind,
            stencil: Stencil::default(),
            boundary: Boundary::default(),
        }
    }

    pub fn with_derivative(kind: OperatorKind, op: DerivativeOp) -> Self {
        Self {
            kind,
            stencil: op.stencil,
            boundary: op.boundary,
        }
    }

    pub fn derivative(&self) -> DerivativeOp {
        DerivativeOp::new(self.stencil, self.boundary)
    }
}
