use super::{Axes, Axis, Boundary, DerivativeOp, Stencil};
use crate::error::{GeoError, Result};
use crate::volume::{GridSpec, ScalarField};

/// Per-axis partial derivatives; absent components were not requested.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    op: DerivativeOp,
    components: [Option<ScalarField>; 3],
}

impl VectorField {
    pub fn new(grid: GridSpec, op: DerivativeOp, components: [Option<ScalarField>; 3]) -> Result<Self> {
        for c in components.iter().flatten() {
            grid.ensure_same(c.grid())?;
        }
        Ok(Self { grid, op, components })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn op(&self) -> DerivativeOp {
        self.op
    }

    pub fn component(&self, axis: Axis) -> Option<&ScalarField> {
        self.components[axis.index()].as_ref()
    }

    pub fn axes(&self) -> Axes {
        Axes::from_slice(
            &Axis::ALL
                .into_iter()
                .filter(|a| self.components[a.index()].is_some())
                .collect::<Vec<_>>(),
        )
    }

    pub fn components(&self) -> impl Iterator<Item = (Axis, &ScalarField)> {
        Axis::ALL
            .into_iter()
            .filter_map(|a| self.components[a.index()].as_ref().map(|c| (a, c)))
    }

    /// Componentwise `self - other`; both must carry the same axes.
    pub fn sub(&self, other: &VectorField) -> Result<VectorField> {
        self.grid.ensure_same(&other.grid)?;
        if self.axes() != other.axes() || self.op != other.op {
            return Err(GeoError::MetadataMismatch(
                "vector fields differ in axes or stencil".into(),
            ));
        }
        let components = Axis::ALL.map(|a| match (&self.components[a.index()], &other.components[a.index()]) {
            (Some(l), Some(r)) => {
                let data = l.data().iter().zip(r.data()).map(|(x, y)| x - y).collect();
                Some(ScalarField::new(self.grid, data).expect("same grid"))
            }
            _ => None,
        });
        Ok(VectorField {
            grid: self.grid,
            op: self.op,
            components,
        })
    }

    /// Pairwise-summed `⟨self, other⟩` over all present components.
    pub fn dot(&self, other: &VectorField) -> f64 {
        self.components()
            .filter_map(|(a, c)| other.component(a).map(|o| c.dot(o)))
            .sum()
    }
}

type Taps = [(isize, f64)];

/// Calls `f(start, stride, len)` for every scan line along `axis`.
pub(crate) fn for_each_line(grid: &GridSpec, axis: usize, mut f: impl FnMut(usize, usize, usize)) {
    let dims = grid.dims();
    let stride = grid.stride(axis);
    let (a, b) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    for j in 0..dims[b] {
        for i in 0..dims[a] {
            let mut c = [0usize; 3];
            c[a] = i;
            c[b] = j;
            f(grid.index(c[0], c[1], c[2]), stride, dims[axis]);
        }
    }
}

#[inline]
fn neighbour(pos: usize, offset: isize, len: usize, boundary: Boundary) -> Option<usize> {
    let j = pos as isize + offset;
    if (0..len as isize).contains(&j) {
        Some(j as usize)
    } else {
        match boundary {
            Boundary::Replicate => Some(j.clamp(0, len as isize - 1) as usize),
            Boundary::Zero => None,
        }
    }
}

/// `out += A_axis f` for the tap stencil along one axis.
fn apply(grid: &GridSpec, axis: usize, taps: &Taps, boundary: Boundary, f: &[f64], out: &mut [f64]) {
    for_each_line(grid, axis, |start, stride, len| {
        for p in 0..len {
            let mut acc = 0.0;
            for &(off, c) in taps {
                if let Some(q) = neighbour(p, off, len, boundary) {
                    acc += c * f[start + q * stride];
                }
            }
            out[start + p * stride] += acc;
        }
    });
}

/// `out += A_axisᵀ w`, the exact transpose of [`apply`].
fn apply_transpose(grid: &GridSpec, axis: usize, taps: &Taps, boundary: Boundary, w: &[f64], out: &mut [f64]) {
    for_each_line(grid, axis, |start, stride, len| {
        for p in 0..len {
            let wp = w[start + p * stride];
            for &(off, c) in taps {
                if let Some(q) = neighbour(p, off, len, boundary) {
                    out[start + q * stride] += c * wp;
                }
            }
        }
    });
}

fn first_order_taps(stencil: Stencil, spacing: f64) -> Vec<(isize, f64)> {
    match stencil {
        Stencil::Central => {
            let c = 0.5 / spacing;
            vec![(-1, -c), (1, c)]
        }
        Stencil::Forward => {
            let c = 1.0 / spacing;
            vec![(0, -c), (1, c)]
        }
    }
}

fn second_order_taps(spacing: f64) -> [(isize, f64); 3] {
    let c = 1.0 / (spacing * spacing);
    [(-1, c), (0, -2.0 * c), (1, c)]
}

/// Discrete partial derivatives of `f` along the requested axes, scaled by the
/// physical spacing.
pub fn fog(f: &ScalarField, axes: Axes, op: DerivativeOp) -> Result<VectorField> {
    if axes.is_empty() {
        return Err(GeoError::Parameter("fog needs at least one axis".into()));
    }
    let grid = *f.grid();
    let spacing = grid.spacing();
    let components = Axis::ALL.map(|axis| {
        axes.contains(axis).then(|| {
            let a = axis.index();
            let mut out = vec![0.0; grid.voxel_count()];
            apply(
                &grid,
                a,
                &first_order_taps(op.stencil, spacing[a]),
                op.boundary,
                f.data(),
                &mut out,
            );
            ScalarField::new(grid, out).expect("same grid")
        })
    });
    Ok(VectorField { grid, op, components })
}

/// `Dᵀ w` for the linear map `D` computed by [`fog`] with the same operator.
pub fn fog_adjoint(w: &VectorField, op: DerivativeOp) -> Result<ScalarField> {
    if w.op != op {
        return Err(GeoError::MetadataMismatch(format!(
            "vector field was produced with {:?}, adjoint requested for {op:?}",
            w.op
        )));
    }
    let grid = w.grid;
    let spacing = grid.spacing();
    let mut out = vec![0.0; grid.voxel_count()];
    for (axis, c) in w.components() {
        let a = axis.index();
        apply_transpose(
            &grid,
            a,
            &first_order_taps(op.stencil, spacing[a]),
            op.boundary,
            c.data(),
            &mut out,
        );
    }
    ScalarField::new(grid, out)
}

/// Discrete Laplacian `Σ_i (f[i-1] - 2 f[i] + f[i+1]) / s_i²`. The stencil has
/// no first-order discretisation choice, so only the boundary rule is used.
pub fn sog(f: &ScalarField, boundary: Boundary) -> ScalarField {
    let grid = *f.grid();
    let spacing = grid.spacing();
    let mut out = vec![0.0; grid.voxel_count()];
    for a in 0..3 {
        apply(&grid, a, &second_order_taps(spacing[a]), boundary, f.data(), &mut out);
    }
    ScalarField::new(grid, out).expect("same grid")
}

/// Transpose of [`sog`], computed independently from the forward pass. It
/// agrees with `sog` for both boundary rules.
pub fn sog_adjoint(w: &ScalarField, boundary: Boundary) -> ScalarField {
    let grid = *w.grid();
    let spacing = grid.spacing();
    let mut out = vec![0.0; grid.voxel_count()];
    for a in 0..3 {
        apply_transpose(&grid, a, &second_order_taps(spacing[a]), boundary, w.data(), &mut out);
    }
    ScalarField::new(grid, out).expect("same grid")
}

/// Voxelwise Euclidean norm of a vector field.
pub fn gradient_magnitude(v: &VectorField) -> ScalarField {
    let grid = v.grid;
    let mut out = vec![0.0; grid.voxel_count()];
    for (_, c) in v.components() {
        for (o, x) in out.iter_mut().zip(c.data()) {
            *o += x * x;
        }
    }
    out.iter_mut().for_each(|o| *o = o.sqrt());
    ScalarField::new(grid, out).expect("same grid")
}
