//! Exact Euclidean distance to the nearest boundary voxel of a mask, via the
//! separable lower envelope of parabolas (one linear-time pass per axis).

use super::stencil::for_each_line;
use crate::error::{GeoError, Result};
use crate::volume::{BinaryMask, GridSpec};

/// Distance in millimetres to the closest boundary voxel centre.
///
/// Boundary voxels hold exactly 0. The signed variant is negative strictly
/// inside the foreground.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap {
    grid: GridSpec,
    data: Vec<f64>,
    signed: bool,
}

impl DistanceMap {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    pub fn to_field(&self) -> crate::volume::ScalarField {
        crate::volume::ScalarField::new(self.grid, self.data.clone()).expect("same grid")
    }
}

/// Foreground voxels with a 6-neighbour in the background. A foreground voxel
/// on the volume edge also counts, except along axes of extent 1, which have
/// no edge in that direction.
pub fn boundary_voxels(mask: &BinaryMask) -> Vec<bool> {
    let grid = mask.grid();
    let dims = grid.dims();
    let fg = mask.data();
    (0..grid.voxel_count())
        .map(|i| {
            if !fg[i] {
                return false;
            }
            let c = grid.coords(i).0;
            (0..3).any(|a| {
                if dims[a] == 1 {
                    return false;
                }
                let stride = grid.stride(a);
                let lo = c[a] == 0 || !fg[i - stride];
                let hi = c[a] + 1 == dims[a] || !fg[i + stride];
                lo || hi
            })
        })
        .collect()
}

/// Euclidean distance transform of `mask` measured to its boundary voxels.
pub fn edt(mask: &BinaryMask, signed: bool) -> Result<DistanceMap> {
    if !mask.has_boundary() {
        return Err(GeoError::NoBoundary);
    }
    let grid = *mask.grid();
    let boundary = boundary_voxels(mask);
    let mut sq: Vec<f64> = boundary.iter().map(|&b| if b { 0.0 } else { f64::INFINITY }).collect();

    let spacing = grid.spacing();
    let longest = grid.dims().into_iter().max().unwrap_or(1);
    let mut scratch = Scratch::new(longest);
    for axis in 0..3 {
        let s = spacing[axis];
        for_each_line(&grid, axis, |start, stride, len| {
            for p in 0..len {
                scratch.f[p] = sq[start + p * stride];
            }
            scratch.transform(len, s);
            for p in 0..len {
                sq[start + p * stride] = scratch.d[p];
            }
        });
    }

    let fg = mask.data();
    let data = sq
        .iter()
        .enumerate()
        .map(|(i, &d2)| {
            let d = d2.sqrt();
            if signed && fg[i] && !boundary[i] {
                -d
            } else {
                d
            }
        })
        .collect();
    Ok(DistanceMap { grid, data, signed })
}

struct Scratch {
    f: Vec<f64>,
    d: Vec<f64>,
    v: Vec<usize>,
    z: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            f: vec![0.0; n],
            d: vec![0.0; n],
            v: vec![0; n],
            z: vec![0.0; n + 1],
        }
    }

    /// `d[q] = min_p (s (q - p))² + f[p]` over the first `n` samples.
    /// Infinite samples never enter the envelope.
    fn transform(&mut self, n: usize, s: f64) {
        let f = &self.f;
        let x = |p: usize| p as f64 * s;
        let mut k: isize = -1;
        for q in 0..n {
            if !f[q].is_finite() {
                continue;
            }
            let xq = x(q);
            loop {
                if k < 0 {
                    k = 0;
                    self.v[0] = q;
                    self.z[0] = f64::NEG_INFINITY;
                    self.z[1] = f64::INFINITY;
                    break;
                }
                let p = self.v[k as usize];
                let xp = x(p);
                let cross = ((f[q] + xq * xq) - (f[p] + xp * xp)) / (2.0 * (xq - xp));
                if cross <= self.z[k as usize] {
                    k -= 1;
                } else {
                    k += 1;
                    self.v[k as usize] = q;
                    self.z[k as usize] = cross;
                    self.z[k as usize + 1] = f64::INFINITY;
                    break;
                }
            }
        }
        if k < 0 {
            self.d[..n].fill(f64::INFINITY);
            return;
        }
        let mut j = 0usize;
        for q in 0..n {
            let xq = x(q);
            while self.z[j + 1] < xq {
                j += 1;
            }
            let p = self.v[j];
            let dx = xq - x(p);
            self.d[q] = dx * dx + f[p];
        }
    }
}
