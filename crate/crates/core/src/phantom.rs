//! Seeded synthetic lesion volumes.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)`. Draw order for
//! [`generate_phantom`]: every lesion centre (rejection sampling in the unit
//! ball, three uniforms per attempt), then one radius per lesion, then, for
//! ellipsoids only, the remaining two semi-axes per lesion. [`perturb`] draws
//! one uniform per ground-truth component (drop decision, label order), then
//! spurious lesion centres (three uniforms per attempt), then one normal
//! deviate per voxel in linear order when noise is enabled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::metrics::{connected_components, Connectivity};
use crate::volume::{BinaryMask, GridSpec, ProbabilityMap, VoxelIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LesionShape {
    #[default]
    Sphere,
    Ellipsoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub seed: u64,
    pub grid: GridSpec,
    pub n_lesions: usize,
    pub radius_range_mm: (f64, f64),
    #[serde(default = "default_brain_fraction")]
    pub brain_radius_fraction: f64,
    #[serde(default)]
    pub shape: LesionShape,
}

fn default_brain_fraction() -> f64 {
    0.8
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            grid: GridSpec::isotropic([32, 32, 32]).expect("valid"),
            n_lesions: 3,
            radius_range_mm: (2.0, 4.0),
            brain_radius_fraction: default_brain_fraction(),
            shape: LesionShape::Sphere,
        }
    }
}

impl PhantomSpec {
    /// Centre of the brain ball and its radius in millimetres.
    pub fn brain_ball(&self) -> ([f64; 3], f64) {
        let extent = self.grid.extent_mm();
        let min_extent = extent.iter().copied().fold(f64::INFINITY, f64::min);
        (extent.map(|e| e / 2.0), self.brain_radius_fraction * min_extent / 2.0)
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.radius_range_mm;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(GeoError::Parameter(format!(
                "radius range must satisfy 0 < min <= max, got ({lo}, {hi})"
            )));
        }
        if !(self.brain_radius_fraction > 0.0 && self.brain_radius_fraction <= 1.0) {
            return Err(GeoError::Parameter(format!(
                "brain_radius_fraction must lie in (0, 1], got {}",
                self.brain_radius_fraction
            )));
        }
        let (_, brain_r) = self.brain_ball();
        if hi > brain_r {
            return Err(GeoError::Parameter(format!(
                "max lesion radius {hi} mm exceeds the brain ball radius {brain_r} mm"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lesion {
    pub center_mm: [f64; 3],
    pub semi_axes_mm: [f64; 3],
}

impl Lesion {
    fn contains(&self, p: [f64; 3]) -> bool {
        (0..3)
            .map(|a| ((p[a] - self.center_mm[a]) / self.semi_axes_mm[a]).powi(2))
            .sum::<f64>()
            <= 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub mask: BinaryMask,
    pub lesions: Vec<Lesion>,
    /// 26-connected components actually present (lesions may merge).
    pub realized_components: usize,
}

/// Lesions placed fully inside the brain ball; a voxel is foreground iff its
/// centre lies in some lesion.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (brain_c, brain_r) = spec.brain_ball();
    let (r_lo, r_hi) = spec.radius_range_mm;
    let placement_r = brain_r - r_hi;

    let centers: Vec<[f64; 3]> = (0..spec.n_lesions)
        .map(|_| {
            let u = unit_ball(&mut rng);
            [0, 1, 2].map(|a| brain_c[a] + u[a] * placement_r)
        })
        .collect();
    let sample_radius = |rng: &mut ChaCha8Rng| r_lo + (r_hi - r_lo) * rng.gen::<f64>();
    let radii: Vec<f64> = (0..spec.n_lesions).map(|_| sample_radius(&mut rng)).collect();
    let mut lesions: Vec<Lesion> = centers
        .into_iter()
        .zip(radii)
        .map(|(center_mm, r)| Lesion {
            center_mm,
            semi_axes_mm: [r; 3],
        })
        .collect();
    if spec.shape == LesionShape::Ellipsoid {
        for l in &mut lesions {
            l.semi_axes_mm[1] = sample_radius(&mut rng);
            l.semi_axes_mm[2] = sample_radius(&mut rng);
        }
    }

    let grid = spec.grid;
    let mask = BinaryMask::from_fn(grid, |v| {
        let p = grid.center_mm(v);
        lesions.iter().any(|l| l.contains(p))
    });
    let realized_components = connected_components(&mask, Connectivity::TwentySix).n_components();
    Ok(Phantom {
        mask,
        lesions,
        realized_components,
    })
}

fn unit_ball(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let u = [0; 3].map(|_| 2.0 * rng.gen::<f64>() - 1.0);
        if u.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            return u;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbSpec {
    pub seed: u64,
    #[serde(default)]
    pub blur_radius_mm: f64,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub drop_fraction: f64,
    #[serde(default)]
    pub spurious_count: usize,
    #[serde(default = "default_spurious_radius")]
    pub spurious_radius_mm: f64,
}

fn default_spurious_radius() -> f64 {
    1.5
}

impl Default for PerturbSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            blur_radius_mm: 0.0,
            noise_std: 0.0,
            drop_fraction: 0.0,
            spurious_count: 0,
            spurious_radius_mm: default_spurious_radius(),
        }
    }
}

const SPURIOUS_ATTEMPTS: usize = 1000;

/// Simulates an imperfect model output from a ground-truth mask: drops whole
/// lesions, adds spurious ones away from existing foreground, box-blurs and
/// adds clipped Gaussian noise.
pub fn perturb(gt: &BinaryMask, p: &PerturbSpec) -> Result<ProbabilityMap> {
    if !(0.0..=1.0).contains(&p.drop_fraction) {
        return Err(GeoError::Parameter(format!(
            "drop_fraction {} outside [0, 1]",
            p.drop_fraction
        )));
    }
    if !(p.blur_radius_mm >= 0.0 && p.noise_std >= 0.0 && p.spurious_radius_mm > 0.0) {
        return Err(GeoError::Parameter(
            "blur radius and noise std must be >= 0, spurious radius > 0".into(),
        ));
    }
    let grid = *gt.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);

    let labels = connected_components(gt, Connectivity::TwentySix);
    let keep: Vec<bool> = (0..labels.n_components())
        .map(|_| rng.gen::<f64>() >= p.drop_fraction)
        .collect();
    let mut values: Vec<f64> = labels
        .labels()
        .iter()
        .map(|&l| if l > 0 && keep[l as usize - 1] { 1.0 } else { 0.0 })
        .collect();

    let mut occupied = gt.data().to_vec();
    let extent = grid.extent_mm();
    for _ in 0..p.spurious_count {
        let mut placed = None;
        for attempt in 0..SPURIOUS_ATTEMPTS {
            let center = [0, 1, 2].map(|a| rng.gen::<f64>() * extent[a]);
            let voxels = ball_voxels(&grid, center, p.spurious_radius_mm);
            if attempt + 1 == SPURIOUS_ATTEMPTS || !touches(&grid, &occupied, &voxels) {
                placed = Some(voxels);
                break;
            }
        }
        for i in placed.unwrap_or_default() {
            values[i] = 1.0;
            occupied[i] = true;
        }
    }

    if p.blur_radius_mm > 0.0 {
        let spacing = grid.spacing();
        for (axis, s) in spacing.iter().enumerate() {
            let half = (p.blur_radius_mm / s).floor() as usize;
            if half > 0 {
                box_mean_axis(&grid, axis, half, &mut values);
            }
        }
    }

    if p.noise_std > 0.0 {
        let normal = Normal::new(0.0, p.noise_std).map_err(|e| GeoError::Parameter(e.to_string()))?;
        for v in values.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    values.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    ProbabilityMap::new(grid, values)
}

/// Voxels whose centre lies within `radius` of `center`, plus the voxel
/// containing `center`.
fn ball_voxels(grid: &GridSpec, center: [f64; 3], radius: f64) -> Vec<usize> {
    let dims = grid.dims();
    let spacing = grid.spacing();
    let range = |a: usize| {
        let lo = ((center[a] - radius) / spacing[a] - 0.5).floor().max(0.0) as usize;
        let hi = (((center[a] + radius) / spacing[a] - 0.5).ceil() as usize).min(dims[a] - 1);
        lo..=hi
    };
    let home = [0, 1, 2].map(|a| ((center[a] / spacing[a]) as usize).min(dims[a] - 1));
    let mut out = vec![grid.index(home[0], home[1], home[2])];
    for iz in range(2) {
        for iy in range(1) {
            for ix in range(0) {
                let c = grid.center_mm(VoxelIndex([ix, iy, iz]));
                let d2: f64 = (0..3).map(|a| (c[a] - center[a]).powi(2)).sum();
                let idx = grid.index(ix, iy, iz);
                if d2 <= radius * radius && idx != out[0] {
                    out.push(idx);
                }
            }
        }
    }
    out
}

/// True if any voxel in `voxels` is occupied or 26-adjacent to an occupied voxel.
fn touches(grid: &GridSpec, occupied: &[bool], voxels: &[usize]) -> bool {
    let dims = grid.dims();
    voxels.iter().any(|&i| {
        let c = grid.coords(i).0;
        (-1..=1isize).any(|dz| {
            (-1..=1isize).any(|dy| {
                (-1..=1isize).any(|dx| {
                    let n = [c[0] as isize + dx, c[1] as isize + dy, c[2] as isize + dz];
                    (0..3).all(|a| n[a] >= 0 && (n[a] as usize) < dims[a])
                        && occupied[grid.index(n[0] as usize, n[1] as usize, n[2] as usize)]
                })
            })
        })
    })
}

/// Running mean over `[i - half, i + half]`, normalised by the number of
/// in-volume samples.
fn box_mean_axis(grid: &GridSpec, axis: usize, half: usize, values: &mut [f64]) {
    let dims = grid.dims();
    let stride = grid.stride(axis);
    let len = dims[axis];
    let mut line = vec![0.0; len];
    let mut prefix = vec![0.0; len + 1];
    for start in 0..grid.voxel_count() {
        if grid.coords(start).0[axis] != 0 {
            continue;
        }
        for p in 0..len {
            line[p] = values[start + p * stride];
            prefix[p + 1] = prefix[p] + line[p];
        }
        for p in 0..len {
            let lo = p.saturating_sub(half);
            let hi = (p + half).min(len - 1);
            values[start + p * stride] = (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64;
        }
    }
}
