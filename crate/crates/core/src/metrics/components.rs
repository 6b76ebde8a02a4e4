use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::volume::{BinaryMask, GridSpec};

/// Voxel neighbourhood: faces (6), faces and edges (18), or the full cube (26).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Connectivity {
    Six,
    Eighteen,
    #[default]
    TwentySix,
}

impl TryFrom<u32> for Connectivity {
    type Error = GeoError;

    fn try_from(n: u32) -> Result<Self> {
        match n {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            _ => Err(GeoError::Parameter(format!(
                "connectivity must be 6, 18 or 26, got {n}"
            ))),
        }
    }
}

impl From<Connectivity> for u32 {
    fn from(c: Connectivity) -> u32 {
        match c {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }
}

impl Connectivity {
    /// Offsets in the connectivity that precede the centre in linear order.
    fn backward_offsets(self) -> Vec<[isize; 3]> {
        let max_nonzero = match self {
            Connectivity::Six => 1,
            Connectivity::Eighteen => 2,
            Connectivity::TwentySix => 3,
        };
        let mut out = Vec::new();
        for dz in -1..=1isize {
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let nonzero = [dx, dy, dz].iter().filter(|&&d| d != 0).count();
                    let before = (dz, dy, dx) < (0, 0, 0);
                    if nonzero > 0 && nonzero <= max_nonzero && before {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

/// Component labels: 0 is background, components are `1..=n` ordered by
/// the smallest linear index of their voxels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    grid: GridSpec,
    labels: Vec<u32>,
    n_components: usize,
}

impl LabelMap {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    /// Voxel count of every component, indexed by `label - 1`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_components];
        for &l in &self.labels {
            if l > 0 {
                sizes[l as usize - 1] += 1;
            }
        }
        sizes
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        // smaller index as root keeps roots at the first voxel of each set
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

/// Union-find labelling over already-scanned neighbours, then relabelling in
/// linear order.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> LabelMap {
    let grid = *mask.grid();
    let dims = grid.dims();
    let n = grid.voxel_count();
    let fg = mask.data();
    let offsets = connectivity.backward_offsets();
    let mut parent: Vec<usize> = (0..n).collect();

    for i in 0..n {
        if !fg[i] {
            continue;
        }
        let c = grid.coords(i).0;
        for off in &offsets {
            let mut nb = [0usize; 3];
            let inside = (0..3).all(|a| {
                let v = c[a] as isize + off[a];
                nb[a] = v as usize;
                v >= 0 && (v as usize) < dims[a]
            });
            if inside {
                let j = grid.index(nb[0], nb[1], nb[2]);
                if fg[j] {
                    union(&mut parent, i, j);
                }
            }
        }
    }

    let mut labels = vec![0u32; n];
    let mut root_label = vec![0u32; n];
    let mut next = 0u32;
    for i in 0..n {
        if !fg[i] {
            continue;
        }
        let r = find(&mut parent, i);
        if root_label[r] == 0 {
            next += 1;
            root_label[r] = next;
        }
        labels[i] = root_label[r];
    }
    LabelMap {
        grid,
        labels,
        n_components: next as usize,
    }
}
