use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Geometry, Image2, Mask};
use crate::error::{Error, Result};

/// 3D voxel adjacency. Face = 6, edge = 18, vertex = 26 neighbours.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Connectivity {
    Face,
    Edge,
    #[default]
    Vertex,
}

impl Connectivity {
    pub fn neighbours(self) -> usize {
        match self {
            Connectivity::Face => 6,
            Connectivity::Edge => 18,
            Connectivity::Vertex => 26,
        }
    }

    fn max_nonzero(self) -> usize {
        match self {
            Connectivity::Face => 1,
            Connectivity::Edge => 2,
            Connectivity::Vertex => 3,
        }
    }

    fn offsets(self) -> Vec<[isize; 3]> {
        let mut out = Vec::with_capacity(self.neighbours());
        for dz in -1..=1isize {
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let nz = [dx, dy, dz].iter().filter(|&&d| d != 0).count();
                    if nz >= 1 && nz <= self.max_nonzero() {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

impl FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "6" => Ok(Connectivity::Face),
            "18" => Ok(Connectivity::Edge),
            "26" => Ok(Connectivity::Vertex),
            other => Err(Error::invalid(format!(
                "3D connectivity must be 6, 18 or 26, got '{other}'"
            ))),
        }
    }
}

/// 2D pixel adjacency.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Connectivity2d {
    Four,
    #[default]
    Eight,
}

/// Connected components of a mask.
///
/// Components are ordered by their smallest linear voxel index and each
/// holds its voxel indices in ascending order.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentSet {
    pub components: Vec<Vec<usize>>,
    pub connectivity: Connectivity,
    pub volumes_mm3: Vec<f64>,
}

impl ComponentSet {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Per-voxel component id: 0 for background, `i + 1` for component `i`.
    pub fn label_map(&self, n_voxels: usize) -> Vec<u32> {
        let mut map = vec![0u32; n_voxels];
        for (i, comp) in self.components.iter().enumerate() {
            for &v in comp {
                map[v] = i as u32 + 1;
            }
        }
        map
    }
}

pub fn connected_components(mask: &Mask, connectivity: Connectivity) -> ComponentSet {
    let g = *mask.geometry();
    let components = label_grid(mask.data(), g.dims, &connectivity.offsets());
    let voxel = g.voxel_volume_mm3();
    let volumes_mm3 = components.iter().map(|c| c.len() as f64 * voxel).collect();
    ComponentSet {
        components,
        connectivity,
        volumes_mm3,
    }
}

/// Components of a 2D image; returned indices are `u + width * v`.
pub fn connected_components_2d(image: &Image2<bool>, connectivity: Connectivity2d) -> Vec<Vec<usize>> {
    let offsets: Vec<[isize; 3]> = match connectivity {
        Connectivity2d::Four => vec![[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0]],
        Connectivity2d::Eight => (-1..=1)
            .flat_map(|dy| (-1..=1).map(move |dx| [dx, dy, 0]))
            .filter(|d| *d != [0, 0, 0])
            .collect(),
    };
    label_grid(&image.data, [image.width, image.height, 1], &offsets)
}

fn label_grid(data: &[bool], dims: [usize; 3], offsets: &[[isize; 3]]) -> Vec<Vec<usize>> {
    let [nx, ny, nz] = dims;
    let mut seen = vec![false; data.len()];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for seed in 0..data.len() {
        if !data[seed] || seen[seed] {
            continue;
        }
        seen[seed] = true;
        stack.push(seed);
        let mut comp = Vec::new();
        while let Some(i) = stack.pop() {
            comp.push(i);
            let x = (i % nx) as isize;
            let y = ((i / nx) % ny) as isize;
            let z = (i / (nx * ny)) as isize;
            for d in offsets {
                let (qx, qy, qz) = (x + d[0], y + d[1], z + d[2]);
                if qx < 0
                    || qy < 0
                    || qz < 0
                    || qx >= nx as isize
                    || qy >= ny as isize
                    || qz >= nz as isize
                {
                    continue;
                }
                let j = qx as usize + nx * (qy as usize + ny * qz as usize);
                if data[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

/// Positive voxels with at least one face neighbour that is negative or
/// outside the grid. Ascending linear indices.
pub fn boundary_voxels(mask: &Mask) -> Vec<usize> {
    let g: &Geometry = mask.geometry();
    let [nx, ny, nz] = g.dims;
    let d = mask.data();
    let mut out = Vec::new();
    for (i, &on) in d.iter().enumerate() {
        if !on {
            continue;
        }
        let [x, y, z] = g.coords(i);
        let exposed = x == 0
            || y == 0
            || z == 0
            || x + 1 == nx
            || y + 1 == ny
            || z + 1 == nz
            || !d[i - 1]
            || !d[i + 1]
            || !d[i - nx]
            || !d[i + nx]
            || !d[i - nx * ny]
            || !d[i + nx * ny];
        if exposed {
            out.push(i);
        }
    }
    out
}

/// 2D analogue of [`boundary_voxels`] with 4-neighbourhoods.
pub fn boundary_pixels(image: &Image2<bool>) -> Vec<(usize, usize)> {
    let (w, h) = (image.width, image.height);
    let mut out = Vec::new();
    for v in 0..h {
        for u in 0..w {
            if !image.get(u, v) {
                continue;
            }
            let exposed = u == 0
                || v == 0
                || u + 1 == w
                || v + 1 == h
                || !image.get(u - 1, v)
                || !image.get(u + 1, v)
                || !image.get(u, v - 1)
                || !image.get(u, v + 1);
            if exposed {
                out.push((u, v));
            }
        }
    }
    out
}
