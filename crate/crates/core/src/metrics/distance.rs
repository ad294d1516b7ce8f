//! Point-set distances in millimetres.
//!
//! Nearest-neighbour distances come from an exact separable squared
//! Euclidean distance transform (lower envelope of parabolas per axis,
//! weighted by the voxel spacing), evaluated on the bounding box that
//! holds both sets.

use crate::error::Result;
use crate::volume::{boundary_voxels, Geometry, Mask};

/// Exact squared distance (mm²) from every voxel to the nearest `true`
/// feature voxel. `f64::INFINITY` everywhere if there is no feature.
pub fn squared_edt(dims: [usize; 3], spacing: [f64; 3], feature: &[bool]) -> Vec<f64> {
    let [nx, ny, nz] = dims;
    let mut d: Vec<f64> = feature
        .iter()
        .map(|&f| if f { 0.0 } else { f64::INFINITY })
        .collect();
    let longest = nx.max(ny).max(nz);
    let mut line = vec![0.0; longest];
    let mut out = vec![0.0; longest];
    let mut env = Envelope::with_capacity(longest);
    let strides = [1, nx, nx * ny];
    for axis in 0..3 {
        let n = dims[axis];
        if n == 1 {
            continue;
        }
        let w2 = spacing[axis] * spacing[axis];
        let stride = strides[axis];
        let (oa, ob) = match axis {
            0 => ((ny, nx), (nz, nx * ny)),
            1 => ((nx, 1), (nz, nx * ny)),
            _ => ((nx, 1), (ny, nx)),
        };
        for b in 0..ob.0 {
            for a in 0..oa.0 {
                let base = a * oa.1 + b * ob.1;
                for (k, slot) in line[..n].iter_mut().enumerate() {
                    *slot = d[base + k * stride];
                }
                env.transform(&line[..n], w2, &mut out[..n]);
                for (k, &v) in out[..n].iter().enumerate() {
                    d[base + k * stride] = v;
                }
            }
        }
    }
    d
}

struct Envelope {
    sites: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Envelope {
            sites: Vec::with_capacity(n),
            bounds: Vec::with_capacity(n + 1),
        }
    }

    /// out[q] = min_i f[i] + w2 (q - i)^2 over finite f[i].
    fn transform(&mut self, f: &[f64], w2: f64, out: &mut [f64]) {
        self.sites.clear();
        self.bounds.clear();
        let meet = |f: &[f64], p: usize, q: usize| {
            let (pf, qf) = (p as f64, q as f64);
            ((f[q] + w2 * qf * qf) - (f[p] + w2 * pf * pf)) / (2.0 * w2 * (qf - pf))
        };
        for q in 0..f.len() {
            if !f[q].is_finite() {
                continue;
            }
            loop {
                match self.sites.last() {
                    Some(&p) => {
                        let s = meet(f, p, q);
                        if s <= *self.bounds.last().unwrap() {
                            self.sites.pop();
                            self.bounds.pop();
                        } else {
                            self.sites.push(q);
                            self.bounds.push(s);
                            break;
                        }
                    }
                    None => {
                        self.sites.push(q);
                        self.bounds.push(f64::NEG_INFINITY);
                        break;
                    }
                }
            }
        }
        if self.sites.is_empty() {
            out.fill(f64::INFINITY);
            return;
        }
        let mut k = 0;
        for (q, slot) in out.iter_mut().enumerate() {
            while k + 1 < self.sites.len() && self.bounds[k + 1] < q as f64 {
                k += 1;
            }
            let p = self.sites[k];
            let dq = q as f64 - p as f64;
            *slot = f[p] + w2 * dq * dq;
        }
    }
}

/// Distance from each voxel of `from` to the nearest voxel of `to`.
/// Both are linear indices into `geometry`; `to` must be non-empty.
pub fn nearest_distances(geometry: &Geometry, from: &[usize], to: &[usize]) -> Vec<f64> {
    if from.is_empty() {
        return Vec::new();
    }
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    for &i in from.iter().chain(to) {
        let c = geometry.coords(i);
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    let dims = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
    let local = |i: usize| {
        let c = geometry.coords(i);
        (c[0] - lo[0]) + dims[0] * ((c[1] - lo[1]) + dims[1] * (c[2] - lo[2]))
    };
    let mut feature = vec![false; dims.iter().product()];
    for &i in to {
        feature[local(i)] = true;
    }
    let d2 = squared_edt(dims, geometry.spacing, &feature);
    from.iter().map(|&i| d2[local(i)].sqrt()).collect()
}

/// Hausdorff distance between two voxel sets; `None` if either is empty.
pub fn hausdorff_points(geometry: &Geometry, a: &[usize], b: &[usize]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let max = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);
    Some(max(nearest_distances(geometry, a, b)).max(max(nearest_distances(geometry, b, a))))
}

/// Larger of the two directed mean nearest-neighbour distances.
pub fn euclidean_avg_points(geometry: &Geometry, a: &[usize], b: &[usize]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    Some(mean(nearest_distances(geometry, a, b)).max(mean(nearest_distances(geometry, b, a))))
}

pub fn hausdorff(a: &Mask, b: &Mask) -> Result<Option<f64>> {
    a.geometry().ensure_same(b.geometry(), "hausdorff")?;
    Ok(hausdorff_points(a.geometry(), &a.positives(), &b.positives()))
}

pub fn euclidean_avg(a: &Mask, b: &Mask) -> Result<Option<f64>> {
    a.geometry().ensure_same(b.geometry(), "euclidean distance")?;
    Ok(euclidean_avg_points(a.geometry(), &a.positives(), &b.positives()))
}

/// Symmetric mean distance between the two face-boundary surfaces.
pub fn surface_distance(pred: &Mask, gt: &Mask) -> Result<Option<f64>> {
    pred.geometry().ensure_same(gt.geometry(), "surface distance")?;
    let sp = boundary_voxels(pred);
    let sg = boundary_voxels(gt);
    if sp.is_empty() || sg.is_empty() {
        return Ok(None);
    }
    let g = pred.geometry();
    let total: f64 = nearest_distances(g, &sp, &sg).iter().sum::<f64>()
        + nearest_distances(g, &sg, &sp).iter().sum::<f64>();
    Ok(Some(total / (sp.len() + sg.len()) as f64))
}
