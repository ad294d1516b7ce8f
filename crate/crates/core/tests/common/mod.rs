//! Brute-force oracles shared by the integration tests. Nothing here calls
//! into the library's metric code.

#![allow(dead_code)]

use lesionfuse::volume::{Geometry, Mask};
use rand::Rng;

pub fn random_mask(rng: &mut impl Rng, g: Geometry, density: f64) -> Mask {
    Mask::from_fn(g, |_| rng.random_bool(density)).unwrap()
}

pub fn random_geometry(rng: &mut impl Rng, max: usize) -> Geometry {
    let dims = [
        rng.random_range(1..=max),
        rng.random_range(1..=max),
        rng.random_range(1..=max),
    ];
    let spacing = [
        rng.random_range(0.5..2.0),
        rng.random_range(0.5..2.0),
        rng.random_range(0.5..2.0),
    ];
    Geometry::new(dims, spacing).unwrap()
}

pub fn coords(g: &Geometry, i: usize) -> [usize; 3] {
    let [nx, ny, _] = g.dims;
    [i % nx, (i / nx) % ny, i / (nx * ny)]
}

pub fn physical_distance(g: &Geometry, a: usize, b: usize) -> f64 {
    let (ca, cb) = (coords(g, a), coords(g, b));
    (0..3)
        .map(|k| {
            let d = (ca[k] as f64 - cb[k] as f64) * g.spacing[k];
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn nearest(g: &Geometry, from: &[usize], to: &[usize]) -> Vec<f64> {
    from.iter()
        .map(|&a| to.iter().map(|&b| physical_distance(g, a, b)).fold(f64::INFINITY, f64::min))
        .collect()
}

pub fn positives(m: &Mask) -> Vec<usize> {
    (0..m.len()).filter(|&i| m.data()[i]).collect()
}

pub fn hausdorff(g: &Geometry, a: &[usize], b: &[usize]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let ab = nearest(g, a, b).into_iter().fold(0.0, f64::max);
    let ba = nearest(g, b, a).into_iter().fold(0.0, f64::max);
    Some(ab.max(ba))
}

pub fn euclidean_avg(g: &Geometry, a: &[usize], b: &[usize]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let ab: f64 = nearest(g, a, b).iter().sum::<f64>() / a.len() as f64;
    let ba: f64 = nearest(g, b, a).iter().sum::<f64>() / b.len() as f64;
    Some(ab.max(ba))
}

/// Positive voxels with a face neighbour that is negative or off the grid.
pub fn surface(m: &Mask) -> Vec<usize> {
    let g = m.geometry();
    let d = m.data();
    let dims = g.dims;
    positives(m)
        .into_iter()
        .filter(|&i| {
            let c = coords(g, i);
            (0..3).any(|k| {
                [-1i64, 1].iter().any(|&s| {
                    let n = c[k] as i64 + s;
                    if n < 0 || n >= dims[k] as i64 {
                        return true;
                    }
                    let mut cc = c;
                    cc[k] = n as usize;
                    !d[g.index(cc[0], cc[1], cc[2])]
                })
            })
        })
        .collect()
}

pub fn surface_distance(pred: &Mask, gt: &Mask) -> Option<f64> {
    let g = pred.geometry();
    let (sp, sg) = (surface(pred), surface(gt));
    if sp.is_empty() || sg.is_empty() {
        return None;
    }
    let total: f64 = nearest(g, &sp, &sg).iter().sum::<f64>() + nearest(g, &sg, &sp).iter().sum::<f64>();
    Some(total / (sp.len() + sg.len()) as f64)
}

/// Union-find labelling; `reach` is the largest allowed sum of absolute
/// coordinate offsets (1 face, 2 edge, 3 vertex).
pub fn components(m: &Mask, reach: usize) -> Vec<Vec<usize>> {
    let g = m.geometry();
    let n = m.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let pos = positives(m);
    for (k, &a) in pos.iter().enumerate() {
        let ca = coords(g, a);
        for &b in &pos[k + 1..] {
            let cb = coords(g, b);
            let diffs: Vec<usize> = (0..3).map(|i| ca[i].abs_diff(cb[i])).collect();
            if diffs.iter().all(|&d| d <= 1) && diffs.iter().sum::<usize>() <= reach {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for &a in &pos {
        let r = find(&mut parent, a);
        groups.entry(r).or_default().push(a);
    }
    groups.into_values().collect()
}

/// Counts and error areas from explicit component enumeration.
#[derive(Debug, PartialEq)]
pub struct ObjectOracle {
    pub tp_o: u64,
    pub fp_o: u64,
    pub fn_o: u64,
    pub detection_error: u64,
    pub outline_error: u64,
    pub mean_total_area: f64,
}

pub fn object_oracle(pred: &Mask, gt: &Mask, reach: usize) -> ObjectOracle {
    let (p, g) = (pred.data(), gt.data());
    let pc = components(pred, reach);
    let gc = components(gt, reach);
    let touches = |comp: &Vec<usize>, other: &[bool]| comp.iter().any(|&i| other[i]);
    let mut region = std::collections::BTreeSet::new();
    let mut o = ObjectOracle {
        tp_o: 0,
        fp_o: 0,
        fn_o: 0,
        detection_error: 0,
        outline_error: 0,
        mean_total_area: (positives(pred).len() + positives(gt).len()) as f64 / 2.0,
    };
    for c in &gc {
        if touches(c, p) {
            o.tp_o += 1;
            region.extend(c.iter().copied());
        } else {
            o.fn_o += 1;
        }
    }
    for c in &pc {
        if touches(c, g) {
            region.extend(c.iter().copied());
        } else {
            o.fp_o += 1;
            o.detection_error += c.len() as u64;
        }
    }
    let both = (0..p.len()).filter(|&i| p[i] && g[i]).count();
    o.outline_error = (region.len() - both) as u64;
    o
}

/// Minimal NIfTI-1 single file: 348-byte header, 4 pad bytes, payload.
pub fn nifti_bytes(dims: [i16; 3], pixdim: [f32; 3], datatype: i16, payload: &[u8]) -> Vec<u8> {
    let mut h = vec![0u8; 352];
    h[0..4].copy_from_slice(&348i32.to_le_bytes());
    let dim = [3i16, dims[0], dims[1], dims[2], 1, 1, 1, 1];
    for (k, d) in dim.iter().enumerate() {
        h[40 + 2 * k..42 + 2 * k].copy_from_slice(&d.to_le_bytes());
    }
    h[70..72].copy_from_slice(&datatype.to_le_bytes());
    let bitpix: i16 = match datatype {
        2 => 8,
        4 => 16,
        16 => 32,
        _ => 8,
    };
    h[72..74].copy_from_slice(&bitpix.to_le_bytes());
    let pd = [1.0f32, pixdim[0], pixdim[1], pixdim[2], 0.0, 0.0, 0.0, 0.0];
    for (k, v) in pd.iter().enumerate() {
        h[76 + 4 * k..80 + 4 * k].copy_from_slice(&v.to_le_bytes());
    }
    h[108..112].copy_from_slice(&352f32.to_le_bytes());
    h[112..116].copy_from_slice(&1f32.to_le_bytes());
    h[344..348].copy_from_slice(b"n+1\0");
    h.extend_from_slice(payload);
    h
}
