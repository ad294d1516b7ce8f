//! Seeded stand-in for the six directional classifiers.
//!
//! A [`NoiseModel`] turns a ternary ground truth into a plausible classifier
//! output: per-voxel class confusion, relabelling near class boundaries, and
//! spherical false-positive blobs in the background. Every draw comes from
//! the `(seed, stream)` generator of [`crate::rng`].

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{ClassifierBundle, Focus};
use crate::rng::{self, substream};
use crate::volume::{Geometry, Label, LabelVolume, Orientation, ScalarVolume};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Row `i` is the output distribution for ground-truth class `i`.
    pub confusion: [[f64; 3]; 3],
    /// Half-width (voxels) of the band around class boundaries.
    pub jitter_radius: usize,
    /// Chance that a band voxel copies a random neighbour's class.
    pub jitter_probability: f64,
    /// Expected false-positive blobs per volume.
    pub blob_rate: f64,
    /// Blob radius in voxels.
    pub blob_radius: f64,
    /// How far lesion-focused streams lean toward over-segmentation and
    /// background-focused streams toward under-segmentation, in `[0, 1)`.
    pub focus_bias: f64,
    pub seed: u64,
}

const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoisePreset {
    None,
    Low,
    Med,
    High,
}

impl FromStr for NoisePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(NoisePreset::None),
            "low" => Ok(NoisePreset::Low),
            "med" => Ok(NoisePreset::Med),
            "high" => Ok(NoisePreset::High),
            _ => Err(Error::invalid(format!("unknown noise preset {s:?} (none, low, med, high)"))),
        }
    }
}

impl fmt::Display for NoisePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoisePreset::None => "none",
            NoisePreset::Low => "low",
            NoisePreset::Med => "med",
            NoisePreset::High => "high",
        })
    }
}

impl NoiseModel {
    /// Output equals input.
    pub fn zero(seed: u64) -> Self {
        NoiseModel {
            confusion: IDENTITY,
            jitter_radius: 0,
            jitter_probability: 0.0,
            blob_rate: 0.0,
            blob_radius: 0.0,
            focus_bias: 0.0,
            seed,
        }
    }

    pub fn preset(p: NoisePreset, seed: u64) -> Self {
        let base = NoiseModel::zero(seed);
        match p {
            NoisePreset::None => base,
            NoisePreset::Low => NoiseModel {
                confusion: [[0.995, 0.004, 0.001], [0.05, 0.90, 0.05], [0.01, 0.04, 0.95]],
                jitter_radius: 1,
                jitter_probability: 0.10,
                blob_rate: 0.5,
                blob_radius: 1.5,
                focus_bias: 0.3,
                ..base
            },
            NoisePreset::Med => NoiseModel {
                confusion: [[0.985, 0.010, 0.005], [0.10, 0.80, 0.10], [0.02, 0.08, 0.90]],
                jitter_radius: 1,
                jitter_probability: 0.25,
                blob_rate: 1.5,
                blob_radius: 2.0,
                focus_bias: 0.4,
                ..base
            },
            NoisePreset::High => NoiseModel {
                confusion: [[0.96, 0.03, 0.01], [0.20, 0.60, 0.20], [0.05, 0.15, 0.80]],
                jitter_radius: 2,
                jitter_probability: 0.35,
                blob_rate: 3.0,
                blob_radius: 2.5,
                focus_bias: 0.5,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.confusion.iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::invalid(format!("confusion row {i} has an entry outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("confusion row {i} sums to {s}")));
            }
        }
        let probability = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} {p} outside [0, 1]")))
            }
        };
        probability("jitter probability", self.jitter_probability)?;
        if !(0.0..1.0).contains(&self.focus_bias) {
            return Err(Error::invalid(format!("focus bias {} outside [0, 1)", self.focus_bias)));
        }
        if !(self.blob_rate >= 0.0 && self.blob_rate.is_finite()) {
            return Err(Error::invalid(format!("blob rate {} must be non-negative", self.blob_rate)));
        }
        if !(self.blob_radius >= 0.0 && self.blob_radius.is_finite()) {
            return Err(Error::invalid(format!("blob radius {} must be non-negative", self.blob_radius)));
        }
        Ok(())
    }

    /// The model as seen by one classifier focus. Lesion focus scales the
    /// upgrade probabilities and blob rate by `1 + bias` and downgrades by
    /// `1 - bias`; background focus does the reverse. Diagonals absorb the
    /// difference, clamped so rows stay stochastic.
    pub fn for_focus(&self, focus: Focus) -> NoiseModel {
        let b = self.focus_bias;
        let (up, down) = match focus {
            Focus::Lesion => (1.0 + b, 1.0 - b),
            Focus::Background => (1.0 - b, 1.0 + b),
        };
        let mut m = *self;
        for i in 0..3 {
            let mut off = 0.0;
            for j in 0..3 {
                if j != i {
                    let k = if j > i { up } else { down };
                    m.confusion[i][j] = self.confusion[i][j] * k;
                    off += m.confusion[i][j];
                }
            }
            if off > 1.0 {
                for j in 0..3 {
                    if j != i {
                        m.confusion[i][j] /= off;
                    }
                }
                off = 1.0;
            }
            m.confusion[i][i] = 1.0 - off;
        }
        m.blob_rate = self.blob_rate * up;
        m
    }
}

fn draw_class(row: &[f64; 3], u: f64) -> Label {
    if u < row[0] {
        Label::Background
    } else if u < row[0] + row[1] {
        Label::Uncertainty
    } else {
        Label::Lesion
    }
}

/// Ground-truth voxels with a 6-neighbour of another class.
fn class_edges(gt: &LabelVolume) -> Vec<bool> {
    let g = gt.geometry();
    let [nx, ny, nz] = g.dims;
    let d = gt.data();
    let mut edge = vec![false; d.len()];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = g.index(x, y, z);
                let differs = |xx: usize, yy: usize, zz: usize| d[g.index(xx, yy, zz)] != d[i];
                edge[i] = (x > 0 && differs(x - 1, y, z))
                    || (x + 1 < nx && differs(x + 1, y, z))
                    || (y > 0 && differs(x, y - 1, z))
                    || (y + 1 < ny && differs(x, y + 1, z))
                    || (z > 0 && differs(x, y, z - 1))
                    || (z + 1 < nz && differs(x, y, z + 1));
            }
        }
    }
    edge
}

fn clamp_range(c: usize, r: usize, n: usize) -> std::ops::RangeInclusive<usize> {
    c.saturating_sub(r)..=(c + r).min(n - 1)
}

/// One simulated classifier output.
pub fn perturb_volume(gt: &LabelVolume, nm: &NoiseModel, stream_id: u64) -> Result<LabelVolume> {
    nm.validate()?;
    let g = *gt.geometry();
    let d = gt.data();

    let mut rng = rng::stream(nm.seed, substream(stream_id, 0));
    let mut out: Vec<Label> = d
        .iter()
        .map(|&l| draw_class(&nm.confusion[l as usize], rng.random::<f64>()))
        .collect();

    if nm.jitter_radius > 0 && nm.jitter_probability > 0.0 {
        let r = nm.jitter_radius;
        let edges = class_edges(gt);
        let mut band = vec![false; d.len()];
        for (i, _) in edges.iter().enumerate().filter(|(_, &e)| e) {
            let [x, y, z] = g.coords(i);
            for zz in clamp_range(z, r, g.dims[2]) {
                for yy in clamp_range(y, r, g.dims[1]) {
                    for xx in clamp_range(x, r, g.dims[0]) {
                        band[g.index(xx, yy, zz)] = true;
                    }
                }
            }
        }
        let mut rng = rng::stream(nm.seed, substream(stream_id, 1));
        let span = 2 * r as i64 + 1;
        for (i, _) in band.iter().enumerate().filter(|(_, &b)| b) {
            if rng.random::<f64>() >= nm.jitter_probability {
                continue;
            }
            let c = g.coords(i);
            let mut n = [0usize; 3];
            for a in 0..3 {
                let off = rng.random_range(0..span) - r as i64;
                n[a] = (c[a] as i64 + off).clamp(0, g.dims[a] as i64 - 1) as usize;
            }
            out[i] = d[g.index(n[0], n[1], n[2])];
        }
    }

    if nm.blob_rate > 0.0 {
        let mut rng = rng::stream(nm.seed, substream(stream_id, 2));
        let count = Poisson::new(nm.blob_rate)
            .map_err(|e| Error::invalid(e.to_string()))?
            .sample(&mut rng) as usize;
        let r = nm.blob_radius;
        let reach = r.floor() as usize;
        for _ in 0..count {
            let c: Vec<usize> = (0..3).map(|a| rng.random_range(0..g.dims[a])).collect();
            for z in clamp_range(c[2], reach, g.dims[2]) {
                for y in clamp_range(c[1], reach, g.dims[1]) {
                    for x in clamp_range(c[0], reach, g.dims[0]) {
                        let d2 = [x, y, z]
                            .iter()
                            .zip(&c)
                            .map(|(&p, &q)| (p as f64 - q as f64).powi(2))
                            .sum::<f64>();
                        let i = g.index(x, y, z);
                        if d2 <= r * r && d[i] == Label::Background {
                            out[i] = Label::Lesion;
                        }
                    }
                }
            }
        }
    }
    LabelVolume::new(g, out)
}

/// Stream id of one classifier.
pub fn stream_id(o: Orientation, f: Focus) -> u64 {
    let oi = Orientation::ALL.iter().position(|&x| x == o).unwrap() as u64;
    oi * 2 + (f == Focus::Background) as u64
}

/// Six perturbations of `gt`, one per orientation and focus.
pub fn simulate_bundle(gt: &LabelVolume, nm: &NoiseModel) -> Result<ClassifierBundle> {
    nm.validate()?;
    let keys: Vec<(Orientation, Focus)> = Orientation::ALL
        .into_iter()
        .flat_map(|o| Focus::ALL.into_iter().map(move |f| (o, f)))
        .collect();
    let mut volumes: Vec<Option<LabelVolume>> = keys
        .par_iter()
        .map(|&(o, f)| perturb_volume(gt, &nm.for_focus(f), stream_id(o, f)).map(Some))
        .collect::<Result<_>>()?;
    ClassifierBundle::from_fn(|o, f| {
        let k = keys.iter().position(|&key| key == (o, f)).unwrap();
        Ok(volumes[k].take().unwrap())
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub n_lesions: usize,
    /// Semi-axis range in voxels.
    pub radius: (f64, f64),
    /// Uncertainty shell thickness in voxels.
    pub shell: usize,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            dims: [32, 32, 16],
            spacing: [1.0, 1.0, 1.0],
            n_lesions: 4,
            radius: (1.5, 3.5),
            shell: 1,
            seed: 0,
        }
    }
}

const PLACEMENT_ATTEMPTS: usize = 2000;
const PHANTOM_STREAM: u64 = 1 << 32;

/// Non-overlapping ellipsoidal lesions wrapped in Uncertainty shells, and a
/// matching FLAIR-like intensity volume.
pub fn make_phantom(spec: &PhantomSpec) -> Result<(ScalarVolume, LabelVolume)> {
    let g = Geometry::new(spec.dims, spec.spacing)?;
    let (rmin, rmax) = spec.radius;
    if !(rmin >= 1.0 && rmax >= rmin && rmax.is_finite()) {
        return Err(Error::invalid(format!(
            "lesion radius range ({rmin}, {rmax}) must satisfy 1 <= min <= max"
        )));
    }
    let mut rng = rng::stream(spec.seed, PHANTOM_STREAM);
    let mut labels = vec![Label::Background; g.len()];
    // occupied boxes include the shell plus a one-voxel gap
    let mut boxes: Vec<([usize; 3], [usize; 3])> = Vec::new();
    let mut placed = 0;
    let mut attempts = 0;
    while placed < spec.n_lesions {
        attempts += 1;
        if attempts > PLACEMENT_ATTEMPTS {
            return Err(Error::invalid(format!(
                "could only place {placed} of {} lesions in {:?}",
                spec.n_lesions, spec.dims
            )));
        }
        let axes: Vec<f64> = (0..3).map(|_| rng.random_range(rmin..=rmax)).collect();
        let mut centre = [0usize; 3];
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut fits = true;
        for a in 0..3 {
            let reach = axes[a].floor() as usize + spec.shell;
            if 2 * reach + 1 > g.dims[a] {
                fits = false;
                break;
            }
            centre[a] = rng.random_range(reach..g.dims[a] - reach);
            lo[a] = centre[a] - reach;
            hi[a] = centre[a] + reach;
        }
        if !fits {
            continue;
        }
        let clear = boxes.iter().all(|(blo, bhi)| {
            (0..3).any(|a| hi[a] + 1 < blo[a] || bhi[a] + 1 < lo[a])
        });
        if !clear {
            continue;
        }
        boxes.push((lo, hi));
        placed += 1;

        let mut core = Vec::new();
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    let q: f64 = [x, y, z]
                        .iter()
                        .enumerate()
                        .map(|(a, &p)| ((p as f64 - centre[a] as f64) / axes[a]).powi(2))
                        .sum();
                    if q <= 1.0 {
                        core.push([x, y, z]);
                    }
                }
            }
        }
        let s = spec.shell;
        for &[x, y, z] in &core {
            for zz in clamp_range(z, s, g.dims[2]) {
                for yy in clamp_range(y, s, g.dims[1]) {
                    for xx in clamp_range(x, s, g.dims[0]) {
                        let i = g.index(xx, yy, zz);
                        if labels[i] == Label::Background {
                            labels[i] = Label::Uncertainty;
                        }
                    }
                }
            }
        }
        for &[x, y, z] in &core {
            labels[g.index(x, y, z)] = Label::Lesion;
        }
    }

    let noise = Normal::new(0.0, 0.02).unwrap();
    let mut nrng = rng::stream(spec.seed, PHANTOM_STREAM + 1);
    let intensities: Vec<f32> = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let [x, y, z] = g.coords(i);
            let smooth = 0.3
                + 0.05 * (x as f64 / g.dims[0] as f64 * std::f64::consts::PI).sin()
                + 0.05 * (y as f64 / g.dims[1] as f64 * std::f64::consts::PI).sin()
                + 0.02 * z as f64 / g.dims[2] as f64;
            let lesion = match l {
                Label::Lesion => 0.5,
                Label::Uncertainty => 0.25,
                Label::Background => 0.0,
            };
            (smooth + lesion + noise.sample(&mut nrng)) as f32
        })
        .collect();
    Ok((ScalarVolume::new(g, intensities)?, LabelVolume::new(g, labels)?))
}
