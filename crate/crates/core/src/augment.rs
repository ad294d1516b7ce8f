//! 2D augmentation: two random rotations, one random scaling and one
//! Gaussian-noise copy per source image.
//!
//! Intensities are resampled bilinearly and labels by nearest neighbour.
//! Both transforms are anchored at the image centre, and pixels that map
//! outside the frame become 0 / Background.

use std::fmt;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::volume::{Image2, Label};

const GRID_TOL: f64 = 1e-9;

/// Evenly spaced values `min, min + step, …, max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Grid {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        let g = Grid { min, max, step };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.min.is_finite() && self.max >= self.min) {
            return Err(Error::invalid(format!("bad grid {self:?}")));
        }
        let n = (self.max - self.min) / self.step;
        if (n - n.round()).abs() > GRID_TOL * n.max(1.0) {
            return Err(Error::invalid(format!(
                "step {} does not divide [{}, {}]",
                self.step, self.min, self.max
            )));
        }
        Ok(())
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        ((self.max - self.min) / self.step).round() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Rounded to 1e-12 so that grid points print cleanly (1.24, not
    /// 1.2400000000000002).
    pub fn value(&self, k: usize) -> f64 {
        ((self.min + k as f64 * self.step) * 1e12).round() / 1e12
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.value(k)).collect()
    }

    /// Index of the grid point equal to `x`, if any.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let k = ((x - self.min) / self.step).round();
        (k >= 0.0 && (k as usize) < self.len() && (self.value(k as usize) - x).abs() <= 1e-9)
            .then_some(k as usize)
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        self.value(rng.random_range(0..self.len()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Rotation angles in degrees.
    pub angles: Grid,
    pub scales: Grid,
    /// Noise variance as a fraction of the maximum amplitude.
    pub noise_coefficient: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            angles: Grid {
                min: -13.0,
                max: 13.0,
                step: 1.0,
            },
            scales: Grid {
                min: 1.10,
                max: 1.30,
                step: 0.01,
            },
            noise_coefficient: 0.001,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn with_seed(seed: u64) -> Self {
        AugmentConfig {
            seed,
            ..AugmentConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.angles.validate()?;
        self.scales.validate()?;
        if self.scales.min <= 0.0 {
            return Err(Error::invalid("scale factors must be positive"));
        }
        if !(self.noise_coefficient >= 0.0 && self.noise_coefficient.is_finite()) {
            return Err(Error::invalid(format!(
                "noise coefficient {} must be non-negative",
                self.noise_coefficient
            )));
        }
        Ok(())
    }
}

fn check_pair(image: &Image2<f32>, labels: &Image2<Label>) -> Result<()> {
    if (image.width, image.height) != (labels.width, labels.height) {
        return Err(Error::GeometryMismatch(format!(
            "image {}x{} vs labels {}x{}",
            image.width, image.height, labels.width, labels.height
        )));
    }
    Ok(())
}

/// Applies the inverse map `to_source` to every output pixel.
fn resample(
    image: &Image2<f32>,
    labels: &Image2<Label>,
    to_source: impl Fn(f64, f64) -> (f64, f64),
) -> (Image2<f32>, Image2<Label>) {
    let (w, h) = (image.width, image.height);
    let mut out_i = Image2::filled(w, h, 0.0f32);
    let mut out_l = Image2::filled(w, h, Label::Background);
    let pixel = |u: isize, v: isize| -> f64 {
        if u >= 0 && v >= 0 && (u as usize) < w && (v as usize) < h {
            image.get(u as usize, v as usize) as f64
        } else {
            0.0
        }
    };
    for v in 0..h {
        for u in 0..w {
            let (x, y) = to_source(u as f64, v as f64);
            let (x0, y0) = (x.floor(), y.floor());
            let (fx, fy) = (x - x0, y - y0);
            let (i, j) = (x0 as isize, y0 as isize);
            let val = if fx == 0.0 && fy == 0.0 {
                pixel(i, j)
            } else {
                (1.0 - fx) * (1.0 - fy) * pixel(i, j)
                    + fx * (1.0 - fy) * pixel(i + 1, j)
                    + (1.0 - fx) * fy * pixel(i, j + 1)
                    + fx * fy * pixel(i + 1, j + 1)
            };
            out_i.set(u, v, val as f32);
            let (nu, nv) = (x.round(), y.round());
            if nu >= 0.0 && nv >= 0.0 && (nu as usize) < w && (nv as usize) < h {
                out_l.set(u, v, labels.get(nu as usize, nv as usize));
            }
        }
    }
    (out_i, out_l)
}

/// Exact cosine and sine for multiples of 90 degrees.
fn cos_sin(angle_deg: f64) -> (f64, f64) {
    let quarter = angle_deg / 90.0;
    if quarter == quarter.round() {
        match (quarter as i64).rem_euclid(4) {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        }
    } else {
        let r = angle_deg.to_radians();
        (r.cos(), r.sin())
    }
}

/// Rotates counter-clockwise (in `u`, `v` index space) about the centre.
/// `angle_deg` must be a multiple of `step_deg`.
pub fn rotate_2d(
    image: &Image2<f32>,
    labels: &Image2<Label>,
    angle_deg: f64,
    step_deg: f64,
) -> Result<(Image2<f32>, Image2<Label>)> {
    check_pair(image, labels)?;
    let k = angle_deg / step_deg;
    if !(step_deg > 0.0 && angle_deg.is_finite()) || (k - k.round()).abs() > GRID_TOL {
        return Err(Error::invalid(format!(
            "angle {angle_deg} is not on the {step_deg} degree grid"
        )));
    }
    let (c, s) = cos_sin(angle_deg);
    let cx = (image.width as f64 - 1.0) / 2.0;
    let cy = (image.height as f64 - 1.0) / 2.0;
    Ok(resample(image, labels, |u, v| {
        let (dx, dy) = (u - cx, v - cy);
        (cx + c * dx + s * dy, cy - s * dx + c * dy)
    }))
}

/// Zooms by `factor` about the centre, keeping the original size.
pub fn scale_2d(
    image: &Image2<f32>,
    labels: &Image2<Label>,
    factor: f64,
) -> Result<(Image2<f32>, Image2<Label>)> {
    check_pair(image, labels)?;
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::invalid(format!("scale factor {factor} must be positive")));
    }
    let cx = (image.width as f64 - 1.0) / 2.0;
    let cy = (image.height as f64 - 1.0) / 2.0;
    Ok(resample(image, labels, |u, v| {
        (cx + (u - cx) / factor, cy + (v - cy) / factor)
    }))
}

/// Adds independent zero-mean Gaussian noise of the given variance.
pub fn add_gaussian_noise(image: &Image2<f32>, variance: f64, rng: &mut Rng) -> Result<Image2<f32>> {
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(Error::invalid(format!("variance {variance} must be non-negative")));
    }
    if variance == 0.0 {
        return Ok(image.clone());
    }
    let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(Image2 {
        width: image.width,
        height: image.height,
        data: image
            .data
            .iter()
            .map(|&p| (p as f64 + normal.sample(rng)) as f32)
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceImage {
    pub id: String,
    pub image: Image2<f32>,
    pub labels: Image2<Label>,
    /// Maximum amplitude of the volume the image was taken from.
    pub amplitude: f32,
}

impl SourceImage {
    /// Uses the image's own maximum absolute value as the amplitude.
    pub fn new(id: impl Into<String>, image: Image2<f32>, labels: Image2<Label>) -> Self {
        let amplitude = image.data.iter().fold(0.0f32, |m, v| m.max(v.abs()));
        SourceImage {
            id: id.into(),
            image,
            labels,
            amplitude,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Original,
    Rotation,
    Scaling,
    Noise,
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transform::Original => "original",
            Transform::Rotation => "rotation",
            Transform::Scaling => "scaling",
            Transform::Noise => "noise",
        })
    }
}

/// Provenance of one augmented output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub transform: Transform,
    /// Angle in degrees, scale factor, or noise variance; 0 for the original.
    pub parameter: f64,
    pub output: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Augmented {
    pub provenance: Provenance,
    pub image: Image2<f32>,
    pub labels: Image2<Label>,
}

pub const OUTPUTS_PER_IMAGE: usize = 5;

/// Five outputs per source image, in input order. Image `k` draws from
/// stream `k`, so the result does not depend on scheduling.
pub fn expand_dataset(sources: &[SourceImage], cfg: &AugmentConfig) -> Result<Vec<Augmented>> {
    cfg.validate()?;
    let per_image: Vec<Vec<Augmented>> = sources
        .par_iter()
        .enumerate()
        .map(|(k, src)| augment_one(src, cfg, &mut rng::stream(cfg.seed, k as u64)))
        .collect::<Result<_>>()?;
    Ok(per_image.into_iter().flatten().collect())
}

fn augment_one(src: &SourceImage, cfg: &AugmentConfig, rng: &mut Rng) -> Result<Vec<Augmented>> {
    check_pair(&src.image, &src.labels)?;
    let a1 = cfg.angles.sample(rng);
    let a2 = cfg.angles.sample(rng);
    let s = cfg.scales.sample(rng);
    let variance = cfg.noise_coefficient * src.amplitude as f64;

    let entry = |tag: &str, transform, parameter, (image, labels)| Augmented {
        provenance: Provenance {
            source: src.id.clone(),
            transform,
            parameter,
            output: format!("{}_{tag}", src.id),
        },
        image,
        labels,
    };
    let noisy = add_gaussian_noise(&src.image, variance, rng)?;
    Ok(vec![
        entry(
            "orig",
            Transform::Original,
            0.0,
            (src.image.clone(), src.labels.clone()),
        ),
        entry(
            "rot1",
            Transform::Rotation,
            a1,
            rotate_2d(&src.image, &src.labels, a1, cfg.angles.step)?,
        ),
        entry(
            "rot2",
            Transform::Rotation,
            a2,
            rotate_2d(&src.image, &src.labels, a2, cfg.angles.step)?,
        ),
        entry(
            "scale",
            Transform::Scaling,
            s,
            scale_2d(&src.image, &src.labels, s)?,
        ),
        entry("noise", Transform::Noise, variance, (noisy, src.labels.clone())),
    ])
}

/// `source,transform,parameter,output` rows.
pub fn write_provenance_csv<W: std::io::Write>(out: W, items: &[Augmented]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for item in items {
        w.serialize(&item.provenance)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
