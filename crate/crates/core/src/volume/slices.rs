use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Geometry, Volume, Voxel};
use crate::error::{Error, Result};

/// Anatomical slicing direction.
///
/// Axial fixes z (x–y plane), coronal fixes y (x–z plane), sagittal fixes
/// x (y–z plane).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Axial,
    Coronal,
    Sagittal,
}

impl Orientation {
    pub const ALL: [Orientation; 3] = [
        Orientation::Axial,
        Orientation::Coronal,
        Orientation::Sagittal,
    ];

    /// `(row axis, column axis, fixed axis)`; the in-plane width runs along
    /// the first axis.
    pub fn axes(self) -> (usize, usize, usize) {
        match self {
            Orientation::Axial => (0, 1, 2),
            Orientation::Coronal => (0, 2, 1),
            Orientation::Sagittal => (1, 2, 0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Orientation::Axial => "axial",
            Orientation::Coronal => "coronal",
            Orientation::Sagittal => "sagittal",
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "axial" => Ok(Orientation::Axial),
            "coronal" => Ok(Orientation::Coronal),
            "sagittal" => Ok(Orientation::Sagittal),
            other => Err(Error::invalid(format!("unknown orientation '{other}'"))),
        }
    }
}

/// Row-major 2D grid (`u` fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct Image2<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Image2<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("image {width}x{height} is empty")));
        }
        if data.len() != width * height {
            return Err(Error::DataLength {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Image2 {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Image2 {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> T {
        self.data[u + self.width * v]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: T) {
        self.data[u + self.width * v] = value;
    }

    pub fn map<U>(&self, f: impl Fn(T) -> U) -> Image2<U> {
        Image2 {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// A volume decomposed into 2D slices along one orientation.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceStack<T> {
    pub orientation: Orientation,
    pub source: Geometry,
    pub slices: Vec<Image2<T>>,
}

pub fn extract_slices<T: Voxel>(v: &Volume<T>, orientation: Orientation) -> SliceStack<T> {
    let g = v.geometry();
    let (ua, va, fa) = orientation.axes();
    let (w, h, n) = (g.dims[ua], g.dims[va], g.dims[fa]);
    let mut slices = Vec::with_capacity(n);
    let mut p = [0usize; 3];
    for k in 0..n {
        p[fa] = k;
        let mut data = Vec::with_capacity(w * h);
        for j in 0..h {
            p[va] = j;
            for i in 0..w {
                p[ua] = i;
                data.push(v.data()[g.index(p[0], p[1], p[2])]);
            }
        }
        slices.push(Image2 {
            width: w,
            height: h,
            data,
        });
    }
    SliceStack {
        orientation,
        source: *g,
        slices,
    }
}

/// Exact inverse of [`extract_slices`].
pub fn assemble_volume<T: Voxel>(stack: &SliceStack<T>) -> Result<Volume<T>> {
    if stack.slices.is_empty() {
        return Err(Error::EmptyStack);
    }
    let g = stack.source;
    let (ua, va, fa) = stack.orientation.axes();
    let (w, h, n) = (g.dims[ua], g.dims[va], g.dims[fa]);
    if stack.slices.len() != n {
        return Err(Error::SliceCount {
            expected: n,
            actual: stack.slices.len(),
        });
    }
    for (index, s) in stack.slices.iter().enumerate() {
        if s.width != w || s.height != h || s.data.len() != w * h {
            return Err(Error::SliceShape {
                index,
                expected: (w, h),
                actual: (s.width, s.height),
            });
        }
    }
    let mut data = vec![T::default(); g.len()];
    let mut p = [0usize; 3];
    for (k, s) in stack.slices.iter().enumerate() {
        p[fa] = k;
        for j in 0..h {
            p[va] = j;
            for i in 0..w {
                p[ua] = i;
                data[g.index(p[0], p[1], p[2])] = s.get(i, j);
            }
        }
    }
    Volume::new(g, data)
}
