//! Volumetric data model.
//!
//! Voxels are stored x-fastest: linear index `x + nx * (y + ny * z)`.
//! [`Label`] codes carry the class ordering in their numeric value, so a
//! downgrade is a decrement and a ternary union is a pointwise maximum.

mod components;
pub mod io;
mod slices;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use components::{
    boundary_pixels, boundary_voxels, connected_components, connected_components_2d,
    ComponentSet, Connectivity, Connectivity2d,
};
pub use slices::{assemble_volume, extract_slices, Image2, Orientation, SliceStack};

/// Ordered ternary segmentation class: `Background < Uncertainty < Lesion`.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Label {
    #[default]
    Background = 0,
    Uncertainty = 1,
    Lesion = 2,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Background, Label::Uncertainty, Label::Lesion];

    pub fn from_code(code: u8) -> Option<Label> {
        match code {
            0 => Some(Label::Background),
            1 => Some(Label::Uncertainty),
            2 => Some(Label::Lesion),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    /// One level down; Background stays Background.
    pub fn downgrade(self) -> Label {
        match self {
            Label::Lesion => Label::Uncertainty,
            _ => Label::Background,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Background => "background",
            Label::Uncertainty => "uncertainty",
            Label::Lesion => "lesion",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "background" | "b" | "0" => Ok(Label::Background),
            "uncertainty" | "u" | "1" => Ok(Label::Uncertainty),
            "lesion" | "l" | "2" => Ok(Label::Lesion),
            other => Err(Error::invalid(format!("unknown class '{other}'"))),
        }
    }
}

/// Grid extent and physical voxel size (millimetres).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidDims(dims));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::InvalidSpacing(spacing));
        }
        Ok(Geometry { dims, spacing })
    }

    /// Unit spacing.
    pub fn with_dims(dims: [usize; 3]) -> Result<Self> {
        Self::new(dims, [1.0; 3])
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn ensure_same(&self, other: &Geometry, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::GeometryMismatch(format!(
                "{what}: {:?}/{:?} vs {:?}/{:?}",
                self.dims, self.spacing, other.dims, other.spacing
            )));
        }
        Ok(())
    }
}

/// Element type storable in a [`Volume`].
pub trait Voxel: Copy + PartialEq + Default + fmt::Debug + Send + Sync + 'static {
    fn validate(data: &[Self]) -> Result<()>;
}

impl Voxel for f32 {
    fn validate(data: &[Self]) -> Result<()> {
        match data.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }
}

impl Voxel for Label {
    fn validate(_: &[Self]) -> Result<()> {
        Ok(())
    }
}

impl Voxel for bool {
    fn validate(_: &[Self]) -> Result<()> {
        Ok(())
    }
}

/// Dense 3D grid of voxels with physical spacing. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume<T> {
    geometry: Geometry,
    data: Vec<T>,
}

pub type ScalarVolume = Volume<f32>;
pub type LabelVolume = Volume<Label>;
/// Binary mask; `true` marks a positive voxel.
pub type Mask = Volume<bool>;

impl<T: Voxel> Volume<T> {
    pub fn new(geometry: Geometry, data: Vec<T>) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::DataLength {
                expected: geometry.len(),
                actual: data.len(),
            });
        }
        T::validate(&data)?;
        Ok(Volume { geometry, data })
    }

    pub fn filled(geometry: Geometry, value: T) -> Self {
        Volume {
            geometry,
            data: vec![value; geometry.len()],
        }
    }

    pub fn from_fn(geometry: Geometry, mut f: impl FnMut([usize; 3]) -> T) -> Result<Self> {
        let data = (0..geometry.len()).map(|i| f(geometry.coords(i))).collect();
        Self::new(geometry, data)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.geometry.spacing
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> T {
        self.data[self.geometry.index(x, y, z)]
    }

    pub fn map<U: Voxel>(&self, f: impl Fn(T) -> U) -> Volume<U> {
        Volume {
            geometry: self.geometry,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two volumes on the same geometry.
    pub fn zip_map<U: Voxel, V: Voxel>(
        &self,
        other: &Volume<U>,
        f: impl Fn(T, U) -> V,
    ) -> Result<Volume<V>> {
        self.geometry.ensure_same(&other.geometry, "zip_map")?;
        Ok(Volume {
            geometry: self.geometry,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

impl LabelVolume {
    /// Binary label volume: Lesion where the voxel equals `class`, else Background.
    pub fn class_mask(&self, class: Label) -> LabelVolume {
        self.map(|v| if v == class { Label::Lesion } else { Label::Background })
    }

    /// Indicator of `class` as a [`Mask`].
    pub fn indicator(&self, class: Label) -> Mask {
        self.map(|v| v == class)
    }

    /// Interprets a `{0, 2}` volume as a mask; Uncertainty voxels are rejected.
    pub fn to_mask(&self) -> Result<Mask> {
        if let Some(index) = self.data.iter().position(|&v| v == Label::Uncertainty) {
            return Err(Error::NotBinary { index });
        }
        Ok(self.map(|v| v == Label::Lesion))
    }

    pub fn count(&self, class: Label) -> usize {
        self.data.iter().filter(|&&v| v == class).count()
    }
}

impl Mask {
    pub fn from_points(geometry: Geometry, points: &[[usize; 3]]) -> Result<Self> {
        let mut data = vec![false; geometry.len()];
        for p in points {
            if (0..3).any(|a| p[a] >= geometry.dims[a]) {
                return Err(Error::invalid(format!(
                    "point {p:?} outside dims {:?}",
                    geometry.dims
                )));
            }
            data[geometry.index(p[0], p[1], p[2])] = true;
        }
        Ok(Volume { geometry, data })
    }

    pub fn to_labels(&self) -> LabelVolume {
        self.map(|b| if b { Label::Lesion } else { Label::Background })
    }

    /// Linear indices of positive voxels, ascending.
    pub fn positives(&self) -> Vec<usize> {
        self.data
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&b| b)
    }
}

impl ScalarVolume {
    /// Maximum intensity; the amplitude `A` of the noise recipe.
    pub fn max_amplitude(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_order_is_fixed() {
        assert!(Label::Background < Label::Uncertainty);
        assert!(Label::Uncertainty < Label::Lesion);
        assert_eq!(Label::Lesion.downgrade(), Label::Uncertainty);
        assert_eq!(Label::Uncertainty.downgrade(), Label::Background);
        for l in Label::ALL {
            assert_eq!(Label::from_code(l.code()), Some(l));
        }
        assert_eq!(Label::from_code(3), None);
    }

    #[test]
    fn geometry_rejects_bad_inputs() {
        assert!(matches!(
            Geometry::new([0, 2, 2], [1.0; 3]),
            Err(Error::InvalidDims(_))
        ));
        assert!(matches!(
            Geometry::new([2, 2, 2], [1.0, 0.0, 1.0]),
            Err(Error::InvalidSpacing(_))
        ));
        assert!(matches!(
            Geometry::new([2, 2, 2], [1.0, f64::NAN, 1.0]),
            Err(Error::InvalidSpacing(_))
        ));
    }

    #[test]
    fn index_coords_round_trip() {
        let g = Geometry::with_dims([3, 4, 5]).unwrap();
        for i in 0..g.len() {
            let [x, y, z] = g.coords(i);
            assert_eq!(g.index(x, y, z), i);
        }
    }

    #[test]
    fn scalar_volume_rejects_non_finite() {
        let g = Geometry::with_dims([2, 1, 1]).unwrap();
        assert!(matches!(
            ScalarVolume::new(g, vec![0.0, f32::INFINITY]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(matches!(
            ScalarVolume::new(g, vec![0.0]),
            Err(Error::DataLength { .. })
        ));
    }

    #[test]
    fn class_mask_selects_single_class() {
        let g = Geometry::with_dims([3, 1, 1]).unwrap();
        let all_lesion = LabelVolume::filled(g, Label::Lesion);
        assert_eq!(all_lesion.class_mask(Label::Lesion).count(Label::Lesion), 3);
        assert_eq!(
            all_lesion.class_mask(Label::Uncertainty).count(Label::Lesion),
            0
        );

        let mixed = LabelVolume::new(
            g,
            vec![Label::Background, Label::Uncertainty, Label::Lesion],
        )
        .unwrap();
        let m = mixed.class_mask(Label::Uncertainty);
        assert_eq!(
            m.data(),
            &[Label::Background, Label::Lesion, Label::Background]
        );
    }

    #[test]
    fn to_mask_rejects_uncertainty() {
        let g = Geometry::with_dims([2, 1, 1]).unwrap();
        let v = LabelVolume::new(g, vec![Label::Lesion, Label::Uncertainty]).unwrap();
        assert!(matches!(v.to_mask(), Err(Error::NotBinary { index: 1 })));
    }
}
