//! Per-pixel image containers.
//!
//! Missing values are stored in-band: `NaN` for scalar and vector maps, `None`
//! for hit maps.

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// In-memory sentinel for a missing depth / radiance sample.
pub const MISSING: f64 = f64::NAN;

/// Row-major 2D grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Depth along the optical axis in millimetres.
pub type DepthMap = Grid<f64>;
/// World-frame unit normals.
pub type NormalMap = Grid<Vector3<f64>>;
/// Scene radiance received per pixel.
pub type RadianceMap = Grid<f64>;
/// Depth-sensing probability per pixel.
pub type ProbabilityMap = Grid<f64>;
/// Instance index hit by each pixel's ray.
pub type HitMap = Grid<Option<u32>>;
/// 8-bit pixel intensities.
pub type IntensityImage = Grid<u8>;

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "grid {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, u: usize, v: usize) -> usize {
        v * self.width + u
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> &T {
        &self.data[v * self.width + u]
    }

    #[inline]
    pub fn at_mut(&mut self, u: usize, v: usize) -> &mut T {
        &mut self.data[v * self.width + u]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn ensure_same_dims<U>(&self, other: &Grid<U>) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }
}

impl Grid<f64> {
    pub fn missing(width: usize, height: usize) -> Self {
        Self::filled(width, height, MISSING)
    }

    /// `None` where the value is the missing sentinel.
    #[inline]
    pub fn value(&self, u: usize, v: usize) -> Option<f64> {
        let x = self.data[v * self.width + u];
        (!x.is_nan()).then_some(x)
    }

    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        !self.data[v * self.width + u].is_nan()
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|x| !x.is_nan()).count()
    }
}

impl Grid<Vector3<f64>> {
    pub fn missing_normals(width: usize, height: usize) -> Self {
        Self::filled(width, height, Vector3::repeat(MISSING))
    }

    #[inline]
    pub fn normal(&self, u: usize, v: usize) -> Option<Vector3<f64>> {
        let n = self.data[v * self.width + u];
        (!n.x.is_nan()).then_some(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_sentinel_round_trip() {
        let mut d = DepthMap::missing(3, 2);
        assert_eq!(d.valid_count(), 0);
        *d.at_mut(2, 1) = 5.0;
        assert_eq!(d.value(2, 1), Some(5.0));
        assert_eq!(d.value(0, 0), None);
        assert_eq!(d.coords(d.index(2, 1)), (2, 1));
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(Grid::from_vec(2, 2, vec![1u8; 3]).is_err());
    }

    #[test]
    fn dims_mismatch_is_error() {
        let a = DepthMap::missing(2, 2);
        let b = DepthMap::missing(3, 2);
        assert!(matches!(a.ensure_same_dims(&b), Err(Error::DimensionMismatch { .. })));
    }
}
