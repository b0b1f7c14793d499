//! Equal-area raster substrate.
//!
//! Grids live in a planar, locally centered Lambert azimuthal equal-area frame
//! (see [`Projection`]). Row 0 is the northernmost row; `origin_x`/`origin_y`
//! are the lower-left corner of the grid, matching the ASCII grid header.

mod ascii;
mod morphology;
mod projection;
mod rasterize;
pub mod vector;

pub use ascii::{
    format_float_grid, format_mask, parse_float_grid, read_float_grid, read_mask, write_float_grid, write_mask,
};
pub use morphology::dilate;
pub use projection::{great_circle_m, Projection, EARTH_RADIUS_M};
pub use rasterize::{rasterize, rasterize_polygon_into};
pub use vector::{Geometry, PlanarFeature, PlanarGeometry, VectorFeature};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cell size in meters.
pub const DEFAULT_CELL_SIZE: f64 = 100.0;

/// Placement of a grid in the projected plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub ncols: usize,
    pub nrows: usize,
}

impl GridSpec {
    pub fn new(origin_x: f64, origin_y: f64, cell_size: f64, ncols: usize, nrows: usize) -> Result<Self> {
        if ncols == 0 || nrows == 0 {
            return Err(Error::invalid("grid needs at least one row and one column"));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::invalid(format!("cell size must be positive, got {cell_size}")));
        }
        if !origin_x.is_finite() || !origin_y.is_finite() {
            return Err(Error::invalid("grid origin must be finite"));
        }
        Ok(Self {
            origin_x,
            origin_y,
            cell_size,
            ncols,
            nrows,
        })
    }

    /// Smallest grid aligned to multiples of `cell_size` that covers the box.
    pub fn covering(min_x: f64, min_y: f64, max_x: f64, max_y: f64, cell_size: f64) -> Result<Self> {
        let x0 = (min_x / cell_size).floor() * cell_size;
        let y0 = (min_y / cell_size).floor() * cell_size;
        let ncols = (((max_x - x0) / cell_size).ceil() as usize).max(1);
        let nrows = (((max_y - y0) / cell_size).ceil() as usize).max(1);
        Self::new(x0, y0, cell_size, ncols, nrows)
    }

    pub fn len(&self) -> usize {
        self.ncols * self.nrows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.ncols + col
    }

    /// Planar coordinates of the center of cell `(row, col)`.
    #[inline]
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.cell_size,
            self.origin_y + ((self.nrows - row) as f64 - 0.5) * self.cell_size,
        )
    }

    /// Cell containing the planar point, if it lies on the grid.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let c = ((x - self.origin_x) / self.cell_size).floor();
        let r_from_bottom = ((y - self.origin_y) / self.cell_size).floor();
        if c < 0.0 || r_from_bottom < 0.0 {
            return None;
        }
        let (c, rb) = (c as usize, r_from_bottom as usize);
        if c >= self.ncols || rb >= self.nrows {
            return None;
        }
        Some((self.nrows - 1 - rb, c))
    }

    pub fn cell_area_m2(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    pub fn max_x(&self) -> f64 {
        self.origin_x + self.ncols as f64 * self.cell_size
    }

    pub fn max_y(&self) -> f64 {
        self.origin_y + self.nrows as f64 * self.cell_size
    }

    pub(crate) fn same_shape(&self, other: &GridSpec) -> bool {
        self.ncols == other.ncols
            && self.nrows == other.nrows
            && self.cell_size == other.cell_size
            && self.origin_x == other.origin_x
            && self.origin_y == other.origin_y
    }
}

/// Boolean raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    spec: GridSpec,
    cells: Vec<bool>,
}

impl Mask {
    pub fn new(spec: GridSpec) -> Self {
        Self {
            cells: vec![false; spec.len()],
            spec,
        }
    }

    pub fn filled(spec: GridSpec, value: bool) -> Self {
        Self {
            cells: vec![value; spec.len()],
            spec,
        }
    }

    pub fn from_cells(spec: GridSpec, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != spec.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} cells for a {}x{} grid",
                cells.len(),
                spec.ncols,
                spec.nrows
            )));
        }
        Ok(Self { spec, cells })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [bool] {
        &mut self.cells
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[self.spec.index(row, col)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        let i = self.spec.index(row, col);
        self.cells[i] = value;
    }

    pub fn row(&self, row: usize) -> &[bool] {
        let start = row * self.spec.ncols;
        &self.cells[start..start + self.spec.ncols]
    }

    pub fn popcount(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Area of the true cells in km².
    pub fn area_km2(&self) -> f64 {
        self.popcount() as f64 * self.spec.cell_area_m2() / 1.0e6
    }

    pub fn and(&self, other: &Mask) -> Result<Mask> {
        self.zip(other, |a, b| a && b)
    }

    pub fn or(&self, other: &Mask) -> Result<Mask> {
        self.zip(other, |a, b| a || b)
    }

    pub fn and_not(&self, other: &Mask) -> Result<Mask> {
        self.zip(other, |a, b| a && !b)
    }

    pub fn not(&self) -> Mask {
        Mask {
            spec: self.spec,
            cells: self.cells.iter().map(|c| !c).collect(),
        }
    }

    /// True if every true cell of `self` is also true in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.spec.same_shape(&other.spec)
            && self.cells.iter().zip(&other.cells).all(|(&a, &b)| !a || b)
    }

    pub fn iter_true(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let ncols = self.spec.ncols;
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(move |(i, _)| (i / ncols, i % ncols))
    }

    fn zip(&self, other: &Mask, f: impl Fn(bool, bool) -> bool) -> Result<Mask> {
        if !self.spec.same_shape(&other.spec) {
            return Err(Error::DimensionMismatch("masks are on different grids".into()));
        }
        Ok(Mask {
            spec: self.spec,
            cells: self
                .cells
                .iter()
                .zip(&other.cells)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

/// Area of the true cells of `mask` in km².
pub fn area_of(mask: &Mask) -> f64 {
    mask.area_km2()
}

/// Float raster. Missing cells are stored as NaN and written with `nodata_value`.
#[derive(Debug, Clone)]
pub struct FloatGrid {
    spec: GridSpec,
    values: Vec<f64>,
    pub nodata_value: f64,
}

pub const DEFAULT_NODATA: f64 = -9999.0;

impl FloatGrid {
    pub fn new(spec: GridSpec, fill: f64) -> Self {
        Self {
            values: vec![fill; spec.len()],
            spec,
            nodata_value: DEFAULT_NODATA,
        }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                spec.ncols,
                spec.nrows
            )));
        }
        Ok(Self {
            spec,
            values,
            nodata_value: DEFAULT_NODATA,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.values[self.spec.index(row, col)];
        (!v.is_nan()).then_some(v)
    }

    /// Cell-wise map preserving missing cells.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> FloatGrid {
        FloatGrid {
            spec: self.spec,
            values: self
                .values
                .iter()
                .map(|&v| if v.is_nan() { v } else { f(v) })
                .collect(),
            nodata_value: self.nodata_value,
        }
    }

    pub fn same_shape(&self, other: &FloatGrid) -> bool {
        self.spec.same_shape(&other.spec)
    }
}

impl PartialEq for FloatGrid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
            && self.nodata_value.to_bits() == other.nodata_value.to_bits()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_center_and_lookup_agree() {
        let spec = GridSpec::new(1000.0, -500.0, 100.0, 7, 5).unwrap();
        for r in 0..5 {
            for c in 0..7 {
                let (x, y) = spec.cell_center(r, c);
                assert_eq!(spec.cell_at(x, y), Some((r, c)));
            }
        }
        // row 0 is the northernmost
        assert!(spec.cell_center(0, 0).1 > spec.cell_center(4, 0).1);
        assert_eq!(spec.cell_at(999.0, 0.0), None);
    }

    #[test]
    fn area_of_counts_cells() {
        let spec = GridSpec::new(0.0, 0.0, 100.0, 20, 20).unwrap();
        let mut m = Mask::new(spec);
        assert_eq!(area_of(&m), 0.0);
        for i in 0..100 {
            m.cells_mut()[i * 3] = true;
        }
        assert_eq!(area_of(&m), 1.0);
    }

    #[test]
    fn rejects_degenerate_specs() {
        assert!(GridSpec::new(0.0, 0.0, 100.0, 0, 3).is_err());
        assert!(GridSpec::new(0.0, 0.0, 0.0, 3, 3).is_err());
        assert!(GridSpec::new(0.0, 0.0, -1.0, 3, 3).is_err());
    }

    #[test]
    fn covering_aligns_to_cell_multiples() {
        let s = GridSpec::covering(-130.0, 40.0, 260.0, 410.0, 100.0).unwrap();
        assert_eq!((s.origin_x, s.origin_y), (-200.0, 0.0));
        assert!(s.max_x() >= 260.0 && s.max_y() >= 410.0);
    }
}
