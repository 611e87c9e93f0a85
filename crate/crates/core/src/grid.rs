//! Rasters over plunger-voltage space.
//!
//! Every raster is stored row-major with rows indexed by the second plunger
//! (`v2`) and columns by the first plunger (`v1`), so `values[[row, col]]` is
//! the reading at `(v1_axis.value(col), v2_axis.value(row))`.

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::device::StateLabel;
use crate::error::{Error, Result};

/// Uniformly spaced voltage axis. Values are pixel centers in millivolts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl Axis {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() || !start.is_finite() {
            return Err(Error::Shape(format!(
                "axis needs a finite positive step, got start={start} step={step}"
            )));
        }
        if len == 0 {
            return Err(Error::Shape("axis has no pixels".into()));
        }
        Ok(Self { start, step, len })
    }

    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.value(i)).collect()
    }

    /// Lower edge of the first pixel.
    pub fn lower_edge(&self) -> f64 {
        self.start - 0.5 * self.step
    }

    /// Upper edge of the last pixel.
    pub fn upper_edge(&self) -> f64 {
        self.value(self.len - 1) + 0.5 * self.step
    }

    /// Axis of `len` pixels taken every `stride` pixels starting at `first`.
    pub(crate) fn sub(&self, first: usize, len: usize, stride: usize) -> Axis {
        Axis {
            start: self.value(first),
            step: self.step * stride as f64,
            len,
        }
    }
}

/// The axis along which the sensor sweep ran; the fast axis of a measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcquisitionDirection {
    /// Sweeps along `v1` (along each row).
    #[default]
    V1,
    /// Sweeps along `v2` (down each column).
    V2,
}

/// Charge-sensor raster with its voltage axes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGrid {
    values: Array2<f64>,
    v1_axis: Axis,
    v2_axis: Axis,
    direction: AcquisitionDirection,
}

impl ScanGrid {
    pub fn new(
        values: Array2<f64>,
        v1_axis: Axis,
        v2_axis: Axis,
        direction: AcquisitionDirection,
    ) -> Result<Self> {
        check_axes(values.dim(), &v1_axis, &v2_axis)?;
        Ok(Self {
            values,
            v1_axis,
            v2_axis,
            direction,
        })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn v1_axis(&self) -> &Axis {
        &self.v1_axis
    }

    pub fn v2_axis(&self) -> &Axis {
        &self.v2_axis
    }

    pub fn direction(&self) -> AcquisitionDirection {
        self.direction
    }

    /// mV per pixel.
    pub fn resolution(&self) -> f64 {
        self.v1_axis.step
    }

    /// `(rows, cols)` = `(v2 pixels, v1 pixels)`.
    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    /// Same axes and direction, new values.
    pub fn with_values(&self, values: Array2<f64>) -> Result<Self> {
        Self::new(values, self.v1_axis, self.v2_axis, self.direction)
    }

    pub(crate) fn crop(&self, window: &PixelWindow) -> ScanGrid {
        ScanGrid {
            values: window.slice(&self.values),
            v1_axis: self.v1_axis.sub(window.col0, window.cols, window.stride),
            v2_axis: self.v2_axis.sub(window.row0, window.rows, window.stride),
            direction: self.direction,
        }
    }
}

/// Per-pixel ground-truth device state aligned with a [`ScanGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct LabelGrid {
    labels: Array2<StateLabel>,
    v1_axis: Axis,
    v2_axis: Axis,
}

impl LabelGrid {
    pub fn new(labels: Array2<StateLabel>, v1_axis: Axis, v2_axis: Axis) -> Result<Self> {
        check_axes(labels.dim(), &v1_axis, &v2_axis)?;
        Ok(Self {
            labels,
            v1_axis,
            v2_axis,
        })
    }

    pub fn labels(&self) -> &Array2<StateLabel> {
        &self.labels
    }

    pub fn v1_axis(&self) -> &Axis {
        &self.v1_axis
    }

    pub fn v2_axis(&self) -> &Axis {
        &self.v2_axis
    }

    pub fn dim(&self) -> (usize, usize) {
        self.labels.dim()
    }

    /// True when this grid has exactly the dimensions and axes of `scan`.
    pub fn aligns_with(&self, scan: &ScanGrid) -> bool {
        self.dim() == scan.dim() && self.v1_axis == scan.v1_axis && self.v2_axis == scan.v2_axis
    }

    pub(crate) fn crop(&self, window: &PixelWindow) -> LabelGrid {
        LabelGrid {
            labels: window.slice(&self.labels),
            v1_axis: self.v1_axis.sub(window.col0, window.cols, window.stride),
            v2_axis: self.v2_axis.sub(window.row0, window.rows, window.stride),
        }
    }
}

/// Rectangular, possibly strided, block of pixels inside a stored raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct PixelWindow {
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
    pub stride: usize,
}

impl PixelWindow {
    fn slice<T: Clone>(&self, a: &Array2<T>) -> Array2<T> {
        let st = self.stride as isize;
        a.slice(s![
            self.row0..self.row0 + (self.rows - 1) * self.stride + 1;st,
            self.col0..self.col0 + (self.cols - 1) * self.stride + 1;st
        ])
        .to_owned()
    }
}

fn check_axes(dim: (usize, usize), v1: &Axis, v2: &Axis) -> Result<()> {
    let (rows, cols) = dim;
    if rows != v2.len || cols != v1.len {
        return Err(Error::Shape(format!(
            "raster is {rows}x{cols} but axes are {}x{}",
            v2.len, v1.len
        )));
    }
    if v1.step != v2.step {
        return Err(Error::Shape(format!(
            "axes must share one resolution, got {} and {}",
            v1.step, v2.step
        )));
    }
    Ok(())
}
