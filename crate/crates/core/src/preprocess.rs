//! Raw scan to classifier input: derivative along the sweep direction, flip
//! correction, background removal with max normalization, and block-mean
//! resizing to 30x30.

use std::cmp::Ordering;
use std::fmt::Write as _;

use ndarray::{Array2, Axis as NdAxis};

use crate::error::{Error, Result};
use crate::grid::{AcquisitionDirection, ScanGrid};

/// Side length of a classifier input image.
pub const IMAGE_SIDE: usize = 30;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

/// A 30x30 image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedImage {
    values: Array2<f64>,
}

impl ProcessedImage {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.dim() != (IMAGE_SIDE, IMAGE_SIDE) {
            return Err(Error::Shape(format!(
                "processed image must be 30x30, got {:?}",
                values.dim()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Shape(
                "processed image values must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn zeros() -> Self {
        Self {
            values: Array2::zeros((IMAGE_SIDE, IMAGE_SIDE)),
        }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Row-major pixel slice.
    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice().expect("standard layout")
    }

    pub fn from_slice(pixels: &[f64]) -> Result<Self> {
        if pixels.len() != IMAGE_PIXELS {
            return Err(Error::Shape(format!(
                "expected {IMAGE_PIXELS} pixels, got {}",
                pixels.len()
            )));
        }
        Self::new(Array2::from_shape_vec((IMAGE_SIDE, IMAGE_SIDE), pixels.to_vec()).unwrap())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.values.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }
}

/// Forward difference along the acquisition direction, in sensor units per
/// mV. The last row/column repeats its neighbour so the shape is unchanged.
pub fn gradient_along_measurement(grid: &ScanGrid) -> Result<ScanGrid> {
    let v = grid.values();
    let (rows, cols) = v.dim();
    let res = grid.resolution();
    let along_cols = grid.direction() == AcquisitionDirection::V1;
    let n = if along_cols { cols } else { rows };
    if n < 2 {
        return Err(Error::Shape(
            "need at least two pixels along the acquisition direction".into(),
        ));
    }
    let mut out = Array2::zeros((rows, cols));
    for r in 0..rows {
        for c in 0..cols {
            out[[r, c]] = if along_cols {
                let c0 = c.min(cols - 2);
                (v[[r, c0 + 1]] - v[[r, c0]]) / res
            } else {
                let r0 = r.min(rows - 2);
                (v[[r0 + 1, c]] - v[[r0, c]]) / res
            };
        }
    }
    grid.with_values(out)
}

/// Negates the gradient when its strongest features point downwards.
///
/// The sign is read from the mean of the top-decile pixels by magnitude
/// (ties by position). If that mean is exactly zero, the sign of the single
/// largest-magnitude pixel decides.
pub fn flip_correct(grad: &ScanGrid) -> ScanGrid {
    let vals: Vec<f64> = grad.values().iter().copied().collect();
    if vals.is_empty() {
        return grad.clone();
    }
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| {
        vals[b]
            .abs()
            .partial_cmp(&vals[a].abs())
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let k = vals.len().div_ceil(10);
    let top_sum: f64 = order[..k].iter().map(|&i| vals[i]).sum();
    let negative = if top_sum != 0.0 {
        top_sum < 0.0
    } else {
        vals[order[0]] < 0.0
    };
    if negative {
        grad.with_values(grad.values().mapv(|v| -v))
            .expect("same shape")
    } else {
        grad.clone()
    }
}

/// Clamp negatives, subtract the median as a background floor, clamp again
/// and scale so the maximum is 1. An all-zero result stays all zero.
pub fn normalize_threshold(grad: &ScanGrid) -> ScanGrid {
    let clamped = grad.values().mapv(positive_part);
    let floor = median(clamped.iter().copied());
    let lifted = clamped.mapv(|v| positive_part(v - floor));
    let max = lifted.iter().copied().fold(0.0_f64, f64::max);
    let normalized = if max > 0.0 {
        lifted.mapv(|v| v / max)
    } else {
        Array2::zeros(lifted.dim())
    };
    grad.with_values(normalized).expect("same shape")
}

/// Block-mean downsampling onto 30x30 with fractional-area weights, then
/// clamped to `[0, 1]` and rescaled to a maximum of 1.
pub fn resize_to_30(grid: &ScanGrid) -> Result<ProcessedImage> {
    let (rows, cols) = grid.dim();
    if rows < IMAGE_SIDE || cols < IMAGE_SIDE {
        return Err(Error::Shape(format!(
            "cannot resize a {rows}x{cols} scan up to 30x30"
        )));
    }
    let row_w = area_weights(rows);
    let col_w = area_weights(cols);
    let resized = row_w.dot(grid.values()).dot(&col_w.t());
    let clamped = resized.mapv(|v| positive_part(v).min(1.0));
    let max = clamped.iter().copied().fold(0.0_f64, f64::max);
    let values = if max > 0.0 {
        clamped.mapv(|v| v / max)
    } else {
        clamped
    };
    ProcessedImage::new(values)
}

/// The full pipeline applied to every acquired window.
pub fn process(grid: &ScanGrid) -> Result<ProcessedImage> {
    let grad = gradient_along_measurement(grid)?;
    let grad = flip_correct(&grad);
    let grad = normalize_threshold(&grad);
    resize_to_30(&grad)
}

/// `IMAGE_SIDE x n` averaging matrix: entry `(i, j)` is the fraction of output
/// pixel `i` covered by input pixel `j`.
fn area_weights(n: usize) -> Array2<f64> {
    let mut w = Array2::zeros((IMAGE_SIDE, n));
    if n == IMAGE_SIDE {
        w.diag_mut().fill(1.0);
        return w;
    }
    let scale = n as f64 / IMAGE_SIDE as f64;
    for i in 0..IMAGE_SIDE {
        let lo = i as f64 * scale;
        let hi = (i + 1) as f64 * scale;
        let first = lo.floor() as usize;
        let last = (hi.ceil() as usize).min(n);
        for j in first..last {
            let overlap = (hi.min((j + 1) as f64) - lo.max(j as f64)).max(0.0);
            w[[i, j]] = overlap / scale;
        }
    }
    debug_assert!(w
        .sum_axis(NdAxis(1))
        .iter()
        .all(|s| (s - 1.0).abs() < 1e-12));
    w
}

fn positive_part(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn median(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}
