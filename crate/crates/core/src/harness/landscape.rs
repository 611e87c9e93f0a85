use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::classifier::WindowClassifier;
use crate::device::StateLabel;
use crate::error::{Error, Result};
use crate::grid::{LabelGrid, PixelWindow, ScanGrid};
use crate::scan_io::Window;
use crate::tuner::{fitness, FitnessConfig};

/// Fitness of every fully contained window position over a stored scan.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeMap {
    /// `[row][col]` indexed by the window's first pixel.
    pub values: Array2<f64>,
    pub window_px: usize,
    /// Window centers along each axis, in mV.
    pub v1_centers: Vec<f64>,
    pub v2_centers: Vec<f64>,
    /// First minimum in row-major order.
    pub argmin: (usize, usize),
    /// Ground-truth label of the pixel at the minimizing window's center.
    pub argmin_label: Option<StateLabel>,
}

#[derive(Serialize)]
struct LandscapeDoc<'a> {
    window_px: usize,
    v1_centers: &'a [f64],
    v2_centers: &'a [f64],
    argmin: (usize, usize),
    argmin_center: (f64, f64),
    argmin_label: Option<StateLabel>,
    values: Vec<Vec<f64>>,
}

impl LandscapeMap {
    pub fn argmin_center(&self) -> (f64, f64) {
        (
            self.v1_centers[self.argmin.1],
            self.v2_centers[self.argmin.0],
        )
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = LandscapeDoc {
            window_px: self.window_px,
            v1_centers: &self.v1_centers,
            v2_centers: &self.v2_centers,
            argmin: self.argmin,
            argmin_center: self.argmin_center(),
            argmin_label: self.argmin_label,
            values: self.values.rows().into_iter().map(|r| r.to_vec()).collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }
}

/// Slides a `window_px` square over the scan at single-pixel steps and
/// scores each position with the classifier and fitness function.
pub fn fitness_landscape<C: WindowClassifier + ?Sized>(
    scan: &ScanGrid,
    labels: Option<&LabelGrid>,
    classifier: &C,
    window_px: usize,
    config: &FitnessConfig,
) -> Result<LandscapeMap> {
    config.validate()?;
    let (rows, cols) = scan.dim();
    if window_px == 0 || window_px > rows || window_px > cols {
        return Err(Error::Shape(format!(
            "a {window_px} px window does not fit in a {rows}x{cols} scan"
        )));
    }
    if let Some(l) = labels {
        if !l.aligns_with(scan) {
            return Err(Error::Shape("labels do not align with the scan".into()));
        }
    }
    let out = (rows - window_px + 1, cols - window_px + 1);
    let score = |r: usize, c: usize| -> Result<f64> {
        let w = PixelWindow {
            row0: r,
            col0: c,
            rows: window_px,
            cols: window_px,
            stride: 1,
        };
        let window = Window {
            scan: scan.crop(&w),
            labels: labels.map(|l| l.crop(&w)),
        };
        fitness(&classifier.classify_window(&window)?, config)
    };
    let rows_out: Vec<Vec<f64>> = (0..out.0)
        .into_par_iter()
        .map(|r| (0..out.1).map(|c| score(r, c)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let values = Array2::from_shape_vec(out, rows_out.into_iter().flatten().collect())
        .expect("row lengths match");

    let mut argmin = (0, 0);
    for ((r, c), &v) in values.indexed_iter() {
        if v < values[argmin] {
            argmin = (r, c);
        }
    }
    let centers = |axis: &crate::grid::Axis, n: usize| -> Vec<f64> {
        (0..n)
            .map(|i| (axis.value(i) + axis.value(i + window_px - 1)) / 2.0)
            .collect()
    };
    let half = window_px / 2;
    Ok(LandscapeMap {
        v1_centers: centers(scan.v1_axis(), out.1),
        v2_centers: centers(scan.v2_axis(), out.0),
        argmin_label: labels.map(|l| l.labels()[[argmin.0 + half, argmin.1 + half]]),
        argmin,
        window_px,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::OracleClassifier;
    use crate::device::{DeviceParams, Noise};

    #[test]
    fn map_size_and_range() {
        let (scan, labels) = DeviceParams::reference()
            .render_scan((300.0, 300.0), (80.0, 80.0), 2.0, Noise::Off)
            .unwrap();
        let map = fitness_landscape(
            &scan,
            Some(&labels),
            &OracleClassifier,
            30,
            &FitnessConfig::default(),
        )
        .unwrap();
        assert_eq!(map.values.dim(), (11, 11));
        assert!(map.values.iter().all(|v| (0.0..=2.0).contains(v)));
        assert_eq!(map.v1_centers[0], 290.0);
        assert!(map.to_json().unwrap().contains("\"argmin\""));
    }

    #[test]
    fn oversized_window_is_rejected() {
        let (scan, labels) = DeviceParams::reference()
            .render_scan((300.0, 300.0), (40.0, 40.0), 2.0, Noise::Off)
            .unwrap();
        let r = fitness_landscape(
            &scan,
            Some(&labels),
            &OracleClassifier,
            21,
            &FitnessConfig::default(),
        );
        assert!(matches!(r, Err(Error::Shape(_))));
    }
}
