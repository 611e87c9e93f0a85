//! Scan acquisition over live simulated devices and premeasured rasters,
//! sandbox enforcement, and the `.qdscan.json` file format.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::codec;
use crate::device::{DeviceParams, Noise, StateLabel, DOMAIN_MAX_MV, DOMAIN_MIN_MV};
use crate::error::{Error, Result};
use crate::grid::{AcquisitionDirection, Axis, LabelGrid, PixelWindow, ScanGrid};

pub const SCAN_SCHEMA_VERSION: &str = "qdtune.scan/1";
pub const SCAN_FILE_EXTENSION: &str = ".qdscan.json";

/// Allowed plunger ranges. Measurements reaching outside are blocked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sandbox {
    pub v1_range: (f64, f64),
    pub v2_range: (f64, f64),
    /// Fitness assigned by the tuner to a blocked measurement.
    pub blocked_fitness: f64,
}

impl Default for Sandbox {
    fn default() -> Self {
        Self {
            v1_range: (DOMAIN_MIN_MV, DOMAIN_MAX_MV),
            v2_range: (DOMAIN_MIN_MV, DOMAIN_MAX_MV),
            blocked_fitness: 2.0,
        }
    }
}

impl Sandbox {
    pub fn validate(&self) -> Result<()> {
        if !(self.v1_range.0 < self.v1_range.1) || !(self.v2_range.0 < self.v2_range.1) {
            return Err(Error::Config("sandbox ranges need min < max".into()));
        }
        Ok(())
    }

    pub fn contains(&self, v1: f64, v2: f64) -> bool {
        (self.v1_range.0..=self.v1_range.1).contains(&v1)
            && (self.v2_range.0..=self.v2_range.1).contains(&v2)
    }

    /// True when all four corners of the window lie inside.
    pub fn admits(&self, center: (f64, f64), span: (f64, f64)) -> bool {
        let (h1, h2) = (0.5 * span.0, 0.5 * span.1);
        [(-h1, -h2), (-h1, h2), (h1, -h2), (h1, h2)]
            .iter()
            .all(|&(d1, d2)| self.contains(center.0 + d1, center.1 + d2))
    }
}

/// Where measurements come from.
#[derive(Debug, Clone)]
pub enum MeasurementSource {
    SimulatedDevice {
        params: DeviceParams,
        noise: Noise,
    },
    PremeasuredScan {
        scan: ScanGrid,
        labels: Option<LabelGrid>,
    },
}

impl MeasurementSource {
    pub fn simulated(params: DeviceParams, noise: Noise) -> Result<Self> {
        params.validate()?;
        Ok(Self::SimulatedDevice { params, noise })
    }

    /// Whether acquired windows carry ground-truth labels.
    pub fn has_labels(&self) -> bool {
        match self {
            MeasurementSource::SimulatedDevice { .. } => true,
            MeasurementSource::PremeasuredScan { labels, .. } => labels.is_some(),
        }
    }

    pub fn premeasured(scan: ScanGrid, labels: Option<LabelGrid>) -> Result<Self> {
        if let Some(l) = &labels {
            if !l.aligns_with(&scan) {
                return Err(Error::Shape(
                    "label grid does not align with the premeasured scan".into(),
                ));
            }
        }
        Ok(Self::PremeasuredScan { scan, labels })
    }
}

/// One measured window: the sensor raster and, when the source knows it,
/// the ground truth for every pixel.
#[derive(Debug, Clone)]
pub struct Window {
    pub scan: ScanGrid,
    pub labels: Option<LabelGrid>,
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Acquisition {
    Data(Window),
    Blocked,
}

impl Acquisition {
    pub fn is_blocked(&self) -> bool {
        matches!(self, Acquisition::Blocked)
    }
}

/// Measures the window centered at `center`, or reports it blocked.
pub fn acquire(
    source: &MeasurementSource,
    center: (f64, f64),
    span: (f64, f64),
    resolution: f64,
    sandbox: &Sandbox,
) -> Result<Acquisition> {
    if !(span.0 > 0.0 && span.1 > 0.0) {
        return Err(Error::Config(format!(
            "span must be positive, got {span:?}"
        )));
    }
    if !(resolution > 0.0) {
        return Err(Error::Config(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    if !center.0.is_finite() || !center.1.is_finite() || !sandbox.admits(center, span) {
        return Ok(Acquisition::Blocked);
    }
    match source {
        MeasurementSource::SimulatedDevice { params, noise } => {
            let domain = Sandbox::default();
            if !domain.admits(center, span) {
                return Ok(Acquisition::Blocked);
            }
            let (scan, labels) = params.render_scan(center, span, resolution, *noise)?;
            Ok(Acquisition::Data(Window {
                scan,
                labels: Some(labels),
            }))
        }
        MeasurementSource::PremeasuredScan { scan, labels } => {
            match locate_window(scan, center, span, resolution)? {
                None => Ok(Acquisition::Blocked),
                Some(w) => Ok(Acquisition::Data(Window {
                    scan: scan.crop(&w),
                    labels: labels.as_ref().map(|l| l.crop(&w)),
                })),
            }
        }
    }
}

/// Ground-truth labels of a window, bypassing the sandbox. `None` when the
/// source has no labels or the window leaves the stored raster/domain.
pub fn ground_truth(
    source: &MeasurementSource,
    center: (f64, f64),
    span: (f64, f64),
    resolution: f64,
) -> Result<Option<LabelGrid>> {
    match acquire(source, center, span, resolution, &Sandbox::default())? {
        Acquisition::Data(w) => Ok(w.labels),
        Acquisition::Blocked => Ok(None),
    }
}

/// Native pixel block covering the requested window, snapping the first
/// pixel center to the nearest stored pixel (ties round up).
fn locate_window(
    scan: &ScanGrid,
    center: (f64, f64),
    span: (f64, f64),
    resolution: f64,
) -> Result<Option<PixelWindow>> {
    let native = scan.resolution();
    let ratio = resolution / native;
    let stride = ratio.round();
    if ratio < 1.0 - 1e-9 || (ratio - stride).abs() > 1e-9 {
        return Err(Error::UnsupportedResolution {
            requested: resolution,
            native,
        });
    }
    let stride = stride as usize;
    let pixels = |s: f64, name: &str| -> Result<usize> {
        let n = s / resolution;
        if (n - n.round()).abs() > 1e-9 || n.round() < 1.0 {
            return Err(Error::Config(format!(
                "{name} span {s} mV is not a whole number of {resolution} mV pixels"
            )));
        }
        Ok(n.round() as usize)
    };
    let cols = pixels(span.0, "v1")?;
    let rows = pixels(span.1, "v2")?;
    let first = |c: f64, s: f64, axis: &Axis, n: usize| -> Option<usize> {
        let ideal = c - 0.5 * s + 0.5 * resolution;
        let idx = ((ideal - axis.start) / native + 0.5).floor();
        if idx < 0.0 {
            return None;
        }
        let idx = idx as usize;
        (idx + (n - 1) * stride < axis.len).then_some(idx)
    };
    let col0 = first(center.0, span.0, scan.v1_axis(), cols);
    let row0 = first(center.1, span.1, scan.v2_axis(), rows);
    Ok(match (row0, col0) {
        (Some(row0), Some(col0)) => Some(PixelWindow {
            row0,
            col0,
            rows,
            cols,
            stride,
        }),
        _ => None,
    })
}

/// Negates every sensor value, emulating a charge-sensor flip.
pub fn inject_sensor_flip(grid: &ScanGrid) -> ScanGrid {
    grid.with_values(grid.values().mapv(|v| -v))
        .expect("same shape")
}

pub fn scan_to_json(grid: &ScanGrid, labels: Option<&LabelGrid>) -> Result<String> {
    if let Some(l) = labels {
        if !l.aligns_with(grid) {
            return Err(Error::Shape("labels do not align with the scan".into()));
        }
    }
    let (rows, cols) = grid.dim();
    let labels_doc = labels.map(|l| {
        let table: Map<String, Value> = StateLabel::ALL
            .iter()
            .map(|s| (s.code().to_string(), json!(format!("{s:?}"))))
            .collect();
        let data: Vec<u8> = l.labels().iter().map(|s| s.code()).collect();
        json!({ "table": table, "data": data })
    });
    let doc = json!({
        "schema_version": SCAN_SCHEMA_VERSION,
        "units": { "voltage": "mV", "signal": "sensor" },
        "origin": [grid.v1_axis().start, grid.v2_axis().start],
        "resolution": grid.resolution(),
        "dims": [rows, cols],
        "acquisition_direction": grid.direction(),
        "values": codec::encode_f64(grid.values().iter().copied()),
        "labels": labels_doc,
    });
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn scan_from_json(text: &str) -> Result<(ScanGrid, Option<LabelGrid>)> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| Error::parse("document", e.to_string()))?;
    check_version(&doc, SCAN_SCHEMA_VERSION)?;
    let origin = field(&doc, "origin")?
        .as_array()
        .filter(|a| a.len() == 2)
        .and_then(|a| Some((a[0].as_f64()?, a[1].as_f64()?)))
        .ok_or_else(|| Error::parse("origin", "expected [v1, v2]"))?;
    let resolution = field(&doc, "resolution")?
        .as_f64()
        .ok_or_else(|| Error::parse("resolution", "expected a number"))?;
    let (rows, cols) = field(&doc, "dims")?
        .as_array()
        .filter(|a| a.len() == 2)
        .and_then(|a| Some((a[0].as_u64()? as usize, a[1].as_u64()? as usize)))
        .ok_or_else(|| Error::parse("dims", "expected [rows, cols]"))?;
    let direction: AcquisitionDirection =
        serde_json::from_value(field(&doc, "acquisition_direction")?.clone())
            .map_err(|e| Error::parse("acquisition_direction", e.to_string()))?;
    let blob = field(&doc, "values")?
        .as_str()
        .ok_or_else(|| Error::parse("values", "expected a base64 string"))?;
    let values = codec::decode_f64("values", blob, rows * cols)?;
    let v1 =
        Axis::new(origin.0, resolution, cols).map_err(|e| Error::parse("dims", e.to_string()))?;
    let v2 =
        Axis::new(origin.1, resolution, rows).map_err(|e| Error::parse("dims", e.to_string()))?;
    let values = Array2::from_shape_vec((rows, cols), values).expect("length checked");
    let grid = ScanGrid::new(values, v1, v2, direction)?;

    let labels = match doc.get("labels") {
        None | Some(Value::Null) => None,
        Some(l) => {
            let data = l
                .get("data")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::parse("labels.data", "expected an integer array"))?;
            if data.len() != rows * cols {
                return Err(Error::parse(
                    "labels.data",
                    format!("expected {} entries, found {}", rows * cols, data.len()),
                ));
            }
            let decoded = data
                .iter()
                .map(|v| {
                    v.as_u64()
                        .and_then(|c| u8::try_from(c).ok())
                        .and_then(StateLabel::from_code)
                        .ok_or_else(|| Error::parse("labels.data", format!("bad label code {v}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let arr = Array2::from_shape_vec((rows, cols), decoded).expect("length checked");
            Some(LabelGrid::new(arr, v1, v2)?)
        }
    };
    Ok((grid, labels))
}

pub fn save_scan(
    path: impl AsRef<Path>,
    grid: &ScanGrid,
    labels: Option<&LabelGrid>,
) -> Result<()> {
    let path = path.as_ref();
    let text = scan_to_json(grid, labels)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_scan(path: impl AsRef<Path>) -> Result<(ScanGrid, Option<LabelGrid>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    scan_from_json(&text)
}

pub(crate) fn field<'a>(doc: &'a Value, name: &str) -> Result<&'a Value> {
    doc.get(name).ok_or_else(|| Error::parse(name, "missing"))
}

pub(crate) fn check_version(doc: &Value, expected: &str) -> Result<()> {
    let found = field(doc, "schema_version")?
        .as_str()
        .ok_or_else(|| Error::parse("schema_version", "expected a string"))?;
    if found != expected {
        return Err(Error::Version {
            expected: expected.into(),
            found: found.into(),
        });
    }
    Ok(())
}
