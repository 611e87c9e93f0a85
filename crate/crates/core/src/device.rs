//! Phenomenological double-dot device.
//!
//! Each plunger controls one dot through a "headroom" coordinate
//! `h1 = (v1 - v1_on) + s_left (v2 - v2_on)` (and symmetrically `h2`). A dot
//! exists where its headroom is non-negative. Where both dots exist the
//! device is a double dot as long as the detuning `v2 - v1` stays inside
//! `dd_band`; outside the band the dominant plunger's dot swallows the other
//! and the device is a single left/right dot. Above `merge_threshold` on both
//! plungers the dots merge into one central dot.
//!
//! The charge sensor sees each dot's occupation as a thermally broadened
//! staircase with one step per `line_spacing` of headroom. A staircase is
//! split into a smooth ramp (its running mean) plus a bounded oscillating
//! part that carries the transition lines; fading the oscillating part with
//! smooth gates removes a dot's lines without introducing sensor jumps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AcquisitionDirection, Axis, LabelGrid, ScanGrid};

/// Lower bound of both plunger voltages.
pub const DOMAIN_MIN_MV: f64 = 0.0;
/// Upper bound of both plunger voltages.
pub const DOMAIN_MAX_MV: f64 = 600.0;

pub const DEVICE_SCHEMA_VERSION: &str = "qdtune.device/1";

/// 10-90 % rise width of one charge-transition step.
pub const TRANSITION_WIDTH_MV: f64 = 2.0;
/// Width of the smooth gates that fade line families in and out.
pub const GATE_WIDTH_MV: f64 = 20.0;

// Logistic scale giving a 10-90 % width of TRANSITION_WIDTH_MV.
const THERMAL_SCALE: f64 = TRANSITION_WIDTH_MV / (2.0 * 2.197_224_577_336_219_4);
// Steps farther than this (in units of THERMAL_SCALE) are exactly 0 or 1 in f64.
const STEP_CUTOFF: f64 = 40.0;

/// Global state of the device at one gate-voltage point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateLabel {
    NoDot,
    SingleLeft,
    SingleCentral,
    SingleRight,
    DoubleDot,
}

/// Coarse classes counted by the probability vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateClass {
    None,
    Single,
    Double,
}

impl StateClass {
    pub const ALL: [StateClass; 3] = [StateClass::None, StateClass::Single, StateClass::Double];

    pub fn index(self) -> usize {
        match self {
            StateClass::None => 0,
            StateClass::Single => 1,
            StateClass::Double => 2,
        }
    }
}

impl StateLabel {
    pub const ALL: [StateLabel; 5] = [
        StateLabel::NoDot,
        StateLabel::SingleLeft,
        StateLabel::SingleCentral,
        StateLabel::SingleRight,
        StateLabel::DoubleDot,
    ];

    /// Integer code used in label files: 0 NoDot, 1 SingleLeft,
    /// 2 SingleCentral, 3 SingleRight, 4 DoubleDot.
    pub fn code(self) -> u8 {
        match self {
            StateLabel::NoDot => 0,
            StateLabel::SingleLeft => 1,
            StateLabel::SingleCentral => 2,
            StateLabel::SingleRight => 3,
            StateLabel::DoubleDot => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn class(self) -> StateClass {
        match self {
            StateLabel::NoDot => StateClass::None,
            StateLabel::SingleLeft | StateLabel::SingleCentral | StateLabel::SingleRight => {
                StateClass::Single
            }
            StateLabel::DoubleDot => StateClass::Double,
        }
    }
}

/// Parameters of one synthetic device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub seed: u64,
    /// `(v1_on, v2_on)`: formation thresholds in mV.
    pub formation_thresholds: (f64, f64),
    pub merge_threshold: f64,
    /// `(lower, upper)` bounds on the detuning `v2 - v1`, mV.
    pub dd_band: (f64, f64),
    pub lever_arms: (f64, f64),
    pub line_spacing: f64,
    /// Cross-coupling of the opposite plunger into each dot's headroom.
    pub line_slopes: (f64, f64),
    /// Shift of one dot's lines per electron on the other dot, mV.
    pub interdot_coupling: f64,
    pub noise_sigma: f64,
    pub background_gradient: f64,
}

impl DeviceParams {
    /// The fixed reference device used by the off-line tuning experiments.
    pub fn reference() -> Self {
        Self {
            seed: 0,
            formation_thresholds: (230.0, 240.0),
            merge_threshold: 400.0,
            dd_band: (-160.0, 160.0),
            lever_arms: (1.0, 0.9),
            line_spacing: 22.0,
            line_slopes: (0.25, 0.35),
            interdot_coupling: 6.0,
            noise_sigma: 0.02,
            background_gradient: 0.002,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (v1_on, v2_on) = self.formation_thresholds;
        let inside = |v: f64| v > DOMAIN_MIN_MV && v < DOMAIN_MAX_MV;
        let finite = [
            v1_on,
            v2_on,
            self.merge_threshold,
            self.dd_band.0,
            self.dd_band.1,
            self.lever_arms.0,
            self.lever_arms.1,
            self.line_spacing,
            self.line_slopes.0,
            self.line_slopes.1,
            self.interdot_coupling,
            self.noise_sigma,
            self.background_gradient,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("device parameters must be finite".into()));
        }
        if !inside(v1_on) || !inside(v2_on) {
            return Err(Error::Config(format!(
                "formation thresholds ({v1_on}, {v2_on}) must lie in (0, 600) mV"
            )));
        }
        if self.dd_band.0 >= self.dd_band.1 {
            return Err(Error::Config("dd_band lower must be below upper".into()));
        }
        if !(self.line_spacing > 0.0) {
            return Err(Error::Config("line_spacing must be positive".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::Config("noise_sigma must be non-negative".into()));
        }
        if self.lever_arms.0 <= 0.0 || self.lever_arms.1 <= 0.0 {
            return Err(Error::Config("lever arms must be positive".into()));
        }
        if self.line_slopes.0 < 0.0 || self.line_slopes.1 < 0.0 || self.interdot_coupling < 0.0 {
            return Err(Error::Config(
                "line slopes and interdot coupling must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            schema_version: &'a str,
            #[serde(flatten)]
            params: &'a DeviceParams,
        }
        Ok(serde_json::to_string_pretty(&Doc {
            schema_version: DEVICE_SCHEMA_VERSION,
            params: self,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut doc: serde_json::Value = serde_json::from_str(text)?;
        let found = doc
            .get("schema_version")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::parse("schema_version", "missing"))?
            .to_owned();
        if found != DEVICE_SCHEMA_VERSION {
            return Err(Error::Version {
                expected: DEVICE_SCHEMA_VERSION.into(),
                found,
            });
        }
        doc.as_object_mut()
            .expect("checked above")
            .remove("schema_version");
        let params: DeviceParams = serde_json::from_value(doc)?;
        params.validate()?;
        Ok(params)
    }

    /// Ground-truth state at `(v1, v2)`.
    pub fn state_at(&self, v1: f64, v2: f64) -> Result<StateLabel> {
        check_domain(v1, v2)?;
        Ok(self.state_unchecked(v1, v2))
    }

    pub(crate) fn state_unchecked(&self, v1: f64, v2: f64) -> StateLabel {
        if v1 >= self.merge_threshold && v2 >= self.merge_threshold {
            return StateLabel::SingleCentral;
        }
        let (h1, h2) = self.headroom(v1, v2);
        let detuning = v2 - v1;
        match (h1 >= 0.0, h2 >= 0.0) {
            (false, false) => StateLabel::NoDot,
            (true, false) => StateLabel::SingleLeft,
            (false, true) => StateLabel::SingleRight,
            (true, true) => {
                if detuning < self.dd_band.0 {
                    StateLabel::SingleLeft
                } else if detuning > self.dd_band.1 {
                    StateLabel::SingleRight
                } else {
                    StateLabel::DoubleDot
                }
            }
        }
    }

    fn headroom(&self, v1: f64, v2: f64) -> (f64, f64) {
        let x1 = v1 - self.formation_thresholds.0;
        let x2 = v2 - self.formation_thresholds.1;
        (x1 + self.line_slopes.0 * x2, x2 + self.line_slopes.1 * x1)
    }

    /// Charge-sensor reading at `(v1, v2)`.
    pub fn sensor_response(&self, v1: f64, v2: f64, noise: Noise) -> Result<f64> {
        check_domain(v1, v2)?;
        Ok(self.sensor_unchecked(v1, v2, noise))
    }

    pub(crate) fn sensor_unchecked(&self, v1: f64, v2: f64, noise: Noise) -> f64 {
        let clean = self.clean_signal(v1, v2);
        match noise {
            Noise::Off => clean,
            Noise::Seeded(seed) => clean + self.noise_sigma * pixel_normal(seed, self.seed, v1, v2),
        }
    }

    fn clean_signal(&self, v1: f64, v2: f64) -> f64 {
        let sp = self.line_spacing;
        let (a1, a2) = self.lever_arms;
        let (h1, h2) = self.headroom(v1, v2);
        let detuning = v2 - v1;

        // Line-family gates: fade a dot's lines outside the detuning band
        // and inside the merged plateau.
        let gate1 = smoothstep((self.dd_band.1 - detuning) / GATE_WIDTH_MV + 0.5);
        let gate2 = smoothstep((detuning - self.dd_band.0) / GATE_WIDTH_MV + 0.5);
        let merged = smoothstep((v1.min(v2) - self.merge_threshold) / GATE_WIDTH_MV + 0.5);
        let keep1 = gate1 * (1.0 - merged);
        let keep2 = gate2 * (1.0 - merged);

        let u = self.interdot_coupling;
        let phi1 = h1 - u * keep2 * occupation(h2, sp);
        let phi2 = h2 - u * keep1 * occupation(h1, sp);
        let central = phi1.max(0.0) + phi2.max(0.0);

        a1 * (ramp(phi1, sp) + keep1 * ripple(phi1, sp))
            + a2 * (ramp(phi2, sp) + keep2 * ripple(phi2, sp))
            + 0.5 * (a1 + a2) * merged * ripple(central, sp)
            + self.background_gradient * (v1 + v2)
    }

    /// Renders a window centered at `center` spanning `span` mV with the
    /// given pixel size. Pixel values are sampled at pixel centers.
    pub fn render_scan(
        &self,
        center: (f64, f64),
        span: (f64, f64),
        resolution: f64,
        noise: Noise,
    ) -> Result<(ScanGrid, LabelGrid)> {
        let (v1_axis, v2_axis) = window_axes(center, span, resolution)?;
        for (axis, name) in [(&v1_axis, "v1"), (&v2_axis, "v2")] {
            if axis.lower_edge() < DOMAIN_MIN_MV - 1e-9 || axis.upper_edge() > DOMAIN_MAX_MV + 1e-9
            {
                return Err(Error::Config(format!(
                    "{name} window [{}, {}] leaves the device domain",
                    axis.lower_edge(),
                    axis.upper_edge()
                )));
            }
        }
        let shape = (v2_axis.len, v1_axis.len);
        let mut values = ndarray::Array2::zeros(shape);
        let mut labels = ndarray::Array2::from_elem(shape, StateLabel::NoDot);
        for row in 0..shape.0 {
            let v2 = v2_axis.value(row).clamp(DOMAIN_MIN_MV, DOMAIN_MAX_MV);
            for col in 0..shape.1 {
                let v1 = v1_axis.value(col).clamp(DOMAIN_MIN_MV, DOMAIN_MAX_MV);
                values[[row, col]] = self.sensor_unchecked(v1, v2, noise);
                labels[[row, col]] = self.state_unchecked(v1, v2);
            }
        }
        Ok((
            ScanGrid::new(values, v1_axis, v2_axis, AcquisitionDirection::V1)?,
            LabelGrid::new(labels, v1_axis, v2_axis)?,
        ))
    }
}

/// Whether (and how) sensor noise is added.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Noise {
    Off,
    /// Additive Gaussian noise. Each pixel's draw is a pure function of the
    /// noise seed, the device seed and the voltages.
    Seeded(u64),
}

/// Pixel-center axes of a window; errors unless `span / resolution` is integral.
pub fn window_axes(center: (f64, f64), span: (f64, f64), resolution: f64) -> Result<(Axis, Axis)> {
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(Error::Config(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    let axis = |c: f64, s: f64, name: &str| -> Result<Axis> {
        if !(s > 0.0) || !s.is_finite() || !c.is_finite() {
            return Err(Error::Config(format!(
                "{name} span must be positive, got {s}"
            )));
        }
        let n = s / resolution;
        let pixels = n.round();
        if (n - pixels).abs() > 1e-9 || pixels < 1.0 {
            return Err(Error::Config(format!(
                "{name} span {s} mV is not a whole number of {resolution} mV pixels"
            )));
        }
        Axis::new(c - 0.5 * s + 0.5 * resolution, resolution, pixels as usize)
    };
    Ok((axis(center.0, span.0, "v1")?, axis(center.1, span.1, "v2")?))
}

fn check_domain(v1: f64, v2: f64) -> Result<()> {
    let ok = |v: f64| (DOMAIN_MIN_MV..=DOMAIN_MAX_MV).contains(&v);
    if ok(v1) && ok(v2) {
        Ok(())
    } else {
        Err(Error::Domain { v1, v2 })
    }
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Thermally broadened electron count: one logistic step at each
/// `k * spacing`, `k >= 0`.
pub(crate) fn occupation(headroom: f64, spacing: f64) -> f64 {
    let reach = STEP_CUTOFF * THERMAL_SCALE;
    if headroom < -reach {
        return 0.0;
    }
    let first_partial = ((headroom - reach) / spacing).floor().max(-1.0) + 1.0;
    let last = ((headroom + reach) / spacing).floor();
    let mut n = first_partial;
    let mut k = first_partial;
    while k <= last {
        n += logistic((headroom - k * spacing) / THERMAL_SCALE);
        k += 1.0;
    }
    n
}

/// Smooth running mean of [`occupation`].
fn ramp(headroom: f64, spacing: f64) -> f64 {
    let soft = 0.25 * spacing;
    let x = (headroom + 0.5 * spacing) / soft;
    let softplus = if x > 30.0 { x } else { x.exp().ln_1p() };
    soft * softplus / spacing
}

fn ripple(headroom: f64, spacing: f64) -> f64 {
    occupation(headroom, spacing) - ramp(headroom, spacing)
}

fn pixel_normal(noise_seed: u64, device_seed: u64, v1: f64, v2: f64) -> f64 {
    let key = mix(
        mix(mix(noise_seed, device_seed), v1.to_bits()),
        v2.to_bits(),
    );
    ChaCha8Rng::seed_from_u64(key).sample(StandardNormal)
}

/// SplitMix64 finalizer over `a ^ b`, used to derive per-pixel stream keys.
pub(crate) fn mix(a: u64, b: u64) -> u64 {
    let mut z = (a ^ b.rotate_left(32)).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Ranges from which [`sample_device`] draws each parameter, as
/// `(low, high)` inclusive intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VariationConfig {
    pub v1_on: (f64, f64),
    pub v2_on: (f64, f64),
    pub merge_threshold: (f64, f64),
    pub dd_lower: (f64, f64),
    pub dd_upper: (f64, f64),
    pub lever_arm_1: (f64, f64),
    pub lever_arm_2: (f64, f64),
    pub line_spacing: (f64, f64),
    pub slope_left: (f64, f64),
    pub slope_right: (f64, f64),
    pub interdot_coupling: (f64, f64),
    pub noise_sigma: (f64, f64),
    pub background_gradient: (f64, f64),
}

impl Default for VariationConfig {
    fn default() -> Self {
        Self {
            v1_on: (190.0, 270.0),
            v2_on: (200.0, 280.0),
            merge_threshold: (370.0, 430.0),
            dd_lower: (-190.0, -130.0),
            dd_upper: (130.0, 190.0),
            lever_arm_1: (0.8, 1.2),
            lever_arm_2: (0.8, 1.2),
            line_spacing: (16.0, 28.0),
            slope_left: (0.15, 0.4),
            slope_right: (0.15, 0.4),
            interdot_coupling: (4.0, 9.0),
            noise_sigma: (0.005, 0.03),
            background_gradient: (0.0, 0.005),
        }
    }
}

impl VariationConfig {
    /// A configuration whose every range collapses to `params`' value.
    pub fn fixed(params: &DeviceParams) -> Self {
        let p = |v: f64| (v, v);
        Self {
            v1_on: p(params.formation_thresholds.0),
            v2_on: p(params.formation_thresholds.1),
            merge_threshold: p(params.merge_threshold),
            dd_lower: p(params.dd_band.0),
            dd_upper: p(params.dd_band.1),
            lever_arm_1: p(params.lever_arms.0),
            lever_arm_2: p(params.lever_arms.1),
            line_spacing: p(params.line_spacing),
            slope_left: p(params.line_slopes.0),
            slope_right: p(params.line_slopes.1),
            interdot_coupling: p(params.interdot_coupling),
            noise_sigma: p(params.noise_sigma),
            background_gradient: p(params.background_gradient),
        }
    }

    fn ranges(&self) -> [(&'static str, (f64, f64)); 13] {
        [
            ("v1_on", self.v1_on),
            ("v2_on", self.v2_on),
            ("merge_threshold", self.merge_threshold),
            ("dd_lower", self.dd_lower),
            ("dd_upper", self.dd_upper),
            ("lever_arm_1", self.lever_arm_1),
            ("lever_arm_2", self.lever_arm_2),
            ("line_spacing", self.line_spacing),
            ("slope_left", self.slope_left),
            ("slope_right", self.slope_right),
            ("interdot_coupling", self.interdot_coupling),
            ("noise_sigma", self.noise_sigma),
            ("background_gradient", self.background_gradient),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in self.ranges() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::Config(format!(
                    "variation range `{name}` = ({lo}, {hi}) is empty"
                )));
            }
        }
        Ok(())
    }
}

/// Draws a device deterministically from `seed`.
pub fn sample_device(seed: u64, variation: &VariationConfig) -> Result<DeviceParams> {
    variation.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |(lo, hi): (f64, f64)| -> f64 {
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..=hi)
        }
    };
    let v = variation;
    let params = DeviceParams {
        seed,
        formation_thresholds: (draw(v.v1_on), draw(v.v2_on)),
        merge_threshold: draw(v.merge_threshold),
        dd_band: (draw(v.dd_lower), draw(v.dd_upper)),
        lever_arms: (draw(v.lever_arm_1), draw(v.lever_arm_2)),
        line_spacing: draw(v.line_spacing),
        line_slopes: (draw(v.slope_left), draw(v.slope_right)),
        interdot_coupling: draw(v.interdot_coupling),
        noise_sigma: draw(v.noise_sigma),
        background_gradient: draw(v.background_gradient),
    };
    params.validate()?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_thresholds(v_on: f64, merge: f64) -> DeviceParams {
        DeviceParams {
            formation_thresholds: (v_on, v_on),
            merge_threshold: merge,
            ..DeviceParams::reference()
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let cfg = VariationConfig::default();
        assert_eq!(
            sample_device(7, &cfg).unwrap(),
            sample_device(7, &cfg).unwrap()
        );
    }

    #[test]
    fn distinct_seeds_give_distinct_devices() {
        let cfg = VariationConfig::default();
        let differing = (0..100u64)
            .filter(|&s| {
                sample_device(2 * s + 1000, &cfg).unwrap()
                    != sample_device(2 * s + 1001, &cfg).unwrap()
            })
            .count();
        assert!(differing >= 99, "only {differing} of 100 pairs differ");
    }

    #[test]
    fn zero_width_ranges_give_the_point_value() {
        let reference = DeviceParams::reference();
        let got = sample_device(0, &VariationConfig::fixed(&reference)).unwrap();
        assert_eq!(got, reference);
    }

    #[test]
    fn inverted_range_is_a_config_error() {
        let cfg = VariationConfig {
            line_spacing: (30.0, 10.0),
            ..Default::default()
        };
        assert!(matches!(sample_device(1, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn low_voltages_are_no_dot() {
        let p = with_thresholds(200.0, 450.0);
        assert_eq!(p.state_at(50.0, 50.0).unwrap(), StateLabel::NoDot);
    }

    #[test]
    fn high_plateau_is_central() {
        let p = with_thresholds(200.0, 450.0);
        assert_eq!(p.state_at(550.0, 550.0).unwrap(), StateLabel::SingleCentral);
    }

    #[test]
    fn out_of_domain_is_rejected() {
        let p = DeviceParams::reference();
        assert!(matches!(p.state_at(-1.0, 10.0), Err(Error::Domain { .. })));
        assert!(matches!(
            p.sensor_response(10.0, 600.5, Noise::Off),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn double_dot_area_fraction_is_moderate() {
        let p = DeviceParams::reference();
        let mut dd = 0usize;
        for i in 0..600 {
            for j in 0..600 {
                if p.state_unchecked(i as f64 + 0.5, j as f64 + 0.5) == StateLabel::DoubleDot {
                    dd += 1;
                }
            }
        }
        let fraction = dd as f64 / 360_000.0;
        assert!((0.05..=0.4).contains(&fraction), "fraction {fraction}");
    }

    #[test]
    fn every_label_occurs() {
        let p = DeviceParams::reference();
        let mut seen = std::collections::HashSet::new();
        for i in 0..=60 {
            for j in 0..=60 {
                seen.insert(p.state_unchecked(i as f64 * 10.0, j as f64 * 10.0));
            }
        }
        assert_eq!(seen.len(), 5);
    }

    #[test]
    fn formation_is_monotone_along_v1() {
        let cfg = VariationConfig::default();
        for seed in 0..20 {
            let p = sample_device(seed, &cfg).unwrap();
            for j in 0..=120 {
                let v2 = j as f64 * 5.0;
                let mut prev = p.state_unchecked(0.0, v2);
                for i in 1..=600 {
                    let cur = p.state_unchecked(i as f64, v2);
                    assert!(
                        !(prev == StateLabel::DoubleDot && cur == StateLabel::NoDot),
                        "DD -> NoDot at v1={i} v2={v2}"
                    );
                    prev = cur;
                }
            }
        }
    }

    #[test]
    fn regions_are_connected() {
        let p = DeviceParams::reference();
        let n = 301;
        let label = |r: usize, c: usize| p.state_unchecked(c as f64 * 2.0, r as f64 * 2.0);
        for target in StateLabel::ALL {
            let mut seen = vec![false; n * n];
            let mut components = 0;
            for start in 0..n * n {
                if seen[start] || label(start / n, start % n) != target {
                    continue;
                }
                components += 1;
                let mut stack = vec![start];
                seen[start] = true;
                while let Some(idx) = stack.pop() {
                    let (r, c) = (idx / n, idx % n);
                    let neighbours = [
                        (r.wrapping_sub(1), c),
                        (r + 1, c),
                        (r, c.wrapping_sub(1)),
                        (r, c + 1),
                    ];
                    for (nr, nc) in neighbours {
                        if nr < n && nc < n && !seen[nr * n + nc] && label(nr, nc) == target {
                            seen[nr * n + nc] = true;
                            stack.push(nr * n + nc);
                        }
                    }
                }
            }
            assert_eq!(components, 1, "{target:?} has {components} components");
        }
    }

    #[test]
    fn noiseless_sensor_is_deterministic() {
        let p = DeviceParams::reference();
        let a = p.sensor_response(310.0, 320.0, Noise::Off).unwrap();
        let b = p.sensor_response(310.0, 320.0, Noise::Off).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let n1 = p.sensor_response(310.0, 320.0, Noise::Seeded(3)).unwrap();
        let n2 = p.sensor_response(310.0, 320.0, Noise::Seeded(3)).unwrap();
        assert_eq!(n1.to_bits(), n2.to_bits());
        assert_ne!(n1, a);
    }

    #[test]
    fn transition_lines_dominate_the_gradient() {
        // Cut along v1 through the single-left region at fixed v2, where
        // only dot 1 lines are present.
        let p = DeviceParams::reference();
        let v2 = 150.0;
        let h = 0.01;
        let grad = |v1: f64| {
            (p.sensor_response(v1 + h, v2, Noise::Off).unwrap()
                - p.sensor_response(v1 - h, v2, Noise::Off).unwrap())
                / (2.0 * h)
        };
        // Headroom h1 = (v1 - 230) + 0.25 (150 - 240); lines at h1 = k * 22.
        let x2 = v2 - p.formation_thresholds.1;
        let line_v1 = p.formation_thresholds.0 - p.line_slopes.0 * x2 + 3.0 * p.line_spacing;
        let mid_v1 = line_v1 + 0.5 * p.line_spacing;
        assert_eq!(p.state_at(line_v1, v2).unwrap(), StateLabel::SingleLeft);
        let on_line = grad(line_v1);
        let mid_cell = grad(mid_v1);
        assert!(on_line > 0.0 && mid_cell > 0.0);
        assert!(on_line >= 5.0 * mid_cell, "line {on_line} mid {mid_cell}");
    }

    #[test]
    fn deep_no_dot_gradient_is_background_only() {
        let p = DeviceParams::reference();
        let h = 0.5;
        for &(v1, v2) in &[(20.0, 20.0), (50.0, 50.0), (80.0, 30.0)] {
            let f = |a: f64, b: f64| p.sensor_response(a, b, Noise::Off).unwrap();
            let g1 = (f(v1 + h, v2) - f(v1 - h, v2)) / (2.0 * h);
            let g2 = (f(v1, v2 + h) - f(v1, v2 - h)) / (2.0 * h);
            assert!(g1.abs() <= p.background_gradient + 1e-9, "g1 {g1}");
            assert!(g2.abs() <= p.background_gradient + 1e-9, "g2 {g2}");
        }
    }

    #[test]
    fn render_dimensions() {
        let p = DeviceParams::reference();
        let (s, l) = p
            .render_scan((350.0, 400.0), (60.0, 60.0), 2.0, Noise::Off)
            .unwrap();
        assert_eq!(s.dim(), (30, 30));
        assert_eq!(l.dim(), (30, 30));
        let (s, _) = p
            .render_scan((350.0, 400.0), (30.0, 30.0), 1.0, Noise::Off)
            .unwrap();
        assert_eq!(s.dim(), (30, 30));
        assert!(p
            .render_scan((350.0, 400.0), (61.0, 60.0), 2.0, Noise::Off)
            .is_err());
        assert!(p
            .render_scan((590.0, 400.0), (60.0, 60.0), 2.0, Noise::Off)
            .is_err());
    }

    #[test]
    fn window_inside_double_dot_is_uniformly_labelled() {
        let p = DeviceParams::reference();
        let (_, l) = p
            .render_scan((320.0, 330.0), (40.0, 40.0), 2.0, Noise::Off)
            .unwrap();
        assert!(l.labels().iter().all(|&s| s == StateLabel::DoubleDot));
    }

    #[test]
    fn json_round_trip_and_version_check() {
        let p = sample_device(11, &VariationConfig::default()).unwrap();
        let text = p.to_json().unwrap();
        assert_eq!(DeviceParams::from_json(&text).unwrap(), p);
        let bad = text.replace(DEVICE_SCHEMA_VERSION, "qdtune.device/0");
        assert!(matches!(
            DeviceParams::from_json(&bad),
            Err(Error::Version { .. })
        ));
    }

    #[test]
    fn occupation_counts_steps() {
        assert_eq!(occupation(-100.0, 20.0), 0.0);
        assert!((occupation(10.0, 20.0) - 1.0).abs() < 1e-12);
        assert!((occupation(50.0, 20.0) - 3.0).abs() < 1e-12);
        assert!((occupation(40.0, 20.0) - 2.5).abs() < 1e-12);
    }
}
