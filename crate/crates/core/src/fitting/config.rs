use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Range and density of one grid axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub low: f64,
    pub high: f64,
    pub points: usize,
}

impl AxisSpec {
    pub const fn new(low: f64, high: f64, points: usize) -> Self {
        Self { low, high, points }
    }
}

/// Grid geometry for the initial search.
///
/// Ranges that depend on the data are expressed relative to it: `scale`
/// multiplies the data-anchored log-least-squares scale factor, `asymptote`
/// is a fraction of the smallest observed `y`, and break locations always
/// span `[min x, max x]` with `locationPoints` log-spaced values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct GridSpec {
    /// Multipliers on the anchored scale (`b` of the broken power law, `a` of M1-M3, `b` of M4); log-spaced.
    pub scale: AxisSpec,
    /// Asymptote as a fraction of `min y` (`a` of the broken power law, `c` of M2/M3, `eps_inf` of M4); linear.
    pub asymptote: AxisSpec,
    /// First-region slope `c0`; linear.
    pub slope0: AxisSpec,
    /// Slope changes `c_i`; linear.
    pub slope: AxisSpec,
    /// Number of log-spaced break locations over `[min x, max x]`.
    pub location_points: usize,
    /// Sharpness `f_i`; log-spaced.
    pub sharpness: AxisSpec,
    /// Exponent `b` of M1/M2 (M3 uses its negative part); linear.
    pub exponent: AxisSpec,
    /// M3 `d` as multiples of `[1 / max x, 1 / min x]`; log-spaced.
    pub m3_offset: AxisSpec,
    /// M4 exponent `a`; log-spaced.
    pub m4_power: AxisSpec,
    /// M4 exponent `c`; linear.
    pub m4_rate: AxisSpec,
    /// M4 `eps0` as a multiple of `max y`; log-spaced.
    pub m4_ceiling: AxisSpec,
    /// Upper bound on evaluated grid nodes; axes are thinned (never below
    /// two points) until the grid fits.
    pub max_nodes: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            scale: AxisSpec::new(0.1, 10.0, 3),
            asymptote: AxisSpec::new(0.0, 0.9, 7),
            slope0: AxisSpec::new(-0.5, 1.5, 7),
            slope: AxisSpec::new(-1.0, 2.0, 7),
            location_points: 7,
            sharpness: AxisSpec::new(0.01, 3.0, 7),
            exponent: AxisSpec::new(-2.0, 2.0, 7),
            m3_offset: AxisSpec::new(0.1, 10.0, 7),
            m4_power: AxisSpec::new(0.25, 4.0, 5),
            m4_rate: AxisSpec::new(-3.0, -0.1, 7),
            m4_ceiling: AxisSpec::new(1.01, 4.0, 7),
            max_nodes: 100_000,
        }
    }
}

/// Box constraints on fitted parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct Bounds {
    /// Permit a negative asymptote (`a` of the broken power law, `c` of
    /// M2/M3, `eps_inf` of M4).
    pub allow_negative_asymptote: bool,
    pub min_sharpness: f64,
    pub max_sharpness: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            allow_negative_asymptote: false,
            min_sharpness: 1e-4,
            max_sharpness: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct FitConfig {
    pub grid_spec: GridSpec,
    /// Refinement stops once the relative loss decrease drops below this.
    pub refine_tolerance: f64,
    pub max_refine_iters: usize,
    /// Number of best grid nodes refined locally.
    pub multi_start: usize,
    /// Extra seeded random starts drawn inside the grid ranges.
    pub random_starts: usize,
    /// Iteration cap for the first refinement pass over every start.
    pub race_iters: usize,
    /// Starts carried from the first pass into full refinement.
    pub finalists: usize,
    pub bounds: Bounds,
    pub seed: u64,
    /// Validation RMSLE differences at or below this count as ties when
    /// selecting break counts and crop points.
    pub selection_tolerance: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            grid_spec: GridSpec::default(),
            refine_tolerance: 1e-10,
            max_refine_iters: 10_000,
            multi_start: 8,
            random_starts: 32,
            race_iters: 300,
            finalists: 4,
            bounds: Bounds::default(),
            seed: 0,
            selection_tolerance: 1e-8,
        }
    }
}

impl FitConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid_spec;
        let axes = [
            ("scale", g.scale),
            ("asymptote", g.asymptote),
            ("slope0", g.slope0),
            ("slope", g.slope),
            ("sharpness", g.sharpness),
            ("exponent", g.exponent),
            ("m3Offset", g.m3_offset),
            ("m4Power", g.m4_power),
            ("m4Rate", g.m4_rate),
            ("m4Ceiling", g.m4_ceiling),
        ];
        for (name, axis) in axes {
            if axis.points < 2 {
                return Err(Error::InvalidParams(format!(
                    "grid axis {name} needs at least 2 points"
                )));
            }
            if !(axis.low.is_finite() && axis.high.is_finite() && axis.low <= axis.high) {
                return Err(Error::InvalidParams(format!("grid axis {name} has an invalid range")));
            }
        }
        for (name, axis) in [
            ("scale", g.scale),
            ("sharpness", g.sharpness),
            ("m3Offset", g.m3_offset),
            ("m4Power", g.m4_power),
            ("m4Ceiling", g.m4_ceiling),
        ] {
            if axis.low <= 0.0 {
                return Err(Error::InvalidParams(format!("log-spaced axis {name} must be positive")));
            }
        }
        if g.location_points < 2 {
            return Err(Error::InvalidParams("locationPoints must be at least 2".into()));
        }
        if self.multi_start < 1 {
            return Err(Error::InvalidParams("multiStart must be at least 1".into()));
        }
        if !(self.bounds.min_sharpness > 0.0 && self.bounds.min_sharpness < self.bounds.max_sharpness) {
            return Err(Error::InvalidParams(
                "sharpness bounds must satisfy 0 < min < max".into(),
            ));
        }
        if !(self.refine_tolerance >= 0.0) {
            return Err(Error::InvalidParams("refineTolerance must be nonnegative".into()));
        }
        Ok(())
    }
}
