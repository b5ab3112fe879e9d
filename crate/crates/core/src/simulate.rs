//! Noiseless simulation: sample a known broken power law, fit it on
//! growing prefixes of the x grid and measure how well each fit
//! extrapolates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{fit, FitConfig};
use crate::forms::{BnslParams, FormKind};
use crate::metrics::{self, PredictionPair};
use crate::series::{DataSeries, Sample};

pub const DEFAULT_SUCCESS_RMSLE: f64 = 1e-2;

fn default_success_rmsle() -> f64 {
    DEFAULT_SUCCESS_RMSLE
}

/// Log-spaced extrapolation probes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TestRange {
    pub x_low: f64,
    pub x_high: f64,
    pub count: usize,
}

impl TestRange {
    pub fn points(&self) -> Vec<f64> {
        logspace(self.x_low, self.x_high, self.count)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepSpec {
    pub truth: BnslParams,
    pub x_grid: Vec<f64>,
    /// Thresholds `T`; each fit uses the grid points with `x <= T`.
    pub fit_max_candidates: Vec<f64>,
    pub test_range: TestRange,
    #[serde(default = "default_success_rmsle")]
    pub success_rmsle: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.truth.validate()?;
        if self.x_grid.is_empty() || self.x_grid.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::Invariant("xGrid must be nonempty, positive and finite".into()));
        }
        if self.x_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invariant("xGrid must be strictly ascending".into()));
        }
        if self.fit_max_candidates.is_empty() || self.fit_max_candidates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invariant(
                "fitMaxCandidates must be nonempty and strictly ascending".into(),
            ));
        }
        let t = &self.test_range;
        if t.count == 0 || !(t.x_low > 0.0 && t.x_low <= t.x_high && t.x_high.is_finite()) {
            return Err(Error::Invariant(
                "testRange must satisfy 0 < xLow <= xHigh with count >= 1".into(),
            ));
        }
        let max_t = self.fit_max_candidates[self.fit_max_candidates.len() - 1];
        if t.x_low <= max_t {
            return Err(Error::Invariant(format!(
                "test probes must lie beyond every threshold: xLow = {} <= {max_t}",
                t.x_low
            )));
        }
        if !(self.success_rmsle >= 0.0) {
            return Err(Error::Invariant("successRmsle must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ThresholdResult {
    pub threshold: f64,
    pub fit_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmsle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<BnslParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepResult {
    pub per_threshold: Vec<ThresholdResult>,
    pub minimal_successful_t: Option<f64>,
}

/// `count` log-spaced values from `low` to `high` inclusive.
pub fn logspace(low: f64, high: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![low],
        _ => {
            let (l, h) = (low.ln(), high.ln());
            let mut v: Vec<f64> = (0..count)
                .map(|i| (l + (h - l) * i as f64 / (count - 1) as f64).exp())
                .collect();
            // keep the endpoints exact
            v[0] = low;
            v[count - 1] = high;
            v
        }
    }
}

/// Exact samples of `truth` on `x_grid`, all marked as training points.
pub fn generate_noiseless(truth: &BnslParams, x_grid: &[f64]) -> Result<DataSeries> {
    truth.validate()?;
    let samples = x_grid
        .iter()
        .map(|&x| Ok(Sample::new(x, truth.eval(x)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DataSeries::from_train("simulated", &samples))
}

pub fn run_sweep(spec: &SweepSpec, cfg: &FitConfig) -> Result<SweepResult> {
    spec.validate()?;
    cfg.validate()?;
    let series = generate_noiseless(&spec.truth, &spec.x_grid)?;
    let samples = series.train();
    let probes = spec
        .test_range
        .points()
        .into_iter()
        .map(|x| Ok(Sample::new(x, spec.truth.eval(x)?)))
        .collect::<Result<Vec<_>>>()?;
    let n = spec.truth.n();

    let per_threshold: Vec<ThresholdResult> = spec
        .fit_max_candidates
        .par_iter()
        .map(|&threshold| {
            let prefix: Vec<Sample> = samples.iter().copied().filter(|s| s.x <= threshold).collect();
            let outcome = fit(&prefix, FormKind::Bnsl, n, cfg).and_then(|r| {
                let pairs = probes
                    .iter()
                    .map(|s| Ok(PredictionPair::new(s.y, r.form.eval(s.x)?)))
                    .collect::<Result<Vec<_>>>()?;
                let params = match r.form {
                    crate::forms::FunctionalForm::Bnsl(p) => p,
                    _ => unreachable!("broken power law fit returns its own form"),
                };
                Ok((metrics::rmsle(&pairs)?, params))
            });
            let (rmsle, params, error) = match outcome {
                Ok((e, p)) => (Some(e), Some(p), None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            ThresholdResult {
                threshold,
                fit_points: prefix.len(),
                rmsle,
                params,
                error,
            }
        })
        .collect();

    let minimal_successful_t = per_threshold
        .iter()
        .find(|r| r.rmsle.is_some_and(|e| e <= spec.success_rmsle))
        .map(|r| r.threshold);
    Ok(SweepResult {
        per_threshold,
        minimal_successful_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(truth: BnslParams) -> SweepSpec {
        SweepSpec {
            truth,
            x_grid: logspace(1.0, 100.0, 9),
            fit_max_candidates: vec![5.0, 10.0, 50.0],
            test_range: TestRange {
                x_low: 200.0,
                x_high: 1000.0,
                count: 5,
            },
            success_rmsle: DEFAULT_SUCCESS_RMSLE,
        }
    }

    #[test]
    fn generate_trivial_power_law() {
        let s = generate_noiseless(&BnslParams::power_law(0.0, 1.0, 1.0), &[1.0, 10.0, 100.0]).unwrap();
        let t = s.train();
        assert_eq!(t.len(), 3);
        for (got, want) in t.iter().zip([1.0, 0.1, 0.01]) {
            assert!((got.y - want).abs() < 1e-15);
        }
        assert!(s.test().is_empty());
    }

    #[test]
    fn logspace_endpoints_exact() {
        let v = logspace(10.0, 2000.0, 7);
        assert_eq!(v[0], 10.0);
        assert_eq!(v[6], 2000.0);
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(logspace(3.0, 5.0, 1), vec![3.0]);
    }

    #[test]
    fn probes_must_lie_beyond_thresholds() {
        let mut s = spec(BnslParams::power_law(0.0, 1.0, 0.5));
        s.test_range.x_low = 40.0;
        assert!(matches!(s.validate(), Err(Error::Invariant(_))));
    }

    #[test]
    fn power_law_sweep_succeeds_everywhere() {
        let s = spec(BnslParams::power_law(0.0, 2.0, 0.5));
        let r = run_sweep(&s, &FitConfig::default()).unwrap();
        assert_eq!(r.per_threshold.len(), 3);
        for t in &r.per_threshold {
            assert!(t.rmsle.unwrap() <= 1e-8, "{t:?}");
        }
        assert_eq!(r.minimal_successful_t, Some(5.0));
    }

    #[test]
    fn too_few_points_recorded_not_fatal() {
        let truth = BnslParams::new(0.0, 1.0, 0.3, vec![crate::forms::Break::new(0.5, 20.0, 0.3)]).unwrap();
        let r = run_sweep(&spec(truth), &FitConfig::default()).unwrap();
        assert!(r.per_threshold[0]
            .error
            .as_deref()
            .unwrap()
            .contains("insufficient data"));
        assert!(r.per_threshold[2].rmsle.is_some());
    }

    #[test]
    fn success_rmsle_defaults_when_absent() {
        let text = r#"{"truth":{"a":0,"b":1,"c0":0.5,"breaks":[]},"xGrid":[1,2,3],
            "fitMaxCandidates":[3],"testRange":{"xLow":4,"xHigh":8,"count":2}}"#;
        let s: SweepSpec = serde_json::from_str(text).unwrap();
        assert_eq!(s.success_rmsle, DEFAULT_SUCCESS_RMSLE);
    }
}
