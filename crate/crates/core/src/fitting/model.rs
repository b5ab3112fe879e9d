//! Per-form plumbing shared by grid search and refinement: parameter
//! encodings, bounds, predictions and the stable-MSLE residuals.

use crate::error::{Error, Result};
use crate::forms::{BnslParams, FormKind, FunctionalForm};
use crate::series::Sample;

use super::config::FitConfig;

/// How a parameter is represented in the optimiser's coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Codec {
    Identity,
    /// `u = ln(theta)` for strictly positive parameters.
    Log,
    /// `u = ln(theta - theta[base])`, keeping `theta > theta[base]`.
    GapLog {
        base: usize,
    },
}

/// Lower bound used for log-coded parameters at zero.
const LOG_FLOOR: f64 = -700.0;

#[derive(Debug, Clone)]
pub(crate) struct Model {
    pub kind: FormKind,
    pub n: usize,
    pub codecs: Vec<Codec>,
    /// Bounds in encoded coordinates.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Model {
    pub fn new(kind: FormKind, n: usize, cfg: &FitConfig) -> Self {
        use Codec::*;
        let asym_low = if cfg.bounds.allow_negative_asymptote {
            f64::NEG_INFINITY
        } else {
            0.0
        };
        let inf = f64::INFINITY;
        let (codecs, lower, upper): (Vec<Codec>, Vec<f64>, Vec<f64>) = match kind {
            FormKind::M1 => (vec![Log, Identity], vec![LOG_FLOOR, -inf], vec![inf, inf]),
            FormKind::M2 => (
                vec![Identity, Identity, Identity],
                vec![-inf, -inf, asym_low],
                vec![inf, inf, inf],
            ),
            FormKind::M3 => (
                vec![Identity, Identity, Identity, Log],
                vec![-inf, -inf, asym_low, LOG_FLOOR],
                vec![inf, -1e-12, inf, inf],
            ),
            FormKind::M4 => (
                vec![Identity, Log, Identity, GapLog { base: 4 }, Identity],
                vec![0.0, LOG_FLOOR, -inf, LOG_FLOOR, asym_low],
                vec![inf, inf, inf, inf, inf],
            ),
            FormKind::Bnsl => {
                let mut codecs = vec![Identity, Log, Identity];
                let mut lower = vec![asym_low, LOG_FLOOR, -inf];
                let mut upper = vec![inf, inf, inf];
                for _ in 0..n {
                    codecs.extend([Identity, Log, Log]);
                    lower.extend([-inf, LOG_FLOOR, cfg.bounds.min_sharpness.ln()]);
                    upper.extend([inf, inf, cfg.bounds.max_sharpness.ln()]);
                }
                (codecs, lower, upper)
            }
        };
        Self {
            kind,
            n: if kind == FormKind::Bnsl { n } else { 0 },
            codecs,
            lower,
            upper,
        }
    }

    pub fn param_count(&self) -> usize {
        self.codecs.len()
    }

    pub fn encode(&self, theta: &[f64]) -> Vec<f64> {
        let mut u: Vec<f64> = self
            .codecs
            .iter()
            .zip(theta)
            .map(|(codec, &t)| match *codec {
                Codec::Identity => t,
                Codec::Log => t.max(0.0).ln(),
                Codec::GapLog { base } => (t - theta[base]).max(0.0).ln(),
            })
            .collect();
        self.project(&mut u);
        u
    }

    pub fn decode(&self, u: &[f64]) -> Vec<f64> {
        let mut theta: Vec<f64> = self
            .codecs
            .iter()
            .zip(u)
            .map(|(codec, &v)| match codec {
                Codec::Identity => v,
                Codec::Log | Codec::GapLog { .. } => v.exp(),
            })
            .collect();
        for (i, codec) in self.codecs.iter().enumerate() {
            if let Codec::GapLog { base } = *codec {
                theta[i] += theta[base];
            }
        }
        theta
    }

    pub fn project(&self, u: &mut [f64]) {
        for ((v, &lo), &hi) in u.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(lo, hi);
        }
    }

    pub fn form(&self, theta: &[f64]) -> Result<FunctionalForm> {
        FunctionalForm::from_slice(self.kind, theta)
    }

    /// Predictions for every sample; `None` if any is undefined.
    pub fn predict(&self, theta: &[f64], samples: &[Sample], out: &mut [f64]) -> Option<()> {
        match self.kind {
            FormKind::Bnsl => {
                let params = BnslParams::from_slice(theta).ok()?;
                for (o, s) in out.iter_mut().zip(samples) {
                    *o = params.eval(s.x).ok()?;
                }
            }
            _ => {
                let form = self.form(theta).ok()?;
                form.validate().ok()?;
                for (o, s) in out.iter_mut().zip(samples) {
                    *o = form.eval(s.x).ok()?;
                }
            }
        }
        out.iter().all(|v| v.is_finite()).then_some(())
    }

    /// Stable-MSLE residuals `ln(1 + y) - ln(1 + yhat)`.
    pub fn residuals(&self, theta: &[f64], samples: &[Sample], out: &mut [f64]) -> Option<()> {
        self.predict(theta, samples, out)?;
        for (r, s) in out.iter_mut().zip(samples) {
            if !(*r > -1.0) {
                return None;
            }
            *r = s.y.ln_1p() - r.ln_1p();
        }
        Some(())
    }

    /// Mean squared residual, `+inf` where undefined.
    pub fn loss(&self, theta: &[f64], samples: &[Sample]) -> f64 {
        let mut buf = vec![0.0; samples.len()];
        match self.residuals(theta, samples, &mut buf) {
            Some(()) => buf.iter().map(|r| r * r).sum::<f64>() / samples.len() as f64,
            None => f64::INFINITY,
        }
    }

    /// Index of the parameter fixed by [`Model::anchor_scale`].
    pub fn scale_index(&self) -> usize {
        match self.kind {
            FormKind::M1 | FormKind::M2 | FormKind::M3 => 0,
            FormKind::M4 | FormKind::Bnsl => 1,
        }
    }

    /// Log-least-squares value of the scale parameter given all others.
    /// Points where the log transform is undefined are skipped; `None` if
    /// none remain.
    pub fn anchor_scale(&self, theta: &[f64], samples: &[Sample]) -> Option<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut push = |v: f64| {
            if v.is_finite() {
                sum += v;
                count += 1;
            }
        };
        match self.kind {
            FormKind::M1 => {
                let b = theta[1];
                for s in samples {
                    push(s.y.ln() - b * s.x.ln());
                }
            }
            FormKind::M2 => {
                let (b, c) = (theta[1], theta[2]);
                for s in samples {
                    if s.y > c {
                        push((s.y - c).ln() - b * s.x.ln());
                    }
                }
            }
            FormKind::M3 => {
                let (b, c, d) = (theta[1], theta[2], theta[3]);
                for s in samples {
                    if s.y > c {
                        push((s.y - c).ln() + b * (s.x.recip() + d).ln());
                    }
                }
            }
            FormKind::M4 => {
                let (a, c, eps0, eps_inf) = (theta[0], theta[2], theta[3], theta[4]);
                for s in samples {
                    if s.y > eps_inf && s.y < eps0 {
                        push((s.y - eps_inf).ln() - a * (eps0 - s.y).ln() - c * s.x.ln());
                    }
                }
            }
            FormKind::Bnsl => {
                let mut unit = BnslParams::from_slice(theta).ok()?;
                unit.b = 1.0;
                for s in samples {
                    if s.y > unit.a {
                        push((s.y - unit.a).ln() - unit.eval_log(s.x.ln()));
                    }
                }
            }
        }
        (count > 0).then(|| (sum / count as f64).exp())
    }
}

pub(crate) fn require_points(samples: &[Sample], needed: usize) -> Result<()> {
    if samples.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            available: samples.len(),
        });
    }
    Ok(())
}

pub(crate) fn require_sorted(samples: &[Sample]) -> Result<()> {
    if samples.iter().any(|s| !(s.x > 0.0 && s.x.is_finite())) {
        return Err(Error::Domain("fit points need positive finite x".into()));
    }
    if samples.iter().any(|s| !(s.y > -1.0 && s.y.is_finite())) {
        return Err(Error::Domain("fit points need finite y above -1".into()));
    }
    if samples.windows(2).any(|w| w[1].x < w[0].x) {
        return Err(Error::Invariant("fit points must be sorted ascending by x".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codec_round_trip() {
        let cfg = FitConfig::default();
        let model = Model::new(FormKind::M4, 0, &cfg);
        let theta = [1.5, 0.7, -2.0, 0.8, 0.1];
        let back = model.decode(&model.encode(&theta));
        for (a, b) in theta.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
        let model = Model::new(FormKind::Bnsl, 2, &cfg);
        let theta = [0.01, 2.0, 0.3, 0.5, 10.0, 0.2, -0.4, 1000.0, 1.5];
        let back = model.decode(&model.encode(&theta));
        for (a, b) in theta.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn encode_clamps_into_bounds() {
        let cfg = FitConfig::default();
        let model = Model::new(FormKind::Bnsl, 1, &cfg);
        let theta = model.decode(&model.encode(&[-1.0, 0.0, 0.3, 0.5, 10.0, 50.0]));
        assert_eq!(theta[0], 0.0);
        assert!(theta[1] > 0.0);
        assert!((theta[5] - cfg.bounds.max_sharpness).abs() < 1e-12);
    }

    #[test]
    fn anchored_scale_is_exact_on_power_law() {
        let cfg = FitConfig::default();
        let samples: Vec<Sample> = (1..10)
            .map(|i| Sample::new(i as f64, 3.0 * (i as f64).powf(-0.7)))
            .collect();
        let model = Model::new(FormKind::Bnsl, 0, &cfg);
        let b = model.anchor_scale(&[0.0, 1.0, 0.7], &samples).unwrap();
        assert!((b - 3.0).abs() < 1e-12);
        let model = Model::new(FormKind::M1, 0, &cfg);
        let a = model.anchor_scale(&[1.0, -0.7], &samples).unwrap();
        assert!((a - 3.0).abs() < 1e-12);
    }
}
