//! Standalone SVG plots of a series and, optionally, a fitted curve.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::FunctionalForm;
use crate::series::{SeriesPoint, Split};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct PlotSpec {
    pub log_x: bool,
    pub log_y: bool,
    pub width: u32,
    pub height: u32,
    pub samples_per_decade: usize,
}

impl Default for PlotSpec {
    fn default() -> Self {
        Self {
            log_x: true,
            log_y: true,
            width: 640,
            height: 480,
            samples_per_decade: 50,
        }
    }
}

impl PlotSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParams("plot dimensions must be positive".into()));
        }
        if self.samples_per_decade < 2 {
            return Err(Error::InvalidParams("samplesPerDecade must be at least 2".into()));
        }
        Ok(())
    }
}

const MARGIN: f64 = 60.0;

struct Axis {
    log: bool,
    lo: f64,
    hi: f64,
    pixel_lo: f64,
    pixel_hi: f64,
}

impl Axis {
    fn new(log: bool, values: impl Iterator<Item = f64>, pixel_lo: f64, pixel_hi: f64) -> Option<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            if let Some(t) = transform(log, v) {
                lo = lo.min(t);
                hi = hi.max(t);
            }
        }
        if !lo.is_finite() {
            return None;
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Some(Self {
            log,
            lo: lo - pad,
            hi: hi + pad,
            pixel_lo,
            pixel_hi,
        })
    }

    fn pixel(&self, v: f64) -> Option<f64> {
        let t = transform(self.log, v)?;
        Some(self.pixel_lo + (t - self.lo) / (self.hi - self.lo) * (self.pixel_hi - self.pixel_lo))
    }

    /// Tick positions in data units: decades on log axes, five even steps otherwise.
    fn ticks(&self) -> Vec<f64> {
        if self.log {
            (self.lo.ceil() as i32..=self.hi.floor() as i32)
                .map(|e| 10f64.powi(e))
                .collect()
        } else {
            (0..=4)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / 4.0)
                .collect()
        }
    }
}

fn transform(log: bool, v: f64) -> Option<f64> {
    if !v.is_finite() {
        return None;
    }
    if log {
        (v > 0.0).then(|| v.log10())
    } else {
        Some(v)
    }
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        format!("1e{}", v.log10().round() as i32)
    } else {
        format!("{v:.3}")
    }
}

/// Curve abscissae spanning the data range at the requested density.
fn curve_xs(spec: &PlotSpec, points: &[SeriesPoint]) -> Vec<f64> {
    let lo = points.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let decades = (hi / lo).log10().max(1.0);
    let count = ((decades * spec.samples_per_decade as f64).ceil() as usize).max(2);
    (0..count)
        .map(|i| {
            let t = i as f64 / (count - 1) as f64;
            if spec.log_x {
                lo * (hi / lo).powf(t)
            } else {
                lo + (hi - lo) * t
            }
        })
        .collect()
}

/// Renders `points` (train in black, test in green) and the optional fitted
/// curve on the axes described by `spec`.
pub fn render_svg(spec: &PlotSpec, points: &[SeriesPoint], fit: Option<&FunctionalForm>) -> Result<String> {
    spec.validate()?;
    if points.is_empty() {
        return Err(Error::InsufficientData {
            needed: 1,
            available: 0,
        });
    }
    let curve: Vec<(f64, f64)> = match fit {
        Some(form) => curve_xs(spec, points)
            .into_iter()
            .filter_map(|x| form.eval(x).ok().map(|y| (x, y)))
            .collect(),
        None => Vec::new(),
    };
    let (w, h) = (f64::from(spec.width), f64::from(spec.height));
    let x_axis = Axis::new(spec.log_x, points.iter().map(|p| p.x), MARGIN, w - MARGIN / 2.0)
        .ok_or_else(|| Error::Domain("no plottable x values".into()))?;
    let y_axis = Axis::new(
        spec.log_y,
        points.iter().map(|p| p.y).chain(curve.iter().map(|c| c.1)),
        h - MARGIN,
        MARGIN / 2.0,
    )
    .ok_or_else(|| Error::Domain("no plottable y values".into()))?;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        spec.width, spec.height, spec.width, spec.height
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (left, right, top, bottom) = (x_axis.pixel_lo, x_axis.pixel_hi, y_axis.pixel_hi, y_axis.pixel_lo);
    let _ = writeln!(
        svg,
        r#"<rect x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    for t in x_axis.ticks() {
        if let Some(px) = x_axis.pixel(t) {
            let _ = writeln!(
                svg,
                r#"<line x1="{px:.2}" y1="{bottom:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
                bottom + 5.0,
                bottom + 18.0,
                tick_label(t, spec.log_x)
            );
        }
    }
    for t in y_axis.ticks() {
        if let Some(py) = y_axis.pixel(t) {
            let _ = writeln!(
                svg,
                r#"<line x1="{:.2}" y1="{py:.2}" x2="{left:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
                left - 5.0,
                left - 8.0,
                py + 4.0,
                tick_label(t, spec.log_y)
            );
        }
    }

    let mut segment: Vec<String> = Vec::new();
    let flush = |segment: &mut Vec<String>, svg: &mut String| {
        if segment.len() >= 2 {
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="red" stroke-width="1.5" points="{}"/>"#,
                segment.join(" ")
            );
        }
        segment.clear();
    };
    for &(x, y) in &curve {
        match (x_axis.pixel(x), y_axis.pixel(y)) {
            (Some(px), Some(py)) => segment.push(format!("{px:.2},{py:.2}")),
            _ => flush(&mut segment, &mut svg),
        }
    }
    flush(&mut segment, &mut svg);

    for p in points {
        if let (Some(px), Some(py)) = (x_axis.pixel(p.x), y_axis.pixel(p.y)) {
            let color = match p.split {
                Split::Train => "black",
                Split::Test => "green",
            };
            let _ = writeln!(svg, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{color}"/>"#);
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points() -> Vec<SeriesPoint> {
        [
            (1.0, 1.0, Split::Train),
            (10.0, 0.3, Split::Train),
            (100.0, 0.1, Split::Test),
        ]
        .into_iter()
        .map(|(x, y, split)| SeriesPoint { x, y, split })
        .collect()
    }

    #[test]
    fn renders_points_and_curve() {
        let form = FunctionalForm::M1 { a: 1.0, b: -0.5 };
        let svg = render_svg(&PlotSpec::default(), &points(), Some(&form)).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches("fill=\"green\"").count(), 1);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains(">1e1<"));
    }

    #[test]
    fn curve_density_follows_spec() {
        let spec = PlotSpec::default();
        assert_eq!(curve_xs(&spec, &points()).len(), 100);
    }

    #[test]
    fn empty_data_is_an_error() {
        assert!(matches!(
            render_svg(&PlotSpec::default(), &[], None),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn invalid_spec() {
        let spec = PlotSpec {
            samples_per_decade: 1,
            ..PlotSpec::default()
        };
        assert!(spec.validate().is_err());
    }
}
