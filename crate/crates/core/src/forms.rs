//! Functional forms for scaling curves.
//!
//! The broken power law evaluates
//!
//! ```text
//! y = a + b * x^(-c0) * prod_i (1 + (x / d_i)^(1 / f_i))^(-c_i * f_i)
//! ```
//!
//! alongside the four baseline forms M1 to M4. Everything here is a pure
//! function of its inputs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent argument `(ln x - ln d) / f` above which `evaluate` switches to
/// the log-space path.
pub const LOG_PATH_THRESHOLD: f64 = 500.0;

/// Iteration cap for the safeguarded Newton solve of the M4 forward map.
pub const M4_MAX_ITERATIONS: usize = 200;

/// Relative margin kept between the M4 root bracket and `(eps_inf, eps0)`.
pub const M4_BRACKET_MARGIN: f64 = 1e-12;

/// Overflow-safe `ln(1 + e^u)`.
#[inline]
pub fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// One smooth transition between two power-law regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Break {
    /// Slope difference between the region before and after the break.
    pub c: f64,
    /// x-location of the break.
    pub d: f64,
    /// Sharpness; smaller is sharper.
    pub f: f64,
}

impl Break {
    pub fn new(c: f64, d: f64, f: f64) -> Self {
        Self { c, d, f }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnslParams {
    /// Asymptotic limit of the metric.
    pub a: f64,
    /// Offset on a log-log plot.
    pub b: f64,
    /// Slope of the first region on a log-log plot.
    pub c0: f64,
    #[serde(default)]
    pub breaks: Vec<Break>,
}

impl BnslParams {
    pub fn new(a: f64, b: f64, c0: f64, breaks: Vec<Break>) -> Result<Self> {
        let params = Self { a, b, c0, breaks };
        params.validate()?;
        Ok(params)
    }

    pub fn power_law(a: f64, b: f64, c0: f64) -> Self {
        Self {
            a,
            b,
            c0,
            breaks: Vec::new(),
        }
    }

    /// Number of breaks.
    pub fn n(&self) -> usize {
        self.breaks.len()
    }

    pub fn param_count(n: usize) -> usize {
        3 + 3 * n
    }

    pub fn validate(&self) -> Result<()> {
        if !self.a.is_finite() || !self.c0.is_finite() {
            return Err(Error::InvalidParams("a and c0 must be finite".into()));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::InvalidParams(format!("b must be positive, got {}", self.b)));
        }
        for (i, br) in self.breaks.iter().enumerate() {
            if !br.c.is_finite() {
                return Err(Error::InvalidParams(format!("c_{} is not finite", i + 1)));
            }
            if !(br.d > 0.0 && br.d.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "d_{} must be positive, got {}",
                    i + 1,
                    br.d
                )));
            }
            if !(br.f > 0.0 && br.f.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "f_{} must be positive, got {}",
                    i + 1,
                    br.f
                )));
            }
        }
        if self.breaks.windows(2).any(|w| w[0].d >= w[1].d) {
            return Err(Error::InvalidParams(
                "breaks must be sorted strictly ascending by d".into(),
            ));
        }
        Ok(())
    }

    /// Evaluates the curve at `x`.
    ///
    /// Uses the direct product unless some `(x/d_i)^(1/f_i)` would overflow
    /// (or the product leaves the normal range), in which case the value is
    /// rebuilt from [`BnslParams::eval_log`]. Does not check the ordering of
    /// breaks, which does not affect the value.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::Domain(format!("x must be positive and finite, got {x}")));
        }
        let z = x.ln();
        let needs_log = self.breaks.iter().any(|br| (z - br.d.ln()) / br.f > LOG_PATH_THRESHOLD);
        if !needs_log {
            let mut rest = self.b * x.powf(-self.c0);
            for br in &self.breaks {
                let t = (x / br.d).powf(1.0 / br.f);
                rest *= (1.0 + t).powf(-br.c * br.f);
            }
            if rest.is_finite() && rest >= f64::MIN_POSITIVE {
                return Ok(self.a + rest);
            }
        }
        let rest = self.eval_log(z).exp();
        if rest.is_infinite() {
            return Err(Error::Overflow("broken power law"));
        }
        Ok(self.a + rest)
    }

    /// `ln(y - a)` as a function of `z = ln x`.
    pub fn eval_log(&self, z: f64) -> f64 {
        let mut acc = self.b.ln() - self.c0 * z;
        for br in &self.breaks {
            acc -= br.c * br.f * softplus((z - br.d.ln()) / br.f);
        }
        acc
    }

    /// Splits the curve into its `n + 1` asymptotic power laws.
    pub fn decompose(&self) -> Vec<PowerLawSegment> {
        let mut segments = Vec::with_capacity(self.n() + 1);
        let mut coefficient = self.b;
        let mut exponent = -self.c0;
        let mut low = 0.0;
        for (k, br) in self.breaks.iter().enumerate() {
            segments.push(PowerLawSegment {
                index: k + 1,
                coefficient,
                exponent,
                domain_hint: DomainHint { low, high: Some(br.d) },
            });
            // continuity at d_k: coef_k * d^e_k == coef_{k+1} * d^(e_k - c_k)
            coefficient *= br.d.powf(br.c);
            exponent -= br.c;
            low = br.d;
        }
        segments.push(PowerLawSegment {
            index: self.n() + 1,
            coefficient,
            exponent,
            domain_hint: DomainHint { low, high: None },
        });
        segments
    }

    /// Flat layout `[a, b, c0, c1, d1, f1, c2, d2, f2, ...]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.a, self.b, self.c0];
        for br in &self.breaks {
            v.extend_from_slice(&[br.c, br.d, br.f]);
        }
        v
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() < 3 || !(values.len() - 3).is_multiple_of(3) {
            return Err(Error::InvalidParams(format!(
                "broken power law needs 3 + 3n values, got {}",
                values.len()
            )));
        }
        let breaks = values[3..]
            .chunks_exact(3)
            .map(|c| Break::new(c[0], c[1], c[2]))
            .collect();
        Ok(Self {
            a: values[0],
            b: values[1],
            c0: values[2],
            breaks,
        })
    }

    /// Sorts breaks ascending by location.
    pub fn sort_breaks(&mut self) {
        self.breaks.sort_by(|l, r| l.d.total_cmp(&r.d));
    }
}

/// Region over which a segment approximates the full curve. `high = None`
/// means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainHint {
    pub low: f64,
    pub high: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PowerLawSegment {
    pub index: usize,
    pub coefficient: f64,
    pub exponent: f64,
    pub domain_hint: DomainHint,
}

impl PowerLawSegment {
    pub fn eval(&self, x: f64) -> f64 {
        (self.coefficient.ln() + self.exponent * x.ln()).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormKind {
    M1,
    M2,
    M3,
    M4,
    Bnsl,
}

impl FormKind {
    /// All kinds, simplest first.
    pub const ALL: [FormKind; 5] = [FormKind::M1, FormKind::M2, FormKind::M3, FormKind::M4, FormKind::Bnsl];

    /// Parameter count; `breaks` only matters for the broken power law.
    pub fn param_count(self, breaks: usize) -> usize {
        match self {
            FormKind::M1 => 2,
            FormKind::M2 => 3,
            FormKind::M3 => 4,
            FormKind::M4 => 5,
            FormKind::Bnsl => BnslParams::param_count(breaks),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FormKind::M1 => "M1",
            FormKind::M2 => "M2",
            FormKind::M3 => "M3",
            FormKind::M4 => "M4",
            FormKind::Bnsl => "BNSL",
        }
    }
}

impl fmt::Display for FormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m1" => Ok(FormKind::M1),
            "m2" => Ok(FormKind::M2),
            "m3" => Ok(FormKind::M3),
            "m4" => Ok(FormKind::M4),
            "bnsl" => Ok(FormKind::Bnsl),
            other => Err(Error::InvalidParams(format!("unknown form '{other}'"))),
        }
    }
}

/// A functional form together with its parameters.
///
/// - M1: `y = a x^b`
/// - M2: `y = a x^b + c`
/// - M3: `y = a (1/x + d)^(-b) + c`, valid for `b < 0`, `d > 0`
/// - M4: `x = ((y - eps_inf) / (b (eps0 - y)^a))^(1/c)`, solved for `y`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FunctionalForm {
    M1 {
        a: f64,
        b: f64,
    },
    M2 {
        a: f64,
        b: f64,
        c: f64,
    },
    M3 {
        a: f64,
        b: f64,
        c: f64,
        d: f64,
    },
    M4 {
        a: f64,
        b: f64,
        c: f64,
        eps0: f64,
        #[serde(rename = "epsInf")]
        eps_inf: f64,
    },
    Bnsl(BnslParams),
}

impl FunctionalForm {
    pub fn kind(&self) -> FormKind {
        match self {
            FunctionalForm::M1 { .. } => FormKind::M1,
            FunctionalForm::M2 { .. } => FormKind::M2,
            FunctionalForm::M3 { .. } => FormKind::M3,
            FunctionalForm::M4 { .. } => FormKind::M4,
            FunctionalForm::Bnsl(_) => FormKind::Bnsl,
        }
    }

    pub fn breaks(&self) -> usize {
        match self {
            FunctionalForm::Bnsl(p) => p.n(),
            _ => 0,
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        match *self {
            FunctionalForm::M1 { a, b } => vec![a, b],
            FunctionalForm::M2 { a, b, c } => vec![a, b, c],
            FunctionalForm::M3 { a, b, c, d } => vec![a, b, c, d],
            FunctionalForm::M4 { a, b, c, eps0, eps_inf } => vec![a, b, c, eps0, eps_inf],
            FunctionalForm::Bnsl(ref p) => p.to_vec(),
        }
    }

    /// Rebuilds a form from its flat parameter layout (see [`FunctionalForm::to_vec`]).
    pub fn from_slice(kind: FormKind, v: &[f64]) -> Result<Self> {
        let expect = |n: usize| -> Result<()> {
            if v.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!(
                    "{kind} needs {n} parameters, got {}",
                    v.len()
                )))
            }
        };
        Ok(match kind {
            FormKind::M1 => {
                expect(2)?;
                FunctionalForm::M1 { a: v[0], b: v[1] }
            }
            FormKind::M2 => {
                expect(3)?;
                FunctionalForm::M2 {
                    a: v[0],
                    b: v[1],
                    c: v[2],
                }
            }
            FormKind::M3 => {
                expect(4)?;
                FunctionalForm::M3 {
                    a: v[0],
                    b: v[1],
                    c: v[2],
                    d: v[3],
                }
            }
            FormKind::M4 => {
                expect(5)?;
                FunctionalForm::M4 {
                    a: v[0],
                    b: v[1],
                    c: v[2],
                    eps0: v[3],
                    eps_inf: v[4],
                }
            }
            FormKind::Bnsl => FunctionalForm::Bnsl(BnslParams::from_slice(v)?),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.to_vec().iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParams("parameters must be finite".into()));
        }
        match *self {
            FunctionalForm::M1 { .. } | FunctionalForm::M2 { .. } => Ok(()),
            FunctionalForm::M3 { b, d, .. } => {
                if b < 0.0 && d > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParams(format!(
                        "M3 requires b < 0 and d > 0, got b = {b}, d = {d}"
                    )))
                }
            }
            FunctionalForm::M4 { a, b, c, eps0, eps_inf } => {
                if eps_inf < eps0 && b > 0.0 && c != 0.0 && a >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParams(
                        "M4 requires eps_inf < eps0, b > 0, c != 0 and a >= 0".into(),
                    ))
                }
            }
            FunctionalForm::Bnsl(ref p) => p.validate(),
        }
    }

    /// Evaluates the form at `x`. M4 is solved numerically through its inverse.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::Domain(format!("x must be positive and finite, got {x}")));
        }
        match *self {
            FunctionalForm::M1 { a, b } => Ok(a * x.powf(b)),
            FunctionalForm::M2 { a, b, c } => Ok(a * x.powf(b) + c),
            FunctionalForm::M3 { a, b, c, d } => {
                self.validate()?;
                Ok(a * (x.recip() + d).powf(-b) + c)
            }
            FunctionalForm::M4 { .. } => {
                self.validate()?;
                m4_forward(self, x)
            }
            FunctionalForm::Bnsl(ref p) => p.eval(x),
        }
    }
}

/// `ln g(y)` for M4; monotone in `y` on `(eps_inf, eps0)` when `a >= 0`.
fn m4_log_inverse(a: f64, b: f64, c: f64, eps0: f64, eps_inf: f64, y: f64) -> f64 {
    ((y - eps_inf).ln() - b.ln() - a * (eps0 - y).ln()) / c
}

fn m4_forward(form: &FunctionalForm, x: f64) -> Result<f64> {
    let FunctionalForm::M4 { a, b, c, eps0, eps_inf } = *form else {
        unreachable!("m4_forward called with a non-M4 form");
    };
    let target = x.ln();
    let h = |y: f64| m4_log_inverse(a, b, c, eps0, eps_inf, y);

    let margin = M4_BRACKET_MARGIN * (eps0 - eps_inf);
    let (mut lo, mut hi) = (eps_inf + margin, eps0 - margin);
    let (h_lo, h_hi) = (h(lo), h(hi));
    let (min, max) = (h_lo.min(h_hi), h_lo.max(h_hi));
    if !(target >= min && target <= max) {
        return Err(Error::NoSolution {
            x,
            low: min.exp(),
            high: max.exp(),
        });
    }

    // safeguarded Newton on F(y) = c ln g(y) - c ln x, which increases in y
    let f = |y: f64| (y - eps_inf).ln() - b.ln() - a * (eps0 - y).ln() - c * target;
    let df = |y: f64| 1.0 / (y - eps_inf) + a / (eps0 - y);
    let mut y = 0.5 * (lo + hi);
    let mut dx_old = hi - lo;
    let mut dx = dx_old;
    for _ in 0..M4_MAX_ITERATIONS {
        let (fy, dfy) = (f(y), df(y));
        if fy == 0.0 {
            return Ok(y);
        }
        if fy < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let newton = y - fy / dfy;
        let prev = y;
        if newton > lo && newton < hi && (2.0 * fy).abs() <= (dx_old * dfy).abs() {
            dx_old = dx;
            dx = newton - y;
            y = newton;
        } else {
            dx_old = dx;
            dx = 0.5 * (hi - lo);
            y = lo + dx;
            if y <= lo || y >= hi {
                return Ok(prev);
            }
        }
        if (y - prev).abs() <= 2.0 * f64::EPSILON * y.abs() {
            return Ok(y);
        }
    }
    Ok(y)
}

/// Closed-form inverse of M4: `x = g(y)`.
pub fn eval_m4_inverse(form: &FunctionalForm, y: f64) -> Result<f64> {
    let FunctionalForm::M4 { a, b, c, eps0, eps_inf } = *form else {
        return Err(Error::InvalidParams(format!(
            "inverse is only defined for M4, got {}",
            form.kind()
        )));
    };
    form.validate()?;
    if !(y > eps_inf && y < eps0) {
        return Err(Error::Domain(format!("y = {y} lies outside ({eps_inf}, {eps0})")));
    }
    Ok(((y - eps_inf) / (b * (eps0 - y).powf(a))).powf(c.recip()))
}

/// Value with first and second derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derivatives {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

/// Closed-form `(f, f', f'')` for M1, M2 and M3.
pub fn derivatives(form: &FunctionalForm, x: f64) -> Result<Derivatives> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("x must be positive and finite, got {x}")));
    }
    match *form {
        FunctionalForm::M1 { a, b } | FunctionalForm::M2 { a, b, .. } => Ok(Derivatives {
            value: form.eval(x)?,
            first: a * b * x.powf(b - 1.0),
            second: a * b * (b - 1.0) * x.powf(b - 2.0),
        }),
        FunctionalForm::M3 { a, b, d, .. } => {
            form.validate()?;
            Ok(Derivatives {
                value: form.eval(x)?,
                first: a * b / (x * (1.0 + d * x) * (d + x.recip()).powf(b)),
                second: a * b * x.powf(b - 2.0) * (1.0 + d * x).powf(-2.0 - b) * (b - 1.0 - 2.0 * d * x),
            })
        }
        _ => Err(Error::InvalidParams(format!(
            "closed-form derivatives exist only for M1, M2 and M3, got {}",
            form.kind()
        ))),
    }
}
