//! Scaling-curve data and the `x,y,split` CSV format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("split must be 'train' or 'test', got '{other}'")),
        }
    }
}

/// An `(x, y)` observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: f64,
    pub y: f64,
}

impl Sample {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub x: f64,
    pub y: f64,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DataSeries {
    pub task_name: String,
    pub domain_tag: String,
    pub points: Vec<SeriesPoint>,
}

impl DataSeries {
    pub fn new(task_name: impl Into<String>, domain_tag: impl Into<String>, points: Vec<SeriesPoint>) -> Self {
        Self {
            task_name: task_name.into(),
            domain_tag: domain_tag.into(),
            points,
        }
    }

    /// Train-only series from samples, e.g. for simulated data.
    pub fn from_train(task_name: impl Into<String>, samples: &[Sample]) -> Self {
        let points = samples
            .iter()
            .map(|s| SeriesPoint {
                x: s.x,
                y: s.y,
                split: Split::Train,
            })
            .collect();
        Self::new(task_name, "other", points)
    }

    pub fn train(&self) -> Vec<Sample> {
        self.split(Split::Train)
    }

    pub fn test(&self) -> Vec<Sample> {
        self.split(Split::Test)
    }

    fn split(&self, which: Split) -> Vec<Sample> {
        self.points
            .iter()
            .filter(|p| p.split == which)
            .map(|p| Sample::new(p.x, p.y))
            .collect()
    }

    /// Checks that every value is positive and finite and that points are
    /// sorted by `x`; no requirement on the split.
    pub fn validate_values(&self) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            if !(p.x > 0.0 && p.x.is_finite()) {
                return Err(Error::Invariant(format!("point {i}: x must be positive, got {}", p.x)));
            }
            if !(p.y > 0.0 && p.y.is_finite()) {
                return Err(Error::Invariant(format!("point {i}: y must be positive, got {}", p.y)));
            }
        }
        if self.points.windows(2).any(|w| w[1].x < w[0].x) {
            return Err(Error::Invariant("points must be sorted ascending by x".into()));
        }
        Ok(())
    }

    /// Checks the extrapolation contract: [`DataSeries::validate_values`],
    /// every test `x` at or beyond every train `x`, at least two train
    /// points and one test point.
    pub fn validate(&self) -> Result<()> {
        self.validate_values()?;
        let max_train = self
            .points
            .iter()
            .filter(|p| p.split == Split::Train)
            .map(|p| p.x)
            .fold(f64::NEG_INFINITY, f64::max);
        if let Some(p) = self.points.iter().find(|p| p.split == Split::Test && p.x < max_train) {
            return Err(Error::Invariant(format!(
                "test point x = {} lies below the largest train x = {max_train}",
                p.x
            )));
        }
        let n_train = self.points.iter().filter(|p| p.split == Split::Train).count();
        if n_train < 2 {
            return Err(Error::Invariant(format!(
                "at least 2 train points required, got {n_train}"
            )));
        }
        if n_train == self.points.len() {
            return Err(Error::Invariant("at least 1 test point required".into()));
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,split\n");
        for p in &self.points {
            out.push_str(&format!("{:e},{:e},{}\n", p.x, p.y, p.split));
        }
        out
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    x: f64,
    y: f64,
    split: String,
}

/// Parses series CSV text and validates it with [`DataSeries::validate`].
/// Comment lines start with `#`.
pub fn parse_series(text: &str, task_name: &str, domain_tag: &str) -> Result<DataSeries> {
    let series = parse_points(text, task_name, domain_tag)?;
    series.validate()?;
    Ok(series)
}

/// Parses series CSV text without checking values or splits.
pub fn parse_points(text: &str, task_name: &str, domain_tag: &str) -> Result<DataSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != ["x", "y", "split"] {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header 'x,y,split', got '{}'", names.join(",")),
        });
    }
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row: Row = record.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let split = row
            .split
            .parse::<Split>()
            .map_err(|message| Error::Parse { line, message })?;
        points.push(SeriesPoint {
            x: row.x,
            y: row.y,
            split,
        });
    }
    Ok(DataSeries::new(task_name, domain_tag, points))
}

/// Loads and validates a series CSV; the task name defaults to the file stem.
pub fn load_series(path: impl AsRef<Path>) -> Result<DataSeries> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_series(&text, &name, "other")
}
