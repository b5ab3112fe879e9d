//! Extrapolation benchmark: fit every form on the train split of a task,
//! score it on the held-out split, and tabulate the winners.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{fit, select_break_count, BreakSelection, FitConfig, FitResult};
use crate::forms::{FormKind, FunctionalForm};
use crate::metrics::{self, PredictionPair};
use crate::series::{self, DataSeries, Sample};

pub const DEFAULT_MAX_BREAKS: usize = 3;

/// rmsle values this close count as a tie, won by the simpler form.
pub const WINNER_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FormEntry {
    pub rmsle: f64,
    pub root_standard_log_error: f64,
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExtrapolationReport {
    pub task_name: String,
    pub domain_tag: String,
    pub train_points: usize,
    pub test_points: usize,
    pub per_form: BTreeMap<FormKind, FormEntry>,
    /// Forms whose fit failed, with the reason.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub failures: BTreeMap<FormKind, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub break_selection: Option<BreakSelection>,
    pub winner: Option<FormKind>,
}

impl ExtrapolationReport {
    pub fn rmsle(&self, kind: FormKind) -> Option<f64> {
        self.per_form.get(&kind).map(|e| e.rmsle)
    }
}

/// Form with the lowest rmsle; near-ties go to the earlier entry of
/// [`FormKind::ALL`].
pub fn pick_winner(per_form: &BTreeMap<FormKind, FormEntry>) -> Option<FormKind> {
    let mut best: Option<(FormKind, f64)> = None;
    for (&kind, entry) in per_form {
        if !entry.rmsle.is_finite() {
            continue;
        }
        if best.is_none_or(|(_, r)| entry.rmsle < r - WINNER_TIE_TOLERANCE) {
            best = Some((kind, entry.rmsle));
        }
    }
    best.map(|(k, _)| k)
}

/// Number of largest-x train points held out when choosing the break count.
pub fn holdout_count(train_points: usize) -> usize {
    (train_points / 10).max(2)
}

fn fit_bnsl(train: &[Sample], cfg: &FitConfig, max_n: usize) -> Result<(FitResult, Option<BreakSelection>)> {
    let holdout = holdout_count(train.len());
    let usable = train.len().saturating_sub(holdout);
    // largest break count the fit part can support
    let mut cap = max_n;
    while cap > 0 && FormKind::Bnsl.param_count(cap) > usable {
        cap -= 1;
    }
    if FormKind::Bnsl.param_count(cap) > usable {
        return Ok((fit(train, FormKind::Bnsl, 0, cfg)?, None));
    }
    let selection = select_break_count(train, cap, holdout, cfg)?;
    let result = fit(train, FormKind::Bnsl, selection.best, cfg)?;
    Ok((result, Some(selection)))
}

fn score(form: &FunctionalForm, test: &[Sample]) -> Result<(f64, f64)> {
    let pairs = test
        .iter()
        .map(|s| Ok(PredictionPair::new(s.y, form.eval(s.x)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok((metrics::rmsle(&pairs)?, metrics::root_standard_log_error(&pairs)?))
}

/// Fits each requested form on the train split and scores it on the test
/// split. The broken power law picks its break count (up to `max_n`) on the
/// train split alone. Per-form failures are recorded, not returned.
pub fn evaluate_task(
    series: &DataSeries,
    forms: &[FormKind],
    cfg: &FitConfig,
    max_n: usize,
) -> Result<ExtrapolationReport> {
    series.validate()?;
    cfg.validate()?;
    let train = series.train();
    let test = series.test();
    let mut kinds = forms.to_vec();
    kinds.sort();
    kinds.dedup();

    let mut per_form = BTreeMap::new();
    let mut failures = BTreeMap::new();
    let mut break_selection = None;
    for kind in kinds {
        let fitted = if kind == FormKind::Bnsl {
            fit_bnsl(&train, cfg, max_n).map(|(r, sel)| {
                break_selection = sel;
                r
            })
        } else {
            fit(&train, kind, 0, cfg)
        };
        match fitted.and_then(|r| score(&r.form, &test).map(|s| (r, s))) {
            Ok((fit, (rmsle, rsle))) => {
                per_form.insert(
                    kind,
                    FormEntry {
                        rmsle,
                        root_standard_log_error: rsle,
                        fit,
                    },
                );
            }
            Err(e) => {
                failures.insert(kind, e.to_string());
            }
        }
    }
    let winner = pick_winner(&per_form);
    Ok(ExtrapolationReport {
        task_name: series.task_name.clone(),
        domain_tag: series.domain_tag.clone(),
        train_points: train.len(),
        test_points: test.len(),
        per_form,
        failures,
        break_selection,
        winner,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SummaryRow {
    pub domain: String,
    pub tasks: usize,
    /// Percentage of the row's tasks won by each form.
    pub percentages: BTreeMap<FormKind, f64>,
    /// Tasks where every form failed.
    pub no_winner: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Summary {
    /// One row per domain tag in sorted order, then an "All" row.
    pub rows: Vec<SummaryRow>,
}

fn summary_row(domain: &str, reports: &[&ExtrapolationReport]) -> SummaryRow {
    let total = reports.len();
    let mut percentages = BTreeMap::new();
    for kind in FormKind::ALL {
        let wins = reports.iter().filter(|r| r.winner == Some(kind)).count();
        percentages.insert(kind, 100.0 * wins as f64 / total as f64);
    }
    SummaryRow {
        domain: domain.to_string(),
        tasks: total,
        percentages,
        no_winner: reports.iter().filter(|r| r.winner.is_none()).count(),
    }
}

pub fn summarize(reports: &[ExtrapolationReport]) -> Result<Summary> {
    if reports.is_empty() {
        return Err(Error::InvalidParams("cannot summarise zero reports".into()));
    }
    let mut by_domain: BTreeMap<&str, Vec<&ExtrapolationReport>> = BTreeMap::new();
    for r in reports {
        by_domain.entry(r.domain_tag.as_str()).or_default().push(r);
    }
    let mut rows: Vec<SummaryRow> = by_domain.iter().map(|(d, rs)| summary_row(d, rs)).collect();
    let all: Vec<&ExtrapolationReport> = reports.iter().collect();
    rows.push(summary_row("All", &all));
    Ok(Summary { rows })
}

/// Scientific notation with `sig` significant digits and an explicit sign
/// on positive exponents: `3.79e-3`, `2.62e+8`.
pub fn format_sci(value: f64, sig: usize) -> String {
    if value == 0.0 {
        return "0".into();
    }
    if !value.is_finite() {
        return format!("{value}");
    }
    let text = format!("{:.*e}", sig.saturating_sub(1), value);
    match text.split_once('e') {
        Some((mantissa, exp)) if !exp.starts_with('-') => format!("{mantissa}e+{exp}"),
        _ => text,
    }
}

/// Table cell such as `3.79e-3 ± 1.1e-3`; an exactly zero error prints as `± 0`.
pub fn format_cell(rmsle: f64, rsle: f64) -> String {
    format!("{} ± {}", format_sci(rmsle, 3), format_sci(rsle, 2))
}

const TABLE_FORMS: [FormKind; 5] = FormKind::ALL;

pub fn markdown_table(reports: &[ExtrapolationReport]) -> String {
    let mut out = String::from("| Task |");
    for kind in TABLE_FORMS {
        out.push_str(&format!(" {kind} |"));
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(TABLE_FORMS.len()));
    out.push('\n');
    for r in reports {
        out.push_str(&format!("| {} |", r.task_name));
        for kind in TABLE_FORMS {
            let cell = match r.per_form.get(&kind) {
                Some(e) => format_cell(e.rmsle, e.root_standard_log_error),
                None if r.failures.contains_key(&kind) => "failed".into(),
                None => "-".into(),
            };
            out.push_str(&format!(" {cell} |"));
        }
        out.push('\n');
    }
    out
}

pub fn summary_markdown(summary: &Summary) -> String {
    let mut out = String::from("| Domain | Tasks |");
    for kind in TABLE_FORMS {
        out.push_str(&format!(" {kind} |"));
    }
    out.push_str("\n|---|---|");
    out.push_str(&"---|".repeat(TABLE_FORMS.len()));
    out.push('\n');
    for row in &summary.rows {
        out.push_str(&format!("| {} | {} |", row.domain, row.tasks));
        for kind in TABLE_FORMS {
            out.push_str(&format!(
                " {:.2}% |",
                row.percentages.get(&kind).copied().unwrap_or(0.0)
            ));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestTask {
    pub name: String,
    pub domain: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tasks: Vec<ManifestTask>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let manifest: Manifest = serde_json::from_str(text)?;
        if manifest.tasks.is_empty() {
            return Err(Error::Invariant("manifest lists no tasks".into()));
        }
        Ok(manifest)
    }

    /// Reads a manifest; relative task paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut manifest = Self::parse(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for task in &mut manifest.tasks {
            if task.path.is_relative() {
                task.path = base.join(&task.path);
            }
        }
        Ok(manifest)
    }

    /// Loads every task's series under the manifest's name and domain.
    pub fn load_series(&self) -> Result<Vec<DataSeries>> {
        self.tasks
            .iter()
            .map(|t| {
                let text = std::fs::read_to_string(&t.path)?;
                series::parse_series(&text, &t.name, &t.domain)
            })
            .collect()
    }
}
