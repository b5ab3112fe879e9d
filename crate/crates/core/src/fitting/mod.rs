//! Two-stage fitting: grid search for starting points, then bounded local
//! least squares on the stable-MSLE residuals. Also hosts the held-out
//! validation procedures that choose a break count or a crop point.

mod config;
mod grid;
mod model;
mod refine;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{FormKind, FunctionalForm};
use crate::metrics::{self, PredictionPair};
use crate::series::Sample;

pub use config::{AxisSpec, Bounds, FitConfig, GridSpec};
pub use grid::{grid_search, GridCandidate};
pub use refine::{refine, JACOBIAN_STEP};

use grid::{evaluate_grid, lexicographic, random_starts};
use model::{require_points, require_sorted, Model};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FitResult {
    pub form: FunctionalForm,
    /// Stable MSLE on the fit points.
    pub train_loss: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Stable MSLE at the best starting point, before refinement.
    pub start_loss: f64,
}

/// Grid search, then refinement of every retained candidate; returns the
/// refined candidate with the smallest training loss.
pub fn fit(samples: &[Sample], kind: FormKind, n: usize, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    require_sorted(samples)?;
    require_points(samples, kind.param_count(n))?;
    let model = Model::new(kind, n, cfg);

    let mut starts = evaluate_grid(&model, samples, cfg, cfg.multi_start);
    starts.extend(random_starts(&model, samples, cfg));
    if starts.is_empty() {
        return Err(Error::AllCandidatesFailed(format!(
            "no feasible {kind} starting point on the grid"
        )));
    }
    let start_loss = starts.iter().map(|c| c.loss).fold(f64::INFINITY, f64::min);

    // successive halving: short runs from every start, longer runs for the
    // best of those, full refinement only for the finalists
    let finalists = cfg.finalists.max(1);
    let first_cap = (cfg.race_iters / 5).max(1);
    let stages = [
        (first_cap, 4 * finalists),
        (cfg.race_iters.saturating_sub(first_cap), finalists),
        (cfg.max_refine_iters, finalists),
    ];
    let mut last_err = None;
    let mut pool: Vec<FitResult> = Vec::new();
    let mut spent = 0;
    for (stage, &(cap, keep)) in stages.iter().enumerate() {
        let cap = cap.min(cfg.max_refine_iters.saturating_sub(spent));
        let stage_cfg = FitConfig {
            max_refine_iters: cap,
            ..cfg.clone()
        };
        let results: Vec<Result<FitResult>> = if stage == 0 {
            starts
                .par_iter()
                .map(|c| refine::refine_encoded(&model, &c.params, samples, &stage_cfg))
                .collect()
        } else {
            pool.par_iter()
                .map(|r| {
                    if r.converged || cap == 0 {
                        return Ok(r.clone());
                    }
                    let mut next = refine::refine_encoded(&model, &r.form.to_vec(), samples, &stage_cfg)?;
                    next.iterations += r.iterations;
                    Ok(next)
                })
                .collect()
        };
        spent += cap;
        pool.clear();
        for r in results {
            match r {
                Ok(r) => pool.push(r),
                Err(e) => last_err = Some(e),
            }
        }
        pool.sort_by(|l, r| {
            l.train_loss
                .total_cmp(&r.train_loss)
                .then_with(|| lexicographic(&l.form.to_vec(), &r.form.to_vec()))
        });
        pool.truncate(keep);
    }
    let mut best = pool
        .into_iter()
        .next()
        .ok_or_else(|| Error::AllCandidatesFailed(last_err.map_or_else(String::new, |e| e.to_string())))?;
    best.start_loss = start_loss.max(best.train_loss);
    Ok(best)
}

/// RMSLE of a fitted form on validation points.
pub fn validation_rmsle(form: &FunctionalForm, samples: &[Sample]) -> Result<f64> {
    let pairs = samples
        .iter()
        .map(|s| Ok(PredictionPair::new(s.y, form.eval(s.x)?)))
        .collect::<Result<Vec<_>>>()?;
    metrics::rmsle(&pairs)
}

/// Validation outcome for one candidate setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CandidateScore<T> {
    pub candidate: T,
    pub rmsle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BreakSelection {
    pub best: usize,
    pub scores: Vec<CandidateScore<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CropSelection {
    pub best: f64,
    pub scores: Vec<CandidateScore<f64>>,
}

/// First candidate whose score beats every earlier one by more than `tol`;
/// earlier candidates win ties.
fn pick_with_ties<T: Copy>(scores: &[CandidateScore<T>], tol: f64) -> Option<T> {
    let mut best: Option<(T, f64)> = None;
    for s in scores {
        if let Some(r) = s.rmsle {
            if best.is_none_or(|(_, b)| r < b - tol) {
                best = Some((s.candidate, r));
            }
        }
    }
    best.map(|(c, _)| c)
}

fn split_holdout(samples: &[Sample], holdout: usize) -> Result<(&[Sample], &[Sample])> {
    if holdout == 0 || holdout >= samples.len() {
        return Err(Error::InsufficientData {
            needed: holdout + 1,
            available: samples.len(),
        });
    }
    Ok(samples.split_at(samples.len() - holdout))
}

/// Chooses the break count by fitting on all but the `holdout` largest-x
/// points and scoring on those. Smaller counts win ties.
pub fn select_break_count(samples: &[Sample], max_n: usize, holdout: usize, cfg: &FitConfig) -> Result<BreakSelection> {
    require_sorted(samples)?;
    let (fit_part, validation) = split_holdout(samples, holdout)?;
    require_points(fit_part, FormKind::Bnsl.param_count(max_n))?;

    let scores: Vec<CandidateScore<usize>> = (0..=max_n)
        .map(
            |n| match fit(fit_part, FormKind::Bnsl, n, cfg).and_then(|r| validation_rmsle(&r.form, validation)) {
                Ok(rmsle) => CandidateScore {
                    candidate: n,
                    rmsle: Some(rmsle),
                    error: None,
                },
                Err(e) => CandidateScore {
                    candidate: n,
                    rmsle: None,
                    error: Some(e.to_string()),
                },
            },
        )
        .collect();
    let best = pick_with_ties(&scores, cfg.selection_tolerance)
        .ok_or_else(|| Error::AllCandidatesFailed("no break count could be fitted".into()))?;
    Ok(BreakSelection { best, scores })
}

/// Chooses a crop threshold: for each candidate, train points with
/// `x < threshold` are dropped before fitting a broken power law with `n`
/// breaks; the `holdout` largest-x points are always the validation set.
/// Smaller thresholds win ties. Candidates that leave too few points are
/// reported and skipped.
pub fn select_crop_point(
    samples: &[Sample],
    candidates: &[f64],
    n: usize,
    holdout: usize,
    cfg: &FitConfig,
) -> Result<CropSelection> {
    require_sorted(samples)?;
    let (fit_part, validation) = split_holdout(samples, holdout)?;
    let mut sorted = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let scores: Vec<CandidateScore<f64>> = sorted
        .iter()
        .map(|&crop| {
            let kept: Vec<Sample> = fit_part.iter().copied().filter(|s| s.x >= crop).collect();
            let outcome = require_points(&kept, FormKind::Bnsl.param_count(n))
                .and_then(|_| fit(&kept, FormKind::Bnsl, n, cfg))
                .and_then(|r| validation_rmsle(&r.form, validation));
            match outcome {
                Ok(rmsle) => CandidateScore {
                    candidate: crop,
                    rmsle: Some(rmsle),
                    error: None,
                },
                Err(e) => CandidateScore {
                    candidate: crop,
                    rmsle: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let best = pick_with_ties(&scores, cfg.selection_tolerance).ok_or_else(|| {
        Error::AllCandidatesFailed(
            scores
                .iter()
                .filter_map(|s| s.error.clone())
                .next()
                .unwrap_or_else(|| "no crop candidates".into()),
        )
    })?;
    Ok(CropSelection { best, scores })
}
