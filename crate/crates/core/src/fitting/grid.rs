//! Exhaustive grid search over a data-scaled parameter box.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::forms::FormKind;
use crate::series::Sample;

use super::config::{AxisSpec, FitConfig};
use super::model::{require_points, require_sorted, Model};

/// A parameter vector with its stable-MSLE loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCandidate {
    pub params: Vec<f64>,
    pub loss: f64,
}

/// Ascending loss, then lexicographically smaller parameters.
pub(crate) fn candidate_order(l: &GridCandidate, r: &GridCandidate) -> Ordering {
    l.loss
        .total_cmp(&r.loss)
        .then_with(|| lexicographic(&l.params, &r.params))
}

pub(crate) fn lexicographic(l: &[f64], r: &[f64]) -> Ordering {
    l.iter()
        .zip(r)
        .map(|(a, b)| a.total_cmp(b))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| l.len().cmp(&r.len()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone)]
struct Axis {
    param: usize,
    spacing: Spacing,
    low: f64,
    high: f64,
    points: usize,
    /// Multiplies the anchored scale instead of setting the value directly.
    scale: bool,
}

impl Axis {
    fn new(param: usize, spacing: Spacing, low: f64, high: f64, points: usize) -> Self {
        Self {
            param,
            spacing,
            low,
            high,
            points,
            scale: false,
        }
    }

    fn from_spec(param: usize, spacing: Spacing, spec: AxisSpec, unit: f64) -> Self {
        Self::new(param, spacing, spec.low * unit, spec.high * unit, spec.points)
    }

    fn values(&self) -> Vec<f64> {
        spaced(self.spacing, self.low, self.high, self.points)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let t: f64 = rng.random();
        match self.spacing {
            Spacing::Linear => self.low + t * (self.high - self.low),
            Spacing::Log => (self.low.ln() + t * (self.high / self.low).ln()).exp(),
        }
    }
}

fn spaced(spacing: Spacing, low: f64, high: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![low];
    }
    (0..points)
        .map(|k| {
            let t = k as f64 / (points - 1) as f64;
            match spacing {
                Spacing::Linear => low + t * (high - low),
                Spacing::Log => (low.ln() + t * (high / low).ln()).exp(),
            }
        })
        .collect()
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Grid layout for one form: independent axes plus, for the broken power
/// law, strictly ascending combinations of break locations.
struct Layout {
    axes: Vec<Axis>,
    location_params: Vec<usize>,
    location_low: f64,
    location_high: f64,
    location_points: usize,
}

impl Layout {
    fn build(model: &Model, samples: &[Sample], cfg: &FitConfig) -> Self {
        let g = &cfg.grid_spec;
        let x_min = samples.first().map_or(1.0, |s| s.x);
        let x_max = samples.last().map_or(1.0, |s| s.x);
        let y_min = samples.iter().map(|s| s.y).fold(f64::INFINITY, f64::min);
        let y_max = samples.iter().map(|s| s.y).fold(f64::NEG_INFINITY, f64::max);
        let scale = |param| Axis {
            scale: true,
            ..Axis::from_spec(param, Spacing::Log, g.scale, 1.0)
        };
        let mut axes = Vec::new();
        let mut location_params = Vec::new();
        match model.kind {
            FormKind::M1 => {
                axes.push(scale(0));
                axes.push(Axis::from_spec(1, Spacing::Linear, g.exponent, 1.0));
            }
            FormKind::M2 => {
                axes.push(scale(0));
                axes.push(Axis::from_spec(1, Spacing::Linear, g.exponent, 1.0));
                axes.push(Axis::from_spec(2, Spacing::Linear, g.asymptote, y_min));
            }
            FormKind::M3 => {
                axes.push(scale(0));
                let low = g.exponent.low.min(-0.1);
                axes.push(Axis::new(1, Spacing::Linear, low, -0.05, g.exponent.points));
                axes.push(Axis::from_spec(2, Spacing::Linear, g.asymptote, y_min));
                axes.push(Axis::new(
                    3,
                    Spacing::Log,
                    g.m3_offset.low / x_max,
                    g.m3_offset.high / x_min,
                    g.m3_offset.points,
                ));
            }
            FormKind::M4 => {
                axes.push(Axis::from_spec(0, Spacing::Log, g.m4_power, 1.0));
                axes.push(scale(1));
                axes.push(Axis::from_spec(2, Spacing::Linear, g.m4_rate, 1.0));
                axes.push(Axis::from_spec(3, Spacing::Log, g.m4_ceiling, y_max));
                axes.push(Axis::from_spec(4, Spacing::Linear, g.asymptote, y_min));
            }
            FormKind::Bnsl => {
                axes.push(Axis::from_spec(0, Spacing::Linear, g.asymptote, y_min));
                axes.push(scale(1));
                axes.push(Axis::from_spec(2, Spacing::Linear, g.slope0, 1.0));
                for i in 0..model.n {
                    let base = 3 + 3 * i;
                    axes.push(Axis::from_spec(base, Spacing::Linear, g.slope, 1.0));
                    axes.push(Axis::from_spec(base + 2, Spacing::Log, g.sharpness, 1.0));
                    location_params.push(base + 1);
                }
            }
        }
        let mut layout = Self {
            axes,
            location_params,
            location_low: x_min,
            location_high: x_max.max(x_min * (1.0 + 1e-9)),
            location_points: g.location_points,
        };
        layout.thin(g.max_nodes);
        layout
    }

    fn location_combos(&self) -> usize {
        if self.location_params.is_empty() {
            1
        } else {
            binomial(self.location_points, self.location_params.len())
        }
    }

    fn node_count(&self) -> usize {
        self.axes
            .iter()
            .fold(self.location_combos(), |acc, a| acc.saturating_mul(a.points))
    }

    /// Drops points from the densest axis until the grid fits the budget.
    fn thin(&mut self, max_nodes: usize) {
        let min_locations = self.location_params.len().max(2);
        while self.node_count() > max_nodes {
            let densest = self
                .axes
                .iter()
                .enumerate()
                .filter(|(_, a)| a.points > 2)
                .max_by_key(|(i, a)| (a.points, usize::MAX - i))
                .map(|(i, a)| (i, a.points));
            let loc = (!self.location_params.is_empty() && self.location_points > min_locations)
                .then_some(self.location_points);
            match (densest, loc) {
                (Some((_, p)), Some(lp)) if lp > p => self.location_points -= 1,
                (Some((i, _)), _) => self.axes[i].points -= 1,
                (None, Some(_)) => self.location_points -= 1,
                (None, None) => break,
            }
        }
    }

    fn locations(&self) -> Vec<Vec<f64>> {
        let k = self.location_params.len();
        if k == 0 {
            return vec![Vec::new()];
        }
        let values = spaced(
            Spacing::Log,
            self.location_low,
            self.location_high,
            self.location_points,
        );
        let mut out = Vec::new();
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            out.push(idx.iter().map(|&i| values[i]).collect());
            // next ascending combination
            let mut pos = k;
            while pos > 0 && idx[pos - 1] == values.len() - k + pos - 1 {
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
            idx[pos - 1] += 1;
            for j in pos..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
        out
    }
}

/// Completes a node by anchoring its scale parameter; `None` if infeasible.
fn finish_node(model: &Model, mut theta: Vec<f64>, multiplier: f64, samples: &[Sample]) -> Option<GridCandidate> {
    let si = model.scale_index();
    theta[si] = 1.0;
    theta[si] = model.anchor_scale(&theta, samples)? * multiplier;
    let loss = model.loss(&theta, samples);
    loss.is_finite().then_some(GridCandidate { params: theta, loss })
}

fn push_bounded(best: &mut Vec<GridCandidate>, cand: GridCandidate, keep: usize) {
    let pos = best
        .binary_search_by(|probe| candidate_order(probe, &cand))
        .unwrap_or_else(|e| e);
    if pos < keep {
        best.insert(pos, cand);
        best.truncate(keep);
    }
}

pub(crate) fn evaluate_grid(model: &Model, samples: &[Sample], cfg: &FitConfig, keep: usize) -> Vec<GridCandidate> {
    let layout = Layout::build(model, samples, cfg);
    let axis_values: Vec<Vec<f64>> = layout.axes.iter().map(Axis::values).collect();
    let locations = layout.locations();
    let total = layout.node_count();
    let p = model.param_count();

    (0..total)
        .into_par_iter()
        .fold(Vec::new, |mut best, mut index| {
            let mut theta = vec![0.0; p];
            let mut multiplier = 1.0;
            for (axis, values) in layout.axes.iter().zip(&axis_values) {
                let v = values[index % values.len()];
                index /= values.len();
                if axis.scale {
                    multiplier = v;
                } else {
                    theta[axis.param] = v;
                }
            }
            for (&param, &d) in layout.location_params.iter().zip(&locations[index]) {
                theta[param] = d;
            }
            if let Some(cand) = finish_node(model, theta, multiplier, samples) {
                push_bounded(&mut best, cand, keep);
            }
            best
        })
        .reduce(Vec::new, |mut a, b| {
            for cand in b {
                push_bounded(&mut a, cand, keep);
            }
            a
        })
}

/// Seeded random starts drawn inside the grid ranges.
pub(crate) fn random_starts(model: &Model, samples: &[Sample], cfg: &FitConfig) -> Vec<GridCandidate> {
    if cfg.random_starts == 0 {
        return Vec::new();
    }
    let layout = Layout::build(model, samples, cfg);
    let stream = (model.kind as u64) << 32 | model.n as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let p = model.param_count();
    let loc_axis = Axis::new(0, Spacing::Log, layout.location_low, layout.location_high, 2);
    let mut out = Vec::new();
    // bounded number of draws so infeasible regions cannot loop forever
    for _ in 0..cfg.random_starts * 4 {
        if out.len() == cfg.random_starts {
            break;
        }
        let mut theta = vec![0.0; p];
        let mut multiplier = 1.0;
        for axis in &layout.axes {
            let v = axis.sample(&mut rng);
            if axis.scale {
                multiplier = v;
            } else {
                theta[axis.param] = v;
            }
        }
        let mut locs: Vec<f64> = layout
            .location_params
            .iter()
            .map(|_| loc_axis.sample(&mut rng))
            .collect();
        locs.sort_by(f64::total_cmp);
        for (&param, d) in layout.location_params.iter().zip(locs) {
            theta[param] = d;
        }
        if let Some(cand) = finish_node(model, theta, multiplier, samples) {
            out.push(cand);
        }
    }
    out
}

/// Evaluates the loss at every grid node and returns the `cfg.multi_start`
/// best nodes in ascending loss order; ties go to the lexicographically
/// smaller parameter vector.
pub fn grid_search(samples: &[Sample], kind: FormKind, n: usize, cfg: &FitConfig) -> Result<Vec<GridCandidate>> {
    cfg.validate()?;
    require_sorted(samples)?;
    require_points(samples, kind.param_count(n))?;
    let model = Model::new(kind, n, cfg);
    Ok(evaluate_grid(&model, samples, cfg, cfg.multi_start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn spacing_and_binomial() {
        assert_eq!(spaced(Spacing::Linear, 0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
        let logs = spaced(Spacing::Log, 1.0, 100.0, 3);
        assert!((logs[1] - 10.0).abs() < 1e-12);
        assert_eq!(binomial(7, 3), 35);
        assert_eq!(binomial(2, 3), 0);
    }

    #[test]
    fn ascending_location_combinations() {
        let cfg = FitConfig::default();
        let model = Model::new(FormKind::Bnsl, 2, &cfg);
        let samples: Vec<Sample> = (1..=20).map(|i| Sample::new(i as f64, 1.0 / i as f64)).collect();
        let layout = Layout::build(&model, &samples, &cfg);
        let combos = layout.locations();
        assert_eq!(combos.len(), binomial(layout.location_points, 2));
        assert!(combos.iter().all(|c| c[0] < c[1]));
        assert!(layout.node_count() <= cfg.grid_spec.max_nodes);
    }

    #[test]
    fn thinning_respects_budget_and_minimums() {
        let mut cfg = FitConfig::default();
        cfg.grid_spec.max_nodes = 10;
        let model = Model::new(FormKind::Bnsl, 3, &cfg);
        let samples: Vec<Sample> = (1..=40).map(|i| Sample::new(i as f64, 1.0 / i as f64)).collect();
        let layout = Layout::build(&model, &samples, &cfg);
        assert!(layout.axes.iter().all(|a| a.points >= 2));
        assert!(layout.location_points >= 3);
        assert!(layout.node_count() >= 1);
    }

    #[test]
    fn exact_node_ranks_first() {
        let samples: Vec<Sample> = (1..=32).map(|i| Sample::new(i as f64, 1.0 / i as f64)).collect();
        let mut cfg = FitConfig::default();
        cfg.grid_spec.slope0 = AxisSpec::new(0.0, 1.5, 7); // contains c0 = 1
        let best = grid_search(&samples, FormKind::Bnsl, 0, &cfg).unwrap();
        assert_eq!(best.len(), cfg.multi_start);
        let top = &best[0];
        assert_eq!(top.params[0], 0.0);
        assert!((top.params[1] - 1.0).abs() < 1e-12);
        assert!((top.params[2] - 1.0).abs() < 1e-12);
        assert!(top.loss < 1e-28);
        assert!(best.windows(2).all(|w| candidate_order(&w[0], &w[1]).is_le()));
    }

    #[test]
    fn too_few_points() {
        let samples: Vec<Sample> = (1..=3).map(|i| Sample::new(i as f64, 1.0 / i as f64)).collect();
        let err = grid_search(&samples, FormKind::Bnsl, 1, &FitConfig::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientData {
                needed: 6,
                available: 3
            }
        ));
    }

    #[test]
    fn random_starts_are_seeded() {
        let samples: Vec<Sample> = (1..=32).map(|i| Sample::new(i as f64, 1.0 / i as f64)).collect();
        let cfg = FitConfig::default().with_seed(3);
        let model = Model::new(FormKind::Bnsl, 1, &cfg);
        let a = random_starts(&model, &samples, &cfg);
        let b = random_starts(&model, &samples, &cfg);
        assert_eq!(a, b);
        assert!(!a.is_empty());
        let other = random_starts(&model, &samples, &cfg.clone().with_seed(4));
        assert_ne!(a, other);
    }
}
