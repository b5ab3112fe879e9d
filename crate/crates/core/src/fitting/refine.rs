//! Bounded Levenberg-Marquardt on stable-MSLE residuals.
//!
//! Positive parameters are optimised in log coordinates (see
//! [`super::model::Codec`]); bounds are enforced by projecting every trial
//! point back into the box. The Jacobian is taken by central finite
//! differences so every form, including the root-finding M4, shares one
//! code path.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::forms::FormKind;
use crate::series::Sample;

use super::config::FitConfig;
use super::model::{require_points, require_sorted, Model};
use super::FitResult;

/// Relative finite-difference step per encoded parameter.
pub const JACOBIAN_STEP: f64 = 1e-6;

const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MIN: f64 = 1e-15;
const LAMBDA_MAX: f64 = 1e16;

struct Problem<'a> {
    model: &'a Model,
    samples: &'a [Sample],
}

impl Problem<'_> {
    fn residuals(&self, u: &[f64], out: &mut [f64]) -> Option<f64> {
        let theta = self.model.decode(u);
        self.model.residuals(&theta, self.samples, out)?;
        let sse: f64 = out.iter().map(|r| r * r).sum();
        sse.is_finite().then_some(sse)
    }

    fn jacobian(&self, u: &[f64], r0: &[f64]) -> DMatrix<f64> {
        let m = self.samples.len();
        let p = u.len();
        let mut jac = DMatrix::zeros(m, p);
        let mut plus = vec![0.0; m];
        let mut minus = vec![0.0; m];
        let mut probe = u.to_vec();
        for j in 0..p {
            let h = JACOBIAN_STEP * u[j].abs().max(1.0);
            let up = (u[j] + h <= self.model.upper[j]).then_some(u[j] + h);
            let down = (u[j] - h >= self.model.lower[j]).then_some(u[j] - h);
            let mut eval = |v: f64, out: &mut [f64]| {
                probe[j] = v;
                let ok = self.residuals(&probe, out).is_some();
                probe[j] = u[j];
                ok
            };
            let fwd = up.is_some_and(|v| eval(v, &mut plus));
            let bwd = down.is_some_and(|v| eval(v, &mut minus));
            for i in 0..m {
                jac[(i, j)] = match (fwd, bwd) {
                    (true, true) => (plus[i] - minus[i]) / (2.0 * h),
                    (true, false) => (plus[i] - r0[i]) / h,
                    (false, true) => (r0[i] - minus[i]) / h,
                    (false, false) => 0.0,
                };
            }
        }
        jac
    }
}

pub(crate) fn refine_encoded(model: &Model, start: &[f64], samples: &[Sample], cfg: &FitConfig) -> Result<FitResult> {
    let problem = Problem { model, samples };
    let m = samples.len() as f64;
    let mut u = model.encode(start);
    let mut r = vec![0.0; samples.len()];
    let mut sse = problem.residuals(&u, &mut r).ok_or(Error::NonFiniteLoss)?;
    let start_loss = sse / m;

    let mut lambda = LAMBDA_INIT;
    let mut converged = false;
    let mut iterations = 0;
    let mut slow_steps = 0;
    let mut trial_r = vec![0.0; samples.len()];

    'outer: while iterations < cfg.max_refine_iters {
        if sse == 0.0 {
            converged = true;
            break;
        }
        iterations += 1;
        let jac = problem.jacobian(&u, &r);
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * DVector::from_column_slice(&r);
        let diag_floor = jtj.diagonal().max() * 1e-12 + f64::MIN_POSITIVE;

        loop {
            let mut lhs = jtj.clone();
            for k in 0..lhs.nrows() {
                lhs[(k, k)] += lambda * jtj[(k, k)].max(diag_floor);
            }
            let step = lhs.cholesky().map(|c| c.solve(&(-&grad)));
            if let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) {
                let mut trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                model.project(&mut trial);
                if let Some(trial_sse) = problem.residuals(&trial, &mut trial_r) {
                    if trial_sse < sse {
                        let rel = (sse - trial_sse) / sse;
                        u = trial;
                        std::mem::swap(&mut r, &mut trial_r);
                        sse = trial_sse;
                        lambda = (lambda * 0.3).max(LAMBDA_MIN);
                        slow_steps = if rel < cfg.refine_tolerance { slow_steps + 1 } else { 0 };
                        if slow_steps >= 2 {
                            converged = true;
                            break 'outer;
                        }
                        break;
                    }
                }
            }
            lambda *= 5.0;
            if lambda > LAMBDA_MAX {
                // no descent direction left at working precision
                converged = true;
                break 'outer;
            }
        }
    }

    let mut theta = model.decode(&u);
    let mut form = model.form(&theta)?;
    if let crate::forms::FunctionalForm::Bnsl(ref mut p) = form {
        p.sort_breaks();
        theta = p.to_vec();
    }
    debug_assert_eq!(theta.len(), model.param_count());
    Ok(FitResult {
        form,
        train_loss: sse / m,
        converged,
        iterations,
        start_loss,
    })
}

/// Locally refines `start` with damped Gauss-Newton steps.
///
/// For the broken power law the break count is implied by `start.len()`.
pub fn refine(start: &[f64], samples: &[Sample], kind: FormKind, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    require_sorted(samples)?;
    let n = if kind == FormKind::Bnsl {
        if start.len() < 3 || !(start.len() - 3).is_multiple_of(3) {
            return Err(Error::InvalidParams(format!(
                "broken power law needs 3 + 3n values, got {}",
                start.len()
            )));
        }
        (start.len() - 3) / 3
    } else {
        0
    };
    let model = Model::new(kind, n, cfg);
    if start.len() != model.param_count() {
        return Err(Error::InvalidParams(format!(
            "{kind} needs {} parameters, got {}",
            model.param_count(),
            start.len()
        )));
    }
    require_points(samples, 1)?;
    refine_encoded(&model, start, samples, cfg)
}
