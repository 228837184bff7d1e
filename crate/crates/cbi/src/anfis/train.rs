//! Hybrid training: least-squares consequents, gradient-descent premises.
//!
//! Every epoch alternates two passes:
//!
//! * **forward** — with the premises fixed, all consequent coefficients are
//!   solved jointly by ridge-regularized linear least squares against the
//!   class gray-level targets (normalized to [0, 1]);
//! * **backward** — gradient descent moves every premise center and width
//!   along the analytic gradient of the squared error.
//!
//! The trainer always finishes an epoch with a least-squares pass so the
//! returned consequents are optimal for the returned premises, and it
//! snapshots the best model seen, so the result is never worse than the
//! initial model. Training is fully deterministic: there is no sampling
//! and no parallel accumulation.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AnfisModel, INPUT_SCALE, MIN_WIDTH};
use crate::samples::ClassSample;

/// Hyperparameters for [`train`].
///
/// `seed` does not influence the training passes themselves (they are
/// deterministic); it is recorded so callers that synthesize data or
/// initial models can key everything off one value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Tikhonov weight added to the least-squares normal equations.
    pub ridge: f64,
    pub seed: u64,
    /// Early stop once the epoch RMSE improves by less than this for 10
    /// consecutive epochs.
    pub convergence_delta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.01,
            ridge: 1e-8,
            seed: 0,
            convergence_delta: 1e-6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(TrainError::InvalidConfig("learning_rate must be positive".into()));
        }
        if !self.ridge.is_finite() || self.ridge < 0.0 {
            return Err(TrainError::InvalidConfig("ridge must be non-negative".into()));
        }
        if !self.convergence_delta.is_finite() || self.convergence_delta < 0.0 {
            return Err(TrainError::InvalidConfig("convergence_delta must be non-negative".into()));
        }
        Ok(())
    }
}

/// Per-run training summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// RMSE in gray levels after each least-squares pass; entry 0 is the
    /// pass applied before the first epoch.
    pub rmse_trace: Vec<f64>,
    /// RMSE of the initial model, before any update.
    pub initial_rmse: f64,
    /// RMSE of the returned model.
    pub final_rmse: f64,
    pub epochs_run: usize,
    pub stopped_early: bool,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no samples provided")]
    Empty,
    #[error("class {0} has no samples")]
    MissingClass(u8),
    #[error("sample class {class_id} out of range for a {num_classes}-class model")]
    ClassOutOfRange { class_id: u8, num_classes: usize },
    #[error("least-squares system is singular (ridge = 0 and rank-deficient design)")]
    SingularSystem,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

/// Gradient of the squared error with respect to every premise parameter,
/// in normalized units. Layout follows the model's rule order.
#[derive(Debug, Clone, PartialEq)]
pub struct PremiseGradient {
    /// d(SSE)/d(center) per rule and channel.
    pub centers: Vec<[f64; 3]>,
    /// d(SSE)/d(width) per rule and channel.
    pub widths: Vec<[f64; 3]>,
}

pub(crate) fn check_class_coverage(samples: &[ClassSample], n_classes: usize) -> Result<(), TrainError> {
    if samples.is_empty() {
        return Err(TrainError::Empty);
    }
    let mut seen = vec![false; n_classes];
    for s in samples {
        let k = s.class_id as usize;
        if k >= n_classes {
            return Err(TrainError::ClassOutOfRange { class_id: s.class_id, num_classes: n_classes });
        }
        seen[k] = true;
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(TrainError::MissingClass(k as u8));
    }
    Ok(())
}

/// Normalized target of a sample: its class gray level divided by 255.
fn normalized_target(model: &AnfisModel, s: &ClassSample) -> f64 {
    model.class_targets()[s.class_id as usize] / INPUT_SCALE
}

/// Sum of squared errors in normalized space.
pub fn sse(model: &AnfisModel, samples: &[ClassSample]) -> f64 {
    samples
        .iter()
        .map(|s| {
            let e = model.evaluate_normalized(AnfisModel::normalize(s.rgb())) - normalized_target(model, s);
            e * e
        })
        .sum()
}

/// Training RMSE in gray levels.
pub fn rmse_gray(model: &AnfisModel, samples: &[ClassSample]) -> f64 {
    INPUT_SCALE * (sse(model, samples) / samples.len() as f64).sqrt()
}

/// Forward half-step: solves all consequent coefficients jointly by
/// ridge-regularized least squares, premises fixed.
///
/// With `ridge = 0` the normal equations can be rank-deficient, in which
/// case [`TrainError::SingularSystem`] is returned; any positive ridge
/// makes the system positive definite.
pub fn lse_fit(model: &AnfisModel, samples: &[ClassSample], ridge: f64) -> Result<AnfisModel, TrainError> {
    check_class_coverage(samples, model.num_classes())?;
    let n_rules = model.rules().len();
    let p = 4 * n_rules;
    let mut ata = DMatrix::<f64>::zeros(p, p);
    let mut aty = DVector::<f64>::zeros(p);
    let mut phi = vec![0.0; p];

    for s in samples {
        let x = AnfisModel::normalize(s.rgb());
        let weights = model.firing_strengths(s.rgb());
        for (i, w) in weights.iter().enumerate() {
            phi[4 * i] = w * x[0];
            phi[4 * i + 1] = w * x[1];
            phi[4 * i + 2] = w * x[2];
            phi[4 * i + 3] = *w;
        }
        let y = normalized_target(model, s);
        for r in 0..p {
            for c in r..p {
                ata[(r, c)] += phi[r] * phi[c];
            }
            aty[r] += phi[r] * y;
        }
    }
    // mirror the accumulated upper triangle
    for r in 0..p {
        for c in 0..r {
            ata[(r, c)] = ata[(c, r)];
        }
        ata[(r, r)] += ridge;
    }

    let theta = Cholesky::new(ata)
        .map(|ch| ch.solve(&aty))
        .ok_or(TrainError::SingularSystem)?;

    let mut rules = model.rules().to_vec();
    for (i, rule) in rules.iter_mut().enumerate() {
        rule.consequent = [theta[4 * i], theta[4 * i + 1], theta[4 * i + 2], theta[4 * i + 3]];
    }
    Ok(AnfisModel { rules, class_targets: model.class_targets().to_vec() })
}

/// Analytic gradient of the squared error with respect to all premise
/// centers and widths.
///
/// For rule `i` with firing strength `w_i`, total strength `W` and output
/// `y = sum(w_i f_i) / W`, the chain rule gives
/// `dy/dw_i = (f_i - y) / W`, and the Gaussian factors contribute
/// `dw/dc = w (x - c) / s^2` and `dw/ds = w (x - c)^2 / s^3`.
/// Samples whose total strength underflows to zero use the uniform-weight
/// fallback, which does not depend on the premises, so they contribute
/// nothing.
pub fn premise_gradient(model: &AnfisModel, samples: &[ClassSample]) -> PremiseGradient {
    let n_rules = model.rules().len();
    let mut grad = PremiseGradient {
        centers: vec![[0.0; 3]; n_rules],
        widths: vec![[0.0; 3]; n_rules],
    };
    for s in samples {
        let x = AnfisModel::normalize(s.rgb());
        let raw: Vec<f64> = model.rules().iter().map(|r| r.firing_strength(x)).collect();
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            continue;
        }
        let outputs: Vec<f64> = model.rules().iter().map(|r| r.consequent_output(x)).collect();
        let y: f64 = raw.iter().zip(&outputs).map(|(w, f)| w * f).sum::<f64>() / total;
        let err = y - normalized_target(model, s);
        for (i, rule) in model.rules().iter().enumerate() {
            let dy_dw = (outputs[i] - y) / total;
            let common = 2.0 * err * dy_dw * raw[i];
            for c in 0..3 {
                let mf = &rule.premise[c];
                let d = x[c] - mf.center;
                let s2 = mf.width * mf.width;
                grad.centers[i][c] += common * d / s2;
                grad.widths[i][c] += common * d * d / (s2 * mf.width);
            }
        }
    }
    grad
}

/// Backward half-step: one gradient-descent update of every center and
/// width. The step uses the mean-squared-error gradient (`grad / n`) so the
/// learning rate is independent of the sample count; centers are clamped
/// into [0, 1] and widths floored at [`MIN_WIDTH`] afterwards.
pub fn premise_step(model: &AnfisModel, samples: &[ClassSample], learning_rate: f64) -> AnfisModel {
    let grad = premise_gradient(model, samples);
    let scale = learning_rate / samples.len() as f64;
    let mut rules = model.rules().to_vec();
    for (i, rule) in rules.iter_mut().enumerate() {
        for c in 0..3 {
            let mf = &mut rule.premise[c];
            mf.center = (mf.center - scale * grad.centers[i][c]).clamp(0.0, 1.0);
            mf.width = (mf.width - scale * grad.widths[i][c]).max(MIN_WIDTH);
        }
    }
    AnfisModel { rules, class_targets: model.class_targets().to_vec() }
}

/// Hybrid training loop.
///
/// Requires at least one sample for every class of the model. Returns the
/// best model observed (by training RMSE, never worse than `init`) together
/// with the per-epoch RMSE trace. With `epochs = 0` a single least-squares
/// pass is still applied.
pub fn train(
    samples: &[ClassSample],
    config: &TrainConfig,
    init: &AnfisModel,
) -> Result<(AnfisModel, TrainReport), TrainError> {
    config.validate()?;
    check_class_coverage(samples, init.num_classes())?;

    let initial_rmse = rmse_gray(init, samples);
    let mut model = lse_fit(init, samples, config.ridge)?;
    let mut trace = vec![rmse_gray(&model, samples)];

    let mut best = if initial_rmse <= trace[0] {
        (init.clone(), initial_rmse)
    } else {
        (model.clone(), trace[0])
    };

    let mut epochs_run = 0;
    let mut stopped_early = false;
    let mut flat_streak = 0;
    for _ in 1..=config.epochs {
        model = premise_step(&model, samples, config.learning_rate);
        model = lse_fit(&model, samples, config.ridge)?;
        let rmse = rmse_gray(&model, samples);
        let improvement = trace.last().unwrap() - rmse;
        trace.push(rmse);
        epochs_run += 1;
        if rmse < best.1 {
            best = (model.clone(), rmse);
        }
        if improvement < config.convergence_delta {
            flat_streak += 1;
            if flat_streak >= 10 {
                stopped_early = true;
                break;
            }
        } else {
            flat_streak = 0;
        }
    }

    let (best_model, final_rmse) = best;
    Ok((
        best_model,
        TrainReport { rmse_trace: trace, initial_rmse, final_rmse, epochs_run, stopped_early },
    ))
}
