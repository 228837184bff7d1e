//! First-order Sugeno neuro-fuzzy classifier over RGB pixels.
//!
//! A model holds a bank of fuzzy if-then rules. Rule `i` reads
//!
//! ```text
//! if r is A_i and g is B_i and b is C_i
//! then o_i = j_i*r + k_i*g + l_i*b + z_i
//! ```
//!
//! where `A_i`, `B_i`, `C_i` are Gaussian membership functions over the
//! normalized channels and `(j_i, k_i, l_i, z_i)` are the linear consequent
//! coefficients. Inference is the usual weighted average: the firing
//! strength `w_i` is the product of the three memberships, and the output
//! is `o = sum(w_i * o_i) / sum(w_i)`, rescaled to the 0-255 gray domain.
//!
//! Channels are divided by 255 before inference, and consequents are
//! learned in that normalized space; this keeps the least-squares system
//! of the hybrid trainer ([`train`]) well conditioned.
//!
//! Each tissue class is assigned a fixed gray-level target (`0, 51, 102,
//! 153, 204, 255` for the default six classes); [`AnfisModel::classify`]
//! maps a pixel to the class whose target is nearest to the inference
//! output.

mod train;

pub use train::{
    lse_fit, premise_gradient, premise_step, rmse_gray, sse, train, PremiseGradient, TrainConfig,
    TrainError, TrainReport,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::samples::ClassSample;

/// Lower bound on membership widths, enforced after every training update.
pub const MIN_WIDTH: f64 = 1e-3;

/// Channels are divided by this before inference; fixed for 8-bit input.
pub const INPUT_SCALE: f64 = 255.0;

/// Gaussian membership function over one normalized channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipFunction {
    /// Peak position in [0, 1] (normalized channel value).
    pub center: f64,
    /// Gaussian sigma in normalized units, at least [`MIN_WIDTH`].
    pub width: f64,
}

impl MembershipFunction {
    pub fn new(center: f64, width: f64) -> Result<Self, ModelError> {
        let mf = Self { center, width };
        mf.validate()?;
        Ok(mf)
    }

    fn validate(&self) -> Result<(), ModelError> {
        if !self.center.is_finite() || !(0.0..=1.0).contains(&self.center) {
            return Err(ModelError::Invalid(format!(
                "membership center {} outside [0, 1]",
                self.center
            )));
        }
        if !self.width.is_finite() || self.width < MIN_WIDTH {
            return Err(ModelError::Invalid(format!(
                "membership width {} below the {MIN_WIDTH} floor",
                self.width
            )));
        }
        Ok(())
    }

    /// Membership degree at normalized input `x`; exactly 1.0 at the center.
    pub fn evaluate(&self, x: f64) -> f64 {
        let d = x - self.center;
        (-d * d / (2.0 * self.width * self.width)).exp()
    }
}

/// One fuzzy rule: a premise per channel and a linear consequent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SugenoRule {
    /// Premise membership functions for (r, g, b).
    pub premise: [MembershipFunction; 3],
    /// Consequent coefficients `(j, k, l, z)` in normalized space.
    pub consequent: [f64; 4],
}

impl SugenoRule {
    /// Product of the three channel memberships at a normalized pixel.
    pub fn firing_strength(&self, x: [f64; 3]) -> f64 {
        self.premise[0].evaluate(x[0]) * self.premise[1].evaluate(x[1]) * self.premise[2].evaluate(x[2])
    }

    /// Consequent output `j*r + k*g + l*b + z` at a normalized pixel.
    pub fn consequent_output(&self, x: [f64; 3]) -> f64 {
        let [j, k, l, z] = self.consequent;
        j * x[0] + k * x[1] + l * x[2] + z
    }

    fn validate(&self) -> Result<(), ModelError> {
        for mf in &self.premise {
            mf.validate()?;
        }
        if self.consequent.iter().any(|c| !c.is_finite()) {
            return Err(ModelError::Invalid("non-finite consequent coefficient".into()));
        }
        Ok(())
    }
}

/// A trained Sugeno fuzzy classifier.
///
/// Immutable after construction and safe to share across threads for
/// evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct AnfisModel {
    rules: Vec<SugenoRule>,
    class_targets: Vec<f64>,
}

impl AnfisModel {
    /// Builds a model, validating every invariant.
    pub fn new(rules: Vec<SugenoRule>, class_targets: Vec<f64>) -> Result<Self, ModelError> {
        if rules.is_empty() {
            return Err(ModelError::Invalid("model needs at least one rule".into()));
        }
        for r in &rules {
            r.validate()?;
        }
        if class_targets.is_empty() {
            return Err(ModelError::Invalid("model needs at least one class target".into()));
        }
        for t in &class_targets {
            if !t.is_finite() || !(0.0..=255.0).contains(t) {
                return Err(ModelError::Invalid(format!("class target {t} outside [0, 255]")));
            }
        }
        if class_targets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::Invalid("class targets must be strictly increasing".into()));
        }
        Ok(Self { rules, class_targets })
    }

    /// Evenly spaced gray targets: class `k` of `n` maps to
    /// `round(255 * k / (n - 1))`. A single class maps to 0.
    pub fn default_class_targets(n: usize) -> Vec<f64> {
        assert!(n >= 1);
        if n == 1 {
            return vec![0.0];
        }
        (0..n)
            .map(|k| (255.0 * k as f64 / (n - 1) as f64).round())
            .collect()
    }

    /// One rule per class: premise centers at the per-class per-channel
    /// sample mean, widths at the per-class sample standard deviation
    /// (floored at [`MIN_WIDTH`]); consequents start at zero.
    pub fn init_from_samples(
        samples: &[ClassSample],
        class_targets: Vec<f64>,
    ) -> Result<Self, TrainError> {
        let n_classes = class_targets.len();
        train::check_class_coverage(samples, n_classes)?;
        let mut rules = Vec::with_capacity(n_classes);
        for class_id in 0..n_classes as u8 {
            let xs: Vec<[f64; 3]> = samples
                .iter()
                .filter(|s| s.class_id == class_id)
                .map(|s| Self::normalize(s.rgb()))
                .collect();
            let n = xs.len() as f64;
            let mut premise = [MembershipFunction { center: 0.0, width: MIN_WIDTH }; 3];
            for c in 0..3 {
                let mean = xs.iter().map(|x| x[c]).sum::<f64>() / n;
                let var = xs.iter().map(|x| (x[c] - mean).powi(2)).sum::<f64>() / n;
                premise[c] = MembershipFunction {
                    center: mean.clamp(0.0, 1.0),
                    width: var.sqrt().max(MIN_WIDTH),
                };
            }
            rules.push(SugenoRule { premise, consequent: [0.0; 4] });
        }
        Ok(Self { rules, class_targets })
    }

    pub fn rules(&self) -> &[SugenoRule] {
        &self.rules
    }

    pub fn class_targets(&self) -> &[f64] {
        &self.class_targets
    }

    pub fn num_classes(&self) -> usize {
        self.class_targets.len()
    }

    /// Divides 8-bit channels by [`INPUT_SCALE`].
    pub fn normalize(rgb: [u8; 3]) -> [f64; 3] {
        [
            rgb[0] as f64 / INPUT_SCALE,
            rgb[1] as f64 / INPUT_SCALE,
            rgb[2] as f64 / INPUT_SCALE,
        ]
    }

    /// Normalized firing strengths at a pixel; they sum to 1 when any rule
    /// fires, and fall back to the uniform weight `1/R` when the total
    /// strength underflows to zero.
    pub fn firing_strengths(&self, rgb: [u8; 3]) -> Vec<f64> {
        let x = Self::normalize(rgb);
        let raw: Vec<f64> = self.rules.iter().map(|r| r.firing_strength(x)).collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            raw.iter().map(|w| w / total).collect()
        } else {
            vec![1.0 / self.rules.len() as f64; self.rules.len()]
        }
    }

    /// Inference output in the 0-255 gray domain.
    ///
    /// The result is a convex combination of the per-rule consequent
    /// outputs; pixels where every rule's firing strength underflows to
    /// zero get the unweighted mean of the rule outputs.
    pub fn evaluate(&self, rgb: [u8; 3]) -> f64 {
        self.evaluate_normalized(Self::normalize(rgb)) * INPUT_SCALE
    }

    /// Inference in normalized space (both inputs and output in [0, 1]
    /// for a trained model).
    pub(crate) fn evaluate_normalized(&self, x: [f64; 3]) -> f64 {
        let mut total = 0.0;
        let mut acc = 0.0;
        for rule in &self.rules {
            let w = rule.firing_strength(x);
            total += w;
            acc += w * rule.consequent_output(x);
        }
        if total > 0.0 {
            acc / total
        } else {
            self.rules.iter().map(|r| r.consequent_output(x)).sum::<f64>() / self.rules.len() as f64
        }
    }

    /// Class whose gray target is nearest to an inference output `o`;
    /// ties break toward the lower class id.
    pub fn nearest_class(&self, o: f64) -> u8 {
        let mut best = 0u8;
        let mut best_dist = f64::INFINITY;
        for (k, t) in self.class_targets.iter().enumerate() {
            let d = (o - t).abs();
            if d < best_dist {
                best_dist = d;
                best = k as u8;
            }
        }
        best
    }

    /// `nearest_class(evaluate(rgb))`.
    pub fn classify(&self, rgb: [u8; 3]) -> u8 {
        self.nearest_class(self.evaluate(rgb))
    }

    /// Serializes the model to its JSON document format at full double
    /// precision.
    pub fn to_json(&self) -> String {
        let doc = ModelDoc {
            input_scale: INPUT_SCALE,
            class_targets: self.class_targets.clone(),
            rules: self
                .rules
                .iter()
                .map(|r| RuleDoc {
                    premise: r.premise.to_vec(),
                    consequent: r.consequent.to_vec(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("model serialization cannot fail")
    }

    /// Parses and validates a model JSON document.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        if doc.input_scale != INPUT_SCALE {
            return Err(ModelError::Invalid(format!(
                "field \"input_scale\" must be {INPUT_SCALE}, found {}",
                doc.input_scale
            )));
        }
        let mut rules = Vec::with_capacity(doc.rules.len());
        for (i, r) in doc.rules.into_iter().enumerate() {
            let premise: [MembershipFunction; 3] = r.premise.try_into().map_err(|v: Vec<_>| {
                ModelError::Invalid(format!("rule {i}: expected 3 premise functions, found {}", v.len()))
            })?;
            let consequent: [f64; 4] = r.consequent.try_into().map_err(|v: Vec<_>| {
                ModelError::Invalid(format!("rule {i}: expected 4 consequent coefficients, found {}", v.len()))
            })?;
            rules.push(SugenoRule { premise, consequent });
        }
        Self::new(rules, doc.class_targets)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    input_scale: f64,
    class_targets: Vec<f64>,
    rules: Vec<RuleDoc>,
}

#[derive(Serialize, Deserialize)]
struct RuleDoc {
    premise: Vec<MembershipFunction>,
    consequent: Vec<f64>,
}

/// Model document or invariant violations.
#[derive(Debug, Error)]
pub enum ModelError {
    /// Malformed JSON; the message carries line/column and, for missing
    /// fields, the field name.
    #[error("invalid model document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid model: {0}")]
    Invalid(String),
}
