//! Interpretability regularizers and the regularized training objective
//!
//! ```text
//! J(h) = (1/m) sum_i L(h(x_i), y_i) + alpha * R(h)
//! ```
//!
//! with either the auxiliary-alignment term (mean Bernoulli KL divergence
//! from a frozen soft-label model to the network) or the stage-consistency
//! term (sum over R-ISS stages of the within-stage mean squared deviation of
//! predictions from the stage's training death rate).

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::models::{clip_prob, AuxiliaryModel, Gradients, Predictor};
use crate::staging::RissStage;

/// KL(Bernoulli(g) || Bernoulli(h)) with both probabilities clipped.
pub fn kl_bernoulli(g: f64, h: f64) -> f64 {
    let g = clip_prob(g);
    let h = clip_prob(h);
    let kl = g * (g / h).ln() + (1.0 - g) * ((1.0 - g) / (1.0 - h)).ln();
    // Rounding can push identical distributions a hair below zero.
    kl.max(0.0)
}

/// d KL(g || sigmoid(z)) / dz evaluated at h = sigmoid(z).
#[inline]
pub fn aa_gradient_logit(g: f64, h: f64) -> f64 {
    h - g
}

/// Mean KL between soft labels and predictions over a dataset.
pub fn aa_regularizer(soft_labels: &[f64], predictions: &[f64]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Empty(
            "auxiliary-alignment regularizer over an empty dataset".into(),
        ));
    }
    if soft_labels.len() != predictions.len() {
        return Err(Error::Validation("soft labels and predictions differ in length".into()));
    }
    Ok(soft_labels
        .iter()
        .zip(predictions)
        .map(|(&g, &h)| kl_bernoulli(g, h))
        .sum::<f64>()
        / predictions.len() as f64)
}

/// Empirical death rate per stage on the training labels. Stages without
/// training records have no mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageMeans {
    pub means: [Option<f64>; 3],
    pub counts: [usize; 3],
}

impl StageMeans {
    pub fn get(&self, s: RissStage) -> Option<f64> {
        self.means[s.index()]
    }
}

pub fn stage_means(labels: &[f64], stages: &[RissStage]) -> StageMeans {
    let mut sums = [0.0; 3];
    let mut counts = [0usize; 3];
    for (&y, s) in labels.iter().zip(stages) {
        sums[s.index()] += y;
        counts[s.index()] += 1;
    }
    let means = std::array::from_fn(|i| {
        if counts[i] == 0 {
            log::warn!(
                "stage {} has no training records; its consistency term is dropped",
                i + 1
            );
            None
        } else {
            Some(sums[i] / counts[i] as f64)
        }
    });
    StageMeans { means, counts }
}

/// Sum over stages of the within-stage mean squared deviation from the stage
/// mean. Stages absent from `stages` contribute nothing.
pub fn sc_regularizer(predictions: &[f64], stages: &[RissStage], means: &StageMeans) -> Result<f64> {
    if predictions.len() != stages.len() {
        return Err(Error::Validation("predictions and stages differ in length".into()));
    }
    let mut sq = [0.0; 3];
    let mut counts = [0usize; 3];
    for (&h, s) in predictions.iter().zip(stages) {
        let mu = means
            .get(*s)
            .ok_or_else(|| Error::Validation(format!("stage {s} has records but no training mean")))?;
        sq[s.index()] += (h - mu) * (h - mu);
        counts[s.index()] += 1;
    }
    Ok((0..3)
        .filter(|&i| counts[i] > 0)
        .map(|i| sq[i] / counts[i] as f64)
        .sum())
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum Regularizer {
    None,
    /// The auxiliary model is frozen; training never touches it.
    AuxiliaryAlignment(AuxiliaryModel),
    StageConsistency(StageMeans),
}

impl Regularizer {
    pub fn tag(&self) -> &'static str {
        match self {
            Regularizer::None => "none",
            Regularizer::AuxiliaryAlignment(_) => "aa",
            Regularizer::StageConsistency(_) => "stage",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerSpec {
    pub kind: Regularizer,
    pub alpha: f64,
}

impl RegularizerSpec {
    pub fn none() -> Self {
        Self {
            kind: Regularizer::None,
            alpha: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Validation(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if let Regularizer::StageConsistency(m) = &self.kind {
            if m.means.iter().flatten().any(|mu| !(0.0..=1.0).contains(mu)) {
                return Err(Error::Validation("stage means must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }
}

/// Which terms of the objective drive the parameter gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    LossPlusReg,
    LossOnly,
    RegOnly,
}

impl TrainMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::LossPlusReg => "loss_plus_reg",
            TrainMode::LossOnly => "loss_only",
            TrainMode::RegOnly => "reg_only",
        }
    }
}

/// A batch of standardized inputs with whatever the regularizer needs.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub x: ArrayView2<'a, f64>,
    pub y: &'a [f64],
    pub stages: Option<&'a [RissStage]>,
    /// Frozen auxiliary-model outputs for each row.
    pub soft_labels: Option<&'a [f64]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub total: f64,
    pub data_term: f64,
    pub reg_term: f64,
    pub alpha: f64,
}

fn soft_labels<'a>(batch: &Batch<'a>) -> Result<&'a [f64]> {
    batch
        .soft_labels
        .ok_or_else(|| Error::State("auxiliary alignment needs soft labels on the batch".into()))
}

fn stages<'a>(batch: &Batch<'a>) -> Result<&'a [RissStage]> {
    batch
        .stages
        .ok_or_else(|| Error::State("stage consistency needs stage assignments on the batch".into()))
}

fn reg_value(spec: &RegularizerSpec, batch: &Batch<'_>, h: &[f64]) -> Result<f64> {
    match &spec.kind {
        Regularizer::None => Ok(0.0),
        Regularizer::AuxiliaryAlignment(_) => aa_regularizer(soft_labels(batch)?, h),
        Regularizer::StageConsistency(m) => sc_regularizer(h, stages(batch)?, m),
    }
}

fn value_from_predictions(spec: &RegularizerSpec, batch: &Batch<'_>, h: &[f64]) -> Result<ObjectiveValue> {
    if h.is_empty() {
        return Err(Error::Empty("objective over an empty batch".into()));
    }
    if batch.y.len() != h.len() {
        return Err(Error::Validation("labels and inputs differ in length".into()));
    }
    let data_term = crate::models::LossReport::new(h, batch.y).mean_logistic_loss;
    let reg_term = reg_value(spec, batch, h)?;
    Ok(ObjectiveValue {
        total: data_term + spec.alpha * reg_term,
        data_term,
        reg_term,
        alpha: spec.alpha,
    })
}

/// Mean logistic loss plus alpha times the regularizer on this batch.
pub fn objective(p: &Predictor, batch: &Batch<'_>, spec: &RegularizerSpec) -> Result<ObjectiveValue> {
    spec.validate()?;
    let h = p.predict(batch.x)?;
    value_from_predictions(spec, batch, &h)
}

/// Upstream derivatives dJ/dz per sample for the selected terms.
fn upstream(spec: &RegularizerSpec, batch: &Batch<'_>, h: &[f64], mode: TrainMode) -> Result<Vec<f64>> {
    let n = h.len() as f64;
    let mut dz = vec![0.0; h.len()];
    if mode != TrainMode::RegOnly {
        for (d, (&hi, &yi)) in dz.iter_mut().zip(h.iter().zip(batch.y)) {
            *d += (hi - yi) / n;
        }
    }
    if mode == TrainMode::LossOnly {
        return Ok(dz);
    }
    let alpha = spec.alpha;
    match &spec.kind {
        Regularizer::None => {}
        Regularizer::AuxiliaryAlignment(_) => {
            let g = soft_labels(batch)?;
            for (d, (&hi, &gi)) in dz.iter_mut().zip(h.iter().zip(g)) {
                *d += alpha * aa_gradient_logit(gi, hi) / n;
            }
        }
        Regularizer::StageConsistency(m) => {
            let st = stages(batch)?;
            let mut counts = [0usize; 3];
            for s in st {
                counts[s.index()] += 1;
            }
            for (d, (&hi, s)) in dz.iter_mut().zip(h.iter().zip(st)) {
                let mu = m
                    .get(*s)
                    .ok_or_else(|| Error::Validation(format!("stage {s} has records but no training mean")))?;
                // dJ/dh = 2(h - mu)/|D_s|, chained through the sigmoid.
                let dh = 2.0 * (hi - mu) / counts[s.index()] as f64;
                *d += alpha * dh * hi * (1.0 - hi);
            }
        }
    }
    Ok(dz)
}

/// Objective value and the gradient of the terms selected by `mode`.
/// `LossOnly` ignores the regularizer in the gradient; `RegOnly` ignores the
/// data term. The reported value always carries both terms.
pub fn objective_gradient_mode(
    p: &Predictor,
    batch: &Batch<'_>,
    spec: &RegularizerSpec,
    mode: TrainMode,
) -> Result<(ObjectiveValue, Gradients)> {
    spec.validate()?;
    let pass = p.forward(batch.x)?;
    let h = pass.probs.as_slice().expect("contiguous").to_vec();
    let value = value_from_predictions(spec, batch, &h)?;
    let dz = upstream(spec, batch, &h, mode)?;
    Ok((value, p.backward(&pass, &dz)?))
}

/// Gradient of the full objective.
pub fn objective_gradient(p: &Predictor, batch: &Batch<'_>, spec: &RegularizerSpec) -> Result<Gradients> {
    Ok(objective_gradient_mode(p, batch, spec, TrainMode::LossPlusReg)?.1)
}
