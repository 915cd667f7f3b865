//! Mini-batch training of the regularized objective, k-fold cross-validation,
//! hyperparameter selection, auxiliary pair search and the alpha sweep.

mod audit;
mod cv;
mod pair;
mod sweep;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use audit::{IdAudit, IdEvent, Role};
pub use cv::{kfold_cv, select_hyperparams, CvPlan, CvReport, FoldMetrics, Selection};
pub use pair::{all_pairs, search_aux_pair, PairScore, PairSearch};
pub use sweep::{
    alpha_seed, run_sweep, write_loss_csv, write_metrics_csv, SweepFit, SweepPoint, SweepResult, SweepRow,
};

use crate::cohort::{PatientRecord, Preprocessor, N_FEATURES};
use crate::error::{Error, Result};
use crate::models::{AuxiliaryModel, Predictor};
pub use crate::regularization::TrainMode;
use crate::regularization::{
    objective, objective_gradient_mode, stage_means, Batch, ObjectiveValue, Regularizer, RegularizerSpec,
};
use crate::staging::{stage_record, RissStage, StagingThresholds};

pub const DEFAULT_HIDDEN: [usize; 2] = [32, 16];
pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const LEARNING_RATE_GRID: [f64; 4] = [0.3, 0.1, 0.03, 0.01];
pub const EPOCH_GRID: [usize; 2] = [100, 300];
pub const DEFAULT_K: usize = 5;

/// Standardized design matrix with labels, stages and optional soft labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    pub stages: Vec<RissStage>,
    pub soft_labels: Option<Vec<f64>>,
}

impl Dataset {
    pub fn from_records(
        records: &[PatientRecord],
        pre: &Preprocessor,
        thresholds: &StagingThresholds,
        aux: Option<&AuxiliaryModel>,
    ) -> Result<Self> {
        let stages = records
            .iter()
            .map(|r| stage_record(r, thresholds))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            ids: records.iter().map(|r| r.id.clone()).collect(),
            x: pre.transform(records),
            y: records.iter().map(|r| f64::from(r.label())).collect(),
            stages,
            soft_labels: aux.map(|a| a.predict_all(records)),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            x: self.x.select(Axis(0), idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            stages: idx.iter().map(|&i| self.stages[i]).collect(),
            soft_labels: self.soft_labels.as_ref().map(|s| idx.iter().map(|&i| s[i]).collect()),
        }
    }

    pub fn batch(&self) -> Batch<'_> {
        Batch {
            x: self.x.view(),
            y: &self.y,
            stages: Some(&self.stages),
            soft_labels: self.soft_labels.as_deref(),
        }
    }
}

/// Regularizer choice before it is bound to a training set. Stage means are
/// always computed on whichever training set is active.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum RegKind {
    None,
    AuxiliaryAlignment(AuxiliaryModel),
    StageConsistency,
}

impl RegKind {
    pub fn tag(&self) -> &'static str {
        match self {
            RegKind::None => "none",
            RegKind::AuxiliaryAlignment(_) => "aa",
            RegKind::StageConsistency => "stage",
        }
    }

    pub fn aux(&self) -> Option<&AuxiliaryModel> {
        match self {
            RegKind::AuxiliaryAlignment(m) => Some(m),
            _ => None,
        }
    }

    pub fn bind(&self, train: &Dataset) -> Regularizer {
        match self {
            RegKind::None => Regularizer::None,
            RegKind::AuxiliaryAlignment(m) => Regularizer::AuxiliaryAlignment(m.clone()),
            RegKind::StageConsistency => Regularizer::StageConsistency(stage_means(&train.y, &train.stages)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub layer_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub alpha: f64,
    pub mode: TrainMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let mut layer_sizes = vec![N_FEATURES];
        layer_sizes.extend(DEFAULT_HIDDEN);
        layer_sizes.push(1);
        Self {
            layer_sizes,
            learning_rate: 0.1,
            epochs: 100,
            batch_size: DEFAULT_BATCH_SIZE,
            seed: 7,
            alpha: 0.0,
            mode: TrainMode::LossPlusReg,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, reg: &Regularizer) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Validation(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Validation("epochs and batch size must be positive".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Validation(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if self.mode == TrainMode::RegOnly && matches!(reg, Regularizer::None) {
            return Err(Error::Validation("reg_only training needs a regularizer".into()));
        }
        Ok(())
    }

    /// The selection grid: every learning rate and epoch count at alpha = 0.
    pub fn selection_grid(base: &TrainConfig) -> Vec<TrainConfig> {
        let mut grid = Vec::new();
        for &epochs in &EPOCH_GRID {
            for &learning_rate in &LEARNING_RATE_GRID {
                grid.push(TrainConfig {
                    learning_rate,
                    epochs,
                    alpha: 0.0,
                    mode: TrainMode::LossPlusReg,
                    ..base.clone()
                });
            }
        }
        grid
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: ObjectiveValue,
    pub valid: Option<ObjectiveValue>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub predictor: Predictor,
    pub regularizer: Regularizer,
    pub trace: Vec<EpochRecord>,
}

/// Mini-batch gradient descent on the objective selected by `config.mode`.
/// The shuffle order of every epoch and the initialization derive from
/// `config.seed`. The full-training-set objective is recorded after each
/// epoch; a non-finite value aborts with the last finite total.
pub fn train(config: &TrainConfig, data: &Dataset, reg: &RegKind, valid: Option<&Dataset>) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    let regularizer = reg.bind(data);
    config.validate(&regularizer)?;
    if config.layer_sizes.first() != Some(&data.x.ncols()) {
        return Err(Error::Validation(format!(
            "network input {:?} does not match {} features",
            config.layer_sizes.first(),
            data.x.ncols()
        )));
    }
    let spec = RegularizerSpec {
        kind: regularizer,
        alpha: config.alpha,
    };
    let mut p = Predictor::new(&config.layer_sizes, config.seed)?;
    let mut shuffle = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle.set_stream(1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    let mut last_finite = None;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle);
        for chunk in order.chunks(config.batch_size) {
            let b = data.select(chunk);
            let (_, grads) = objective_gradient_mode(&p, &b.batch(), &spec, config.mode)?;
            p.apply_update(&grads, config.learning_rate);
        }
        let value = if p.is_finite() {
            objective(&p, &data.batch(), &spec)?
        } else {
            return Err(Error::Diverged { epoch, last_finite });
        };
        if !value.total.is_finite() {
            return Err(Error::Diverged { epoch, last_finite });
        }
        last_finite = Some(value.total);
        let valid = valid.map(|v| objective(&p, &v.batch(), &spec)).transpose()?;
        trace.push(EpochRecord {
            epoch,
            train: value,
            valid,
        });
    }
    Ok(TrainOutcome {
        predictor: p,
        regularizer: spec.kind,
        trace,
    })
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use rand::Rng;

    /// Two well separated Gaussian blobs on the first two of `d` features.
    pub fn blobs(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((n, d));
        let mut y = Vec::with_capacity(n);
        let mut stages = Vec::with_capacity(n);
        for i in 0..n {
            let label = (i % 2) as f64;
            for j in 0..d {
                let shift = if j < 2 { 2.0 * (2.0 * label - 1.0) } else { 0.0 };
                x[[i, j]] = shift + rng.random_range(-0.5..0.5);
            }
            y.push(label);
            stages.push(RissStage::ALL[i % 3]);
        }
        Dataset {
            ids: (0..n).map(|i| format!("T{i:04}")).collect(),
            x,
            y,
            stages,
            soft_labels: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::blobs;
    use super::*;
    use crate::evaluation::accuracy;

    fn config(d: usize) -> TrainConfig {
        TrainConfig {
            layer_sizes: vec![d, 8, 1],
            learning_rate: 0.3,
            epochs: 60,
            batch_size: 16,
            seed: 11,
            alpha: 0.0,
            mode: TrainMode::LossOnly,
        }
    }

    #[test]
    fn separable_data_is_fit_exactly() {
        let data = blobs(80, 4, 1);
        let out = train(&config(4), &data, &RegKind::None, None).unwrap();
        let h = out.predictor.predict(data.x.view()).unwrap();
        assert_eq!(accuracy(&h, &data.y).unwrap(), 1.0);
        assert_eq!(out.trace.len(), 60);
        assert!(out.trace.last().unwrap().train.data_term < out.trace[0].train.data_term);
    }

    #[test]
    fn training_is_deterministic() {
        let data = blobs(50, 3, 2);
        let a = train(&config(3), &data, &RegKind::StageConsistency, None).unwrap();
        let b = train(&config(3), &data, &RegKind::StageConsistency, None).unwrap();
        assert_eq!(a.predictor.params_flat(), b.predictor.params_flat());
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn invalid_configs_rejected() {
        let data = blobs(10, 3, 3);
        let mut c = config(3);
        c.mode = TrainMode::RegOnly;
        assert!(matches!(
            train(&c, &data, &RegKind::None, None),
            Err(Error::Validation(_))
        ));
        let mut c = config(3);
        c.learning_rate = 0.0;
        assert!(train(&c, &data, &RegKind::None, None).is_err());
        let c = config(5);
        assert!(train(&c, &data, &RegKind::None, None).is_err());
    }

    #[test]
    fn huge_learning_rate_diverges_or_is_recorded() {
        let data = blobs(40, 3, 4);
        let mut c = config(3);
        c.learning_rate = 1e300;
        c.mode = TrainMode::LossPlusReg;
        match train(&c, &data, &RegKind::None, None) {
            Err(Error::Diverged { epoch, .. }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn reg_only_stage_training_shrinks_within_stage_variance() {
        let data = blobs(90, 3, 5);
        let c = TrainConfig {
            mode: TrainMode::RegOnly,
            alpha: 1.0,
            learning_rate: 0.3,
            epochs: 40,
            ..config(3)
        };
        let out = train(&c, &data, &RegKind::StageConsistency, None).unwrap();
        let first = out.trace[0].train.reg_term;
        let last = out.trace.last().unwrap().train.reg_term;
        assert!(last < 0.5 * first, "{first} -> {last}");
    }
}
