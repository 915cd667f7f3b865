use rayon::prelude::*;

use super::{train, Dataset, IdAudit, RegKind, Role, TrainConfig};
use crate::cohort::{seeded_id_order, Cohort, PatientRecord, Preprocessor};
use crate::error::{Error, Result};
use crate::evaluation::{accuracy, auc};
use crate::models::LossReport;
use crate::staging::StagingThresholds;

/// Fold assignment for every record of a cohort, keyed to a seeded
/// permutation of the ids: the record at permutation position `p` lands in
/// fold `p % k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CvPlan {
    pub k: usize,
    pub seed: u64,
    /// Fold of each record, in cohort order.
    pub folds: Vec<usize>,
}

impl CvPlan {
    pub fn new(cohort: &Cohort, k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::Validation(format!("k must be at least 2, got {k}")));
        }
        if cohort.len() < k {
            return Err(Error::Validation(format!(
                "{} records cannot fill {k} folds",
                cohort.len()
            )));
        }
        let order = seeded_id_order(&cohort.ids(), seed);
        let pos: std::collections::HashMap<&str, usize> = order.iter().enumerate().map(|(p, id)| (*id, p)).collect();
        let folds = cohort.ids().iter().map(|id| pos[id] % k).collect();
        Ok(Self { k, seed, folds })
    }

    /// (training indices, held-out indices) for fold `f`.
    pub fn fold_indices(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        let mut tr = Vec::new();
        let mut va = Vec::new();
        for (i, &g) in self.folds.iter().enumerate() {
            if g == f {
                va.push(i);
            } else {
                tr.push(i);
            }
        }
        (tr, va)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.folds {
            s[f] += 1;
        }
        s
    }

    pub(crate) fn fold_records(&self, cohort: &Cohort, f: usize) -> (Vec<PatientRecord>, Vec<PatientRecord>) {
        let (tr, va) = self.fold_indices(f);
        let r = cohort.records();
        (
            tr.iter().map(|&i| r[i].clone()).collect(),
            va.iter().map(|&i| r[i].clone()).collect(),
        )
    }

    pub(crate) fn record_folds(&self, cohort: &Cohort, stage: &str, audit: Option<&IdAudit>) {
        if let Some(a) = audit {
            let ids = cohort.ids();
            for f in 0..self.k {
                let (tr, va) = self.fold_indices(f);
                let t: Vec<&str> = tr.iter().map(|&i| ids[i]).collect();
                let v: Vec<&str> = va.iter().map(|&i| ids[i]).collect();
                a.record(format!("{stage}/fold{f}/train"), Role::Fit, &t);
                a.record(format!("{stage}/fold{f}/validate"), Role::Select, &v);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldMetrics {
    pub loss: f64,
    pub accuracy: f64,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub mean_loss: f64,
    pub mean_accuracy: f64,
    /// Mean over folds with a defined AUC.
    pub mean_auc: Option<f64>,
    pub folds: Vec<FoldMetrics>,
}

/// Trains on k-1 folds and scores the held-out fold, for every fold.
/// Preprocessing is refit on each fold's training portion.
pub fn kfold_cv(
    plan: &CvPlan,
    cohort: &Cohort,
    config: &TrainConfig,
    reg: &RegKind,
    thresholds: &StagingThresholds,
    audit: Option<&IdAudit>,
) -> Result<CvReport> {
    if plan.folds.len() != cohort.len() {
        return Err(Error::Validation("CV plan does not cover the cohort".into()));
    }
    plan.record_folds(cohort, "cv", audit);
    let folds = (0..plan.k)
        .into_par_iter()
        .map(|f| {
            let (tr, va) = plan.fold_records(cohort, f);
            let pre = Preprocessor::fit(tr.iter())?;
            let train_set = Dataset::from_records(&tr, &pre, thresholds, reg.aux())?;
            let valid_set = Dataset::from_records(&va, &pre, thresholds, reg.aux())?;
            let out = train(config, &train_set, reg, None)?;
            let h = out.predictor.predict(valid_set.x.view())?;
            let loss = LossReport::new(&h, &valid_set.y).mean_logistic_loss;
            let auc = auc(&h, &valid_set.y)?;
            if auc.is_none() {
                log::warn!("fold {f} has a single class; its AUC is undefined");
            }
            Ok(FoldMetrics {
                loss,
                accuracy: accuracy(&h, &valid_set.y)?,
                auc,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let k = folds.len() as f64;
    let aucs: Vec<f64> = folds.iter().filter_map(|f| f.auc).collect();
    Ok(CvReport {
        mean_loss: folds.iter().map(|f| f.loss).sum::<f64>() / k,
        mean_accuracy: folds.iter().map(|f| f.accuracy).sum::<f64>() / k,
        mean_auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
        folds,
    })
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub best: TrainConfig,
    /// Mean validation loss per grid entry; `None` where training failed
    /// numerically.
    pub scores: Vec<Option<f64>>,
}

/// Argmin of mean validation loss over the grid, ties to the earlier entry.
/// Configurations that diverge are skipped.
pub fn select_hyperparams(
    grid: &[TrainConfig],
    plan: &CvPlan,
    cohort: &Cohort,
    thresholds: &StagingThresholds,
    audit: Option<&IdAudit>,
) -> Result<Selection> {
    if grid.is_empty() {
        return Err(Error::Validation("empty hyperparameter grid".into()));
    }
    if let Some(c) = grid.iter().find(|c| c.alpha != 0.0) {
        return Err(Error::Validation(format!(
            "selection runs at alpha = 0, got {}",
            c.alpha
        )));
    }
    let mut scores = Vec::with_capacity(grid.len());
    for c in grid {
        match kfold_cv(plan, cohort, c, &RegKind::None, thresholds, audit) {
            Ok(r) if r.mean_loss.is_finite() => scores.push(Some(r.mean_loss)),
            Ok(_) | Err(Error::Diverged { .. }) | Err(Error::Numerical(_)) => {
                log::warn!(
                    "config lr={} epochs={} failed numerically; skipped",
                    c.learning_rate,
                    c.epochs
                );
                scores.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            if best.is_none_or(|(_, b)| s < b) {
                best = Some((i, s));
            }
        }
    }
    let (i, _) = best.ok_or_else(|| Error::Numerical("every hyperparameter configuration diverged".into()))?;
    Ok(Selection {
        best: grid[i].clone(),
        scores,
    })
}
