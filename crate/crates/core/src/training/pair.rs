use rayon::prelude::*;

use super::{CvPlan, IdAudit, Role};
use crate::cohort::{Cohort, Feature};
use crate::error::{Error, Result};
use crate::models::{AuxiliaryModel, FeaturePair, LogRegOptions};

/// All unordered pairs of distinct candidates, in lexicographic order of
/// candidate position.
pub fn all_pairs(candidates: &[Feature]) -> Result<Vec<FeaturePair>> {
    let mut out = Vec::new();
    for (i, &a) in candidates.iter().enumerate() {
        for &b in &candidates[i + 1..] {
            out.push(FeaturePair::new(a, b)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairScore {
    pub pair: FeaturePair,
    /// Mean validation loss over folds; `None` when a fold fit was degenerate.
    pub mean_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PairSearch {
    pub best: FeaturePair,
    /// The winning pair refit on the auxiliary split.
    pub model: AuxiliaryModel,
    pub scores: Vec<PairScore>,
}

/// Scores every pair by k-fold validation loss of a two-feature logistic
/// regression on `kf`, then refits the argmin pair on `aux`. Ties go to the
/// earlier pair.
pub fn search_aux_pair(
    candidates: &[Feature],
    plan: &CvPlan,
    kf: &Cohort,
    aux: &Cohort,
    opt: &LogRegOptions,
    audit: Option<&IdAudit>,
) -> Result<PairSearch> {
    if candidates.len() < 2 {
        return Err(Error::Validation(
            "pair search needs at least two candidate features".into(),
        ));
    }
    if plan.folds.len() != kf.len() {
        return Err(Error::Validation("CV plan does not cover the selection set".into()));
    }
    let kf_ids: std::collections::HashSet<&str> = kf.ids().into_iter().collect();
    if aux.ids().iter().any(|id| kf_ids.contains(id)) {
        return Err(Error::Validation("auxiliary and selection sets overlap".into()));
    }
    plan.record_folds(kf, "pair_search", audit);
    let pairs = all_pairs(candidates)?;
    let folds: Vec<_> = (0..plan.k).map(|f| plan.fold_records(kf, f)).collect();
    let scores: Vec<PairScore> = pairs
        .par_iter()
        .map(|&pair| -> Result<PairScore> {
            let mut total = 0.0;
            for (f, (tr, va)) in folds.iter().enumerate() {
                match AuxiliaryModel::fit(tr, pair, opt) {
                    Ok(m) => total += m.mean_loss(va),
                    Err(Error::DegenerateFit(msg)) => {
                        log::warn!("pair {pair} fold {f}: degenerate fit skipped ({msg})");
                        return Ok(PairScore { pair, mean_loss: None });
                    }
                    Err(e) => return Err(e),
                }
            }
            let mean = total / folds.len() as f64;
            Ok(PairScore {
                pair,
                mean_loss: mean.is_finite().then_some(mean),
            })
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(FeaturePair, f64)> = None;
    for s in &scores {
        if let Some(l) = s.mean_loss {
            if best.is_none_or(|(_, b)| l < b) {
                best = Some((s.pair, l));
            }
        }
    }
    let (best, _) = best.ok_or_else(|| Error::DegenerateFit("every candidate pair was degenerate".into()))?;
    if let Some(a) = audit {
        a.record("aux_fit", Role::Fit, &aux.ids());
    }
    let model = AuxiliaryModel::fit(aux.records(), best, opt)?;
    Ok(PairSearch { best, model, scores })
}
