use std::io::Write;

use crate::error::{Error, Result};
use crate::models::{AuxiliaryModel, Predictor};
use crate::training::Dataset;

pub const THRESHOLD: f64 = 0.5;

fn check(scores: &[f64], labels: &[f64]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Validation(format!(
            "{} scores against {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::Empty("metric over no samples".into()));
    }
    Ok(())
}

/// Fraction of samples where `score >= 0.5` agrees with the label.
pub fn accuracy(scores: &[f64], labels: &[f64]) -> Result<f64> {
    check(scores, labels)?;
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &y)| (s >= THRESHOLD) == (y >= 0.5))
        .count();
    Ok(correct as f64 / scores.len() as f64)
}

/// Mann-Whitney AUC with tied scores counted one half. `None` when only one
/// class is present.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<Option<f64>> {
    check(scores, labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numerical("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&y| y >= 0.5).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Ok(None);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Average 1-based ranks over runs of equal scores; doubled to stay integral.
    let mut pos_rank2: u64 = 0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let rank2 = (i + 1 + j + 1) as u64;
        for &k in &idx[i..=j] {
            if labels[k] >= 0.5 {
                pos_rank2 += rank2;
            }
        }
        i = j + 1;
    }
    let n_pos_u = n_pos as u64;
    let u2 = pos_rank2 - n_pos_u * (n_pos_u + 1);
    Ok(Some(u2 as f64 / (2.0 * n_pos as f64 * n_neg as f64)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub dataset: String,
    pub accuracy: f64,
    pub auc: Option<f64>,
    pub loss1: f64,
    pub reg_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub dataset: String,
    pub model: &'static str,
    pub acc: f64,
    pub auc: Option<f64>,
}

/// Accuracy and AUC of the auxiliary model, the stage-regularizer-only
/// network and the unregularized network on each named dataset. The datasets
/// must carry the auxiliary model's soft labels.
pub fn evaluate_baselines(
    aux: &AuxiliaryModel,
    stage_only: &Predictor,
    unregularized: &Predictor,
    datasets: &[(&str, &[crate::cohort::PatientRecord], &Dataset)],
) -> Result<Vec<BaselineRow>> {
    let mut rows = Vec::new();
    for (name, records, data) in datasets {
        let models: [(&'static str, Vec<f64>); 3] = [
            ("aux", aux.predict_all(records)),
            ("stage_based", stage_only.predict(data.x.view())?),
            ("ann_alpha0", unregularized.predict(data.x.view())?),
        ];
        for (model, h) in models {
            rows.push(BaselineRow {
                dataset: name.to_string(),
                model,
                acc: accuracy(&h, &data.y)?,
                auc: auc(&h, &data.y)?,
            });
        }
    }
    Ok(rows)
}

/// `dataset,model,acc,auc`
pub fn write_baselines_csv<W: Write>(rows: &[BaselineRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["dataset", "model", "acc", "auc"])?;
    for r in rows {
        out.write_record([
            r.dataset.clone(),
            r.model.to_string(),
            format!("{}", r.acc),
            r.auc.map(|a| format!("{a}")).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_auc(s: &[f64], y: &[f64]) -> Option<f64> {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..s.len() {
            for j in 0..s.len() {
                if y[i] == 1.0 && y[j] == 0.0 {
                    den += 1.0;
                    if s[i] > s[j] {
                        num += 1.0;
                    } else if s[i] == s[j] {
                        num += 0.5;
                    }
                }
            }
        }
        (den > 0.0).then(|| num / den)
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0.9, 0.1], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0.5, 0.5], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0.9, 0.2, 0.6, 0.4], &[1.0, 0.0, 0.0, 1.0]).unwrap(), 0.5);
        assert!(accuracy(&[0.9], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0.0, 0.0, 1.0, 1.0]).unwrap(), Some(1.0));
        assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &[0.0, 0.0, 1.0, 1.0]).unwrap(), Some(0.75));
        assert_eq!(auc(&[0.3, 0.3], &[0.0, 1.0]).unwrap(), Some(0.5));
        assert_eq!(auc(&[0.3, 0.4], &[1.0, 1.0]).unwrap(), None);
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise(data in prop::collection::vec((0u8..6, any::<bool>()), 2..40)) {
            let s: Vec<f64> = data.iter().map(|(v, _)| f64::from(*v) / 5.0).collect();
            let y: Vec<f64> = data.iter().map(|(_, b)| f64::from(u8::from(*b))).collect();
            let a = auc(&s, &y).unwrap();
            let b = brute_auc(&s, &y);
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                (None, None) => {}
                other => prop_assert!(false, "{:?}", other),
            }
        }
    }
}
