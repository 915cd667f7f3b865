use std::collections::HashSet;

use ndarray::Array2;

use super::{Cohort, Feature, PatientRecord, N_FEATURES};
use crate::error::{Error, Result};

/// Per-feature mean of observed values over a fit set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImputeMeans(pub [f64; N_FEATURES]);

impl ImputeMeans {
    pub fn get(&self, f: Feature) -> f64 {
        self.0[f.index()]
    }

    pub fn impute(&self, r: &PatientRecord, f: Feature) -> f64 {
        r.get(f).unwrap_or(self.0[f.index()])
    }
}

/// Per-feature (mean, population stddev) of the imputed fit set. A stddev of
/// zero marks a constant column, which transforms to 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardizeStats {
    pub mean: [f64; N_FEATURES],
    pub std: [f64; N_FEATURES],
}

impl StandardizeStats {
    pub fn is_constant(&self, f: Feature) -> bool {
        self.std[f.index()] == 0.0
    }

    #[inline]
    pub fn apply(&self, f: Feature, value: f64) -> f64 {
        let i = f.index();
        if self.std[i] == 0.0 {
            0.0
        } else {
            (value - self.mean[i]) / self.std[i]
        }
    }
}

/// Imputation followed by z-scoring, both fitted on the same records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preprocessor {
    pub means: ImputeMeans,
    pub stats: StandardizeStats,
}

fn select<'a>(cohort: &'a Cohort, fit_ids: &[&str]) -> Result<Vec<&'a PatientRecord>> {
    if fit_ids.is_empty() {
        return Err(Error::Empty("fit set has no records".into()));
    }
    let wanted: HashSet<&str> = fit_ids.iter().copied().collect();
    let chosen: Vec<_> = cohort
        .records()
        .iter()
        .filter(|r| wanted.contains(r.id.as_str()))
        .collect();
    if chosen.len() != wanted.len() {
        return Err(Error::Validation(
            "fit set references ids that are not in the cohort".into(),
        ));
    }
    Ok(chosen)
}

fn impute_means_of<'a>(records: impl Iterator<Item = &'a PatientRecord>) -> Result<ImputeMeans> {
    let mut sum = [0.0; N_FEATURES];
    let mut count = [0usize; N_FEATURES];
    let mut n = 0usize;
    for r in records {
        n += 1;
        for f in Feature::ALL {
            if let Some(v) = r.get(f) {
                sum[f.index()] += v;
                count[f.index()] += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::Empty("fit set has no records".into()));
    }
    let mut means = [0.0; N_FEATURES];
    for f in Feature::ALL {
        let i = f.index();
        if count[i] == 0 {
            return Err(Error::NoObservedValues(f.column().to_string()));
        }
        means[i] = sum[i] / count[i] as f64;
    }
    Ok(ImputeMeans(means))
}

fn standardize_stats_of<'a>(
    records: impl Iterator<Item = &'a PatientRecord> + Clone,
    means: &ImputeMeans,
) -> StandardizeStats {
    let n = records.clone().count() as f64;
    let mut mean = [0.0; N_FEATURES];
    let mut std = [0.0; N_FEATURES];
    for f in Feature::ALL {
        let i = f.index();
        let mu = records.clone().map(|r| means.impute(r, f)).sum::<f64>() / n;
        let var = records
            .clone()
            .map(|r| {
                let d = means.impute(r, f) - mu;
                d * d
            })
            .sum::<f64>()
            / n;
        mean[i] = mu;
        let sd = var.sqrt();
        // Columns whose spread is pure rounding noise count as constant.
        std[i] = if sd <= 1e-12 * mu.abs().max(1.0) { 0.0 } else { sd };
    }
    StandardizeStats { mean, std }
}

/// Mean of observed values of each feature over the records with `fit_ids`.
pub fn fit_imputer(cohort: &Cohort, fit_ids: &[&str]) -> Result<ImputeMeans> {
    impute_means_of(select(cohort, fit_ids)?.into_iter())
}

/// Standardization statistics of the imputed fit set.
pub fn fit_standardizer(cohort: &Cohort, fit_ids: &[&str], means: &ImputeMeans) -> Result<StandardizeStats> {
    let recs = select(cohort, fit_ids)?;
    Ok(standardize_stats_of(recs.iter().copied(), means))
}

impl Preprocessor {
    pub fn fit<'a>(records: impl Iterator<Item = &'a PatientRecord> + Clone) -> Result<Self> {
        let means = impute_means_of(records.clone())?;
        let stats = standardize_stats_of(records, &means);
        Ok(Self { means, stats })
    }

    pub fn fit_ids(cohort: &Cohort, fit_ids: &[&str]) -> Result<Self> {
        let recs = select(cohort, fit_ids)?;
        Self::fit(recs.iter().copied())
    }

    #[inline]
    pub fn value(&self, r: &PatientRecord, f: Feature) -> f64 {
        self.stats.apply(f, self.means.impute(r, f))
    }

    pub fn transform_record(&self, r: &PatientRecord) -> [f64; N_FEATURES] {
        let mut out = [0.0; N_FEATURES];
        for f in Feature::ALL {
            out[f.index()] = self.value(r, f);
        }
        out
    }

    pub fn transform(&self, records: &[PatientRecord]) -> Array2<f64> {
        let mut x = Array2::zeros((records.len(), N_FEATURES));
        for (i, r) in records.iter().enumerate() {
            for f in Feature::ALL {
                x[[i, f.index()]] = self.value(r, f);
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::test_support::record;

    fn with_hemoglobin(id: &str, hb: Option<f64>, albumin: f64) -> PatientRecord {
        let mut v = *record(id, 60.0, albumin, 200.0, 3.0, 0).values();
        v[Feature::Hemoglobin.index()] = hb;
        PatientRecord::new(id, v, 0).unwrap()
    }

    fn fixture() -> Cohort {
        Cohort::new(vec![
            with_hemoglobin("a", Some(1.0), 30.0),
            with_hemoglobin("b", Some(2.0), 40.0),
            with_hemoglobin("c", None, 50.0),
            with_hemoglobin("t", None, 45.0),
        ])
        .unwrap()
    }

    #[test]
    fn mean_of_observed_values() {
        let c = fixture();
        let means = fit_imputer(&c, &["a", "b", "c"]).unwrap();
        assert_eq!(means.get(Feature::Hemoglobin), 1.5);
        assert_eq!(means.get(Feature::Albumin), 40.0);
    }

    #[test]
    fn held_out_record_uses_fit_statistics() {
        let c = fixture();
        let p = Preprocessor::fit_ids(&c, &["a", "b", "c"]).unwrap();
        let before = p;
        let t = &c.records()[3];
        // Imputed fit column is {1, 2, 1.5}: mean 1.5, so the missing test value maps to 0.
        assert_eq!(p.means.impute(t, Feature::Hemoglobin), 1.5);
        assert_eq!(p.value(t, Feature::Hemoglobin), 0.0);
        // Albumin fit column {30, 40, 50}: mean 40, population sd sqrt(200/3).
        let sd = (200.0f64 / 3.0).sqrt();
        assert!((p.value(t, Feature::Albumin) - 5.0 / sd).abs() < 1e-12);
        let _ = p.transform(c.records());
        assert_eq!(p, before);
    }

    #[test]
    fn no_observed_values_names_feature() {
        let c = fixture();
        match fit_imputer(&c, &["c", "t"]) {
            Err(Error::NoObservedValues(name)) => assert_eq!(name, "hemoglobin"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(fit_imputer(&c, &[]), Err(Error::Empty(_))));
    }

    #[test]
    fn standardized_fit_columns_and_constant_columns() {
        let c = fixture();
        let p = Preprocessor::fit(c.records().iter()).unwrap();
        let x = p.transform(c.records());
        for f in Feature::ALL {
            let col = x.column(f.index());
            let mean = col.sum() / col.len() as f64;
            assert!(mean.abs() < 1e-9);
            if p.stats.is_constant(f) {
                assert!(col.iter().all(|&v| v == 0.0));
            } else {
                let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
                assert!((sd - 1.0).abs() < 1e-9);
            }
        }
        // LDH is 200 for every fixture record.
        assert!(p.stats.is_constant(Feature::Ldh));
    }

    #[test]
    fn unfitted_cohort_is_a_state_error() {
        let c = fixture();
        assert!(matches!(c.apply_impute_standardize(), Err(Error::State(_))));
    }
}
