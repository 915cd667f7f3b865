use std::io::Write;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cohort::{Feature, N_FEATURES};
use crate::error::{Error, Result};
use crate::models::Predictor;

/// Largest feature subset enumerated exactly.
pub const MAX_EXACT_FEATURES: usize = 12;
pub const DEFAULT_PERMUTATIONS: usize = 2000;

/// A scalar model evaluated on a batch of rows.
pub trait ValueFunction: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: ArrayView2<f64>) -> Result<Vec<f64>>;
}

impl ValueFunction for Predictor {
    fn dim(&self) -> usize {
        self.input_dim()
    }

    fn eval(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        self.predict(x)
    }
}

/// Wraps a row-wise closure.
pub struct FnModel<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> ValueFunction for FnModel<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(x.rows().into_iter().map(|r| (self.f)(&r.to_vec())).collect())
    }
}

fn check_dims(model: &dyn ValueFunction, x: &[f64], baseline: &[f64]) -> Result<()> {
    if x.len() != model.dim() || baseline.len() != model.dim() {
        return Err(Error::Validation(format!(
            "instance and baseline must have {} values",
            model.dim()
        )));
    }
    Ok(())
}

/// Exact Shapley values over `subset` by enumerating all coalitions. Absent
/// subset features take the baseline value; features outside the subset stay
/// at `x`. Entries outside the subset are zero.
pub fn shapley_exact(model: &dyn ValueFunction, x: &[f64], baseline: &[f64], subset: &[usize]) -> Result<Vec<f64>> {
    check_dims(model, x, baseline)?;
    let k = subset.len();
    if k > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeatures {
            requested: k,
            max: MAX_EXACT_FEATURES,
        });
    }
    if subset.iter().any(|&i| i >= x.len()) {
        return Err(Error::Validation("subset index out of range".into()));
    }
    let d = x.len();
    let n_coal = 1usize << k;
    let mut rows = Array2::zeros((n_coal, d));
    for mask in 0..n_coal {
        let mut row = rows.row_mut(mask);
        for j in 0..d {
            row[j] = x[j];
        }
        for (b, &j) in subset.iter().enumerate() {
            if mask & (1 << b) == 0 {
                row[j] = baseline[j];
            }
        }
    }
    let v = model.eval(rows.view())?;
    // weight(|S|) = |S|! (k - |S| - 1)! / k!
    let mut fact = vec![1.0f64; k + 1];
    for i in 1..=k {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut phi = vec![0.0; d];
    for (b, &j) in subset.iter().enumerate() {
        let bit = 1usize << b;
        let mut acc = 0.0;
        for mask in 0..n_coal {
            if mask & bit == 0 {
                let s = mask.count_ones() as usize;
                let w = fact[s] * fact[k - s - 1] / fact[k];
                acc += w * (v[mask | bit] - v[mask]);
            }
        }
        phi[j] = acc;
    }
    Ok(phi)
}

/// Permutation-sampling estimate of the Shapley values of all features:
/// the mean marginal contribution of each feature when features switch from
/// baseline to `x` in random order. Deterministic in `seed`.
pub fn shapley_sampled(
    model: &dyn ValueFunction,
    x: &[f64],
    baseline: &[f64],
    n_permutations: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_dims(model, x, baseline)?;
    if n_permutations == 0 {
        return Err(Error::Validation("at least one permutation is required".into()));
    }
    let d = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..d).collect();
    let mut phi = vec![0.0; d];
    const CHUNK: usize = 256;
    let mut done = 0;
    while done < n_permutations {
        let m = CHUNK.min(n_permutations - done);
        let mut perms = Vec::with_capacity(m);
        let mut rows = Array2::zeros((m * (d + 1), d));
        for p in 0..m {
            perm.shuffle(&mut rng);
            let base = p * (d + 1);
            let mut cur = baseline.to_vec();
            for (step, &j) in std::iter::once(&usize::MAX).chain(perm.iter()).enumerate() {
                if j != usize::MAX {
                    cur[j] = x[j];
                }
                rows.row_mut(base + step).assign(&ndarray::ArrayView1::from(&cur));
            }
            perms.push(perm.clone());
        }
        let v = model.eval(rows.view())?;
        for (p, order) in perms.iter().enumerate() {
            let base = p * (d + 1);
            for (step, &j) in order.iter().enumerate() {
                phi[j] += v[base + step + 1] - v[base + step];
            }
        }
        done += m;
    }
    for p in &mut phi {
        *p /= n_permutations as f64;
    }
    Ok(phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapMethod {
    Exact,
    PermutationSampled { n_permutations: usize, seed: u64 },
}

impl std::fmt::Display for ShapMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ShapMethod::Exact => write!(f, "exact"),
            ShapMethod::PermutationSampled { n_permutations, seed } => {
                write!(f, "permutation_sampled(n={n_permutations},seed={seed})")
            }
        }
    }
}

/// Mean absolute Shapley value per feature over a dataset and the induced
/// ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapReport {
    pub mean_abs: Vec<f64>,
    /// Features from most to least important; ties keep feature order.
    pub ranking: Vec<Feature>,
    pub method: ShapMethod,
    pub baseline: Vec<f64>,
}

impl ShapReport {
    /// 1-based rank of a feature.
    pub fn rank_of(&self, f: Feature) -> usize {
        self.ranking
            .iter()
            .position(|&g| g == f)
            .expect("ranking covers every feature")
            + 1
    }

    pub fn top(&self, n: usize) -> &[Feature] {
        &self.ranking[..n.min(self.ranking.len())]
    }
}

pub fn rank_features(mean_abs: &[f64]) -> Vec<Feature> {
    let mut order: Vec<usize> = (0..mean_abs.len()).collect();
    order.sort_by(|&a, &b| mean_abs[b].total_cmp(&mean_abs[a]));
    order.into_iter().map(|i| Feature::ALL[i]).collect()
}

fn instance_seed(seed: u64, i: usize) -> u64 {
    crate::training::alpha_seed(seed, i as f64)
}

/// Shapley attribution of a network over every row of `x` (standardized
/// inputs), against the zero vector as baseline.
pub fn shap_report(model: &Predictor, x: ArrayView2<f64>, method: ShapMethod) -> Result<ShapReport> {
    if model.input_dim() != N_FEATURES || x.ncols() != N_FEATURES {
        return Err(Error::Validation(format!("shap reports need {N_FEATURES} features")));
    }
    if x.nrows() == 0 {
        return Err(Error::Empty("shap report over no instances".into()));
    }
    let baseline = vec![0.0; N_FEATURES];
    let all: Vec<usize> = (0..N_FEATURES).collect();
    let per_instance: Vec<Vec<f64>> = (0..x.nrows())
        .into_par_iter()
        .map(|i| {
            let row = x.row(i).to_vec();
            match method {
                ShapMethod::Exact => shapley_exact(model, &row, &baseline, &all),
                ShapMethod::PermutationSampled { n_permutations, seed } => {
                    shapley_sampled(model, &row, &baseline, n_permutations, instance_seed(seed, i))
                }
            }
        })
        .collect::<Result<_>>()?;
    let mut mean_abs = vec![0.0; N_FEATURES];
    for phi in &per_instance {
        for (m, p) in mean_abs.iter_mut().zip(phi) {
            *m += p.abs();
        }
    }
    for m in &mut mean_abs {
        *m /= per_instance.len() as f64;
    }
    Ok(ShapReport {
        ranking: rank_features(&mean_abs),
        mean_abs,
        method,
        baseline,
    })
}

/// One report per alpha.
pub fn shap_rank_table(
    models: &[(f64, &Predictor)],
    x: ArrayView2<f64>,
    method: ShapMethod,
) -> Result<Vec<(f64, ShapReport)>> {
    models
        .iter()
        .map(|&(alpha, p)| Ok((alpha, shap_report(p, x, method)?)))
        .collect()
}

/// `alpha,rank1,rank2,rank3`: names of the three most important features.
pub fn write_shap_ranks_aa<W: Write>(table: &[(f64, ShapReport)], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["alpha", "rank1", "rank2", "rank3"])?;
    for (alpha, r) in table {
        let mut rec = vec![format!("{alpha}")];
        rec.extend(r.top(3).iter().map(|f| f.column().to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// `alpha,ldh_rank,albumin_rank,b2m_rank,age_rank`: ranks of the staging
/// variables.
pub fn write_shap_ranks_stage<W: Write>(table: &[(f64, ShapReport)], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["alpha", "ldh_rank", "albumin_rank", "b2m_rank", "age_rank"])?;
    for (alpha, r) in table {
        out.write_record([
            format!("{alpha}"),
            r.rank_of(Feature::Ldh).to_string(),
            r.rank_of(Feature::Albumin).to_string(),
            r.rank_of(Feature::B2m).to_string(),
            r.rank_of(Feature::Age).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(w: Vec<f64>) -> FnModel<impl Fn(&[f64]) -> f64 + Sync> {
        let dim = w.len();
        FnModel {
            dim,
            f: move |x: &[f64]| x.iter().zip(&w).map(|(a, b)| a * b).sum(),
        }
    }

    #[test]
    fn additive_model_exact() {
        let m = linear(vec![1.0, -2.0, 0.5]);
        let x = [1.0, 2.0, 3.0];
        let b = [0.5, 0.0, 1.0];
        let phi = shapley_exact(&m, &x, &b, &[0, 1, 2]).unwrap();
        for (j, w) in [1.0, -2.0, 0.5].iter().enumerate() {
            assert!((phi[j] - w * (x[j] - b[j])).abs() < 1e-12);
        }
    }

    #[test]
    fn single_feature_and_symmetry() {
        let m = FnModel {
            dim: 1,
            f: |x: &[f64]| x[0] * x[0],
        };
        let phi = shapley_exact(&m, &[3.0], &[1.0], &[0]).unwrap();
        assert!((phi[0] - 8.0).abs() < 1e-12);

        let m = FnModel {
            dim: 3,
            f: |x: &[f64]| x[0] * x[1] + x[2],
        };
        let phi = shapley_exact(&m, &[2.0, 2.0, 1.0], &[0.0; 3], &[0, 1, 2]).unwrap();
        assert!((phi[0] - phi[1]).abs() < 1e-12);
        assert!((phi.iter().sum::<f64>() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn pinned_features_and_limits() {
        let m = linear(vec![1.0, 1.0, 1.0]);
        let phi = shapley_exact(&m, &[1.0, 1.0, 1.0], &[0.0; 3], &[0, 2]).unwrap();
        assert_eq!(phi[1], 0.0);
        let big = linear(vec![0.0; 13]);
        let all: Vec<usize> = (0..13).collect();
        assert!(matches!(
            shapley_exact(&big, &[0.0; 13], &[0.0; 13], &all),
            Err(Error::TooManyFeatures { requested: 13, max: 12 })
        ));
    }

    #[test]
    fn sampled_is_exact_on_linear_models_and_seeded() {
        let m = linear(vec![1.0, -2.0, 0.5, 3.0]);
        let x = [1.0, 2.0, 3.0, -1.0];
        let phi = shapley_sampled(&m, &x, &[0.0; 4], 50, 1).unwrap();
        for (j, w) in [1.0, -2.0, 0.5, 3.0].iter().enumerate() {
            assert!((phi[j] - w * x[j]).abs() < 1e-12);
        }
        let n = FnModel {
            dim: 3,
            f: |x: &[f64]| (x[0] * x[1]).sin() + x[2] * x[0],
        };
        let a = shapley_sampled(&n, &[1.0, 2.0, 3.0], &[0.0; 3], 300, 4).unwrap();
        let b = shapley_sampled(&n, &[1.0, 2.0, 3.0], &[0.0; 3], 300, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dummy_feature_has_zero_attribution() {
        let mut p = Predictor::new(&[4, 5, 1], 3).unwrap();
        let mut flat = p.params_flat();
        // first-layer weights are row-major (out, in); zero column 2
        for o in 0..5 {
            flat[o * 4 + 2] = 0.0;
        }
        p.set_params_flat(&flat).unwrap();
        let phi = shapley_exact(&p, &[0.3, -1.0, 2.0, 0.7], &[0.0; 4], &[0, 1, 2, 3]).unwrap();
        assert_eq!(phi[2], 0.0);
    }

    #[test]
    fn ranking_ties_keep_feature_order() {
        let mut m = vec![0.0; N_FEATURES];
        m[Feature::Ldh.index()] = 1.0;
        m[Feature::Age.index()] = 0.5;
        m[Feature::B2m.index()] = 0.5;
        let r = rank_features(&m);
        assert_eq!(&r[..3], &[Feature::Ldh, Feature::Age, Feature::B2m]);
    }
}
