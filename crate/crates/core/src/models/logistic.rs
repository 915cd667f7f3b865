use ndarray::ArrayView2;

use super::{clip_prob, logistic_loss, sigmoid};
use crate::cohort::{Feature, PatientRecord, Preprocessor};
use crate::error::{Error, Result};

/// Two distinct input features of the auxiliary model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeaturePair(Feature, Feature);

impl FeaturePair {
    /// Stored in feature order regardless of argument order.
    pub fn new(a: Feature, b: Feature) -> Result<Self> {
        if a == b {
            return Err(Error::Validation(format!(
                "feature pair members must differ, got `{a}` twice"
            )));
        }
        Ok(if a < b { Self(a, b) } else { Self(b, a) })
    }

    pub fn from_names(a: &str, b: &str) -> Result<Self> {
        Self::new(a.parse()?, b.parse()?)
    }

    pub fn first(&self) -> Feature {
        self.0
    }

    pub fn second(&self) -> Feature {
        self.1
    }

    pub fn contains(&self, f: Feature) -> bool {
        self.0 == f || self.1 == f
    }

    pub fn features(&self) -> [Feature; 2] {
        [self.0, self.1]
    }
}

impl std::fmt::Display for FeaturePair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}+{}", self.0, self.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRegOptions {
    pub max_iter: usize,
    /// Stop once the gradient norm falls below this.
    pub grad_tol: f64,
    pub initial_step: f64,
}

impl Default for LogRegOptions {
    fn default() -> Self {
        Self {
            max_iter: 5_000,
            grad_tol: 1e-6,
            initial_step: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRegFit {
    pub weights: [f64; 2],
    pub bias: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub loss: f64,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Unclipped mean cross-entropy of the linear model and its gradient.
fn loss_and_grad(x: &ArrayView2<f64>, y: &[f64], w: [f64; 2], b: f64) -> (f64, [f64; 3]) {
    let n = y.len() as f64;
    let mut loss = 0.0;
    let mut g = [0.0; 3];
    for (row, &yi) in x.rows().into_iter().zip(y) {
        let z = w[0] * row[0] + w[1] * row[1] + b;
        loss += softplus(z) - yi * z;
        let r = sigmoid(z) - yi;
        g[0] += r * row[0];
        g[1] += r * row[1];
        g[2] += r;
    }
    (loss / n, [g[0] / n, g[1] / n, g[2] / n])
}

/// Unregularized logistic regression on two columns by full-batch gradient
/// descent with Armijo backtracking. The step grows again after each
/// accepted iteration.
pub fn fit_logreg(x: ArrayView2<f64>, y: &[f64], opt: &LogRegOptions) -> Result<LogRegFit> {
    if x.ncols() != 2 {
        return Err(Error::Validation(format!("expected 2 columns, got {}", x.ncols())));
    }
    if x.nrows() != y.len() {
        return Err(Error::Validation("row count and label count differ".into()));
    }
    if y.len() < 2 {
        return Err(Error::DegenerateFit("need at least two samples".into()));
    }
    let positives = y.iter().filter(|&&v| v > 0.5).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::DegenerateFit("only one class present".into()));
    }

    let mut w = [0.0; 2];
    let mut b = 0.0;
    let (mut loss, mut g) = loss_and_grad(&x, y, w, b);
    let mut step = opt.initial_step;
    let mut iterations = 0;
    let norm = |g: &[f64; 3]| (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
    while iterations < opt.max_iter && norm(&g) >= opt.grad_tol {
        iterations += 1;
        let gg = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
        let mut accepted = false;
        for _ in 0..60 {
            let nw = [w[0] - step * g[0], w[1] - step * g[1]];
            let nb = b - step * g[2];
            let (nl, ng) = loss_and_grad(&x, y, nw, nb);
            if nl <= loss - 0.5 * step * gg {
                w = nw;
                b = nb;
                loss = nl;
                g = ng;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        step = (step * 2.0).min(1e6);
    }
    if !(loss.is_finite() && w.iter().all(|v| v.is_finite()) && b.is_finite()) {
        return Err(Error::Numerical(
            "logistic regression produced non-finite parameters".into(),
        ));
    }
    Ok(LogRegFit {
        weights: w,
        bias: b,
        iterations,
        grad_norm: norm(&g),
        loss,
    })
}

/// Frozen two-feature logistic model. Raw records go through the model's own
/// imputation and standardization before the linear part.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryModel {
    pub pair: FeaturePair,
    pub weights: [f64; 2],
    pub bias: f64,
    pub preprocessing: Preprocessor,
}

impl AuxiliaryModel {
    /// Fits preprocessing and weights on `records`.
    pub fn fit(records: &[PatientRecord], pair: FeaturePair, opt: &LogRegOptions) -> Result<Self> {
        let preprocessing = Preprocessor::fit(records.iter())?;
        let x = pair_matrix(records, pair, &preprocessing);
        let y: Vec<f64> = records.iter().map(|r| f64::from(r.label())).collect();
        let fit = fit_logreg(x.view(), &y, opt)?;
        Ok(Self {
            pair,
            weights: fit.weights,
            bias: fit.bias,
            preprocessing,
        })
    }

    /// Soft label from already standardized pair values.
    pub fn predict_standardized(&self, x_pair: [f64; 2]) -> f64 {
        clip_prob(sigmoid(
            self.weights[0] * x_pair[0] + self.weights[1] * x_pair[1] + self.bias,
        ))
    }

    pub fn predict(&self, r: &PatientRecord) -> f64 {
        let [a, b] = self.pair.features();
        self.predict_standardized([self.preprocessing.value(r, a), self.preprocessing.value(r, b)])
    }

    pub fn predict_all(&self, records: &[PatientRecord]) -> Vec<f64> {
        records.iter().map(|r| self.predict(r)).collect()
    }

    pub fn mean_loss(&self, records: &[PatientRecord]) -> f64 {
        if records.is_empty() {
            return f64::NAN;
        }
        records
            .iter()
            .map(|r| logistic_loss(self.predict(r), f64::from(r.label())))
            .sum::<f64>()
            / records.len() as f64
    }
}

pub(crate) fn pair_matrix(records: &[PatientRecord], pair: FeaturePair, p: &Preprocessor) -> ndarray::Array2<f64> {
    let [a, b] = pair.features();
    let mut x = ndarray::Array2::zeros((records.len(), 2));
    for (i, r) in records.iter().enumerate() {
        x[[i, 0]] = p.value(r, a);
        x[[i, 1]] = p.value(r, b);
    }
    x
}
