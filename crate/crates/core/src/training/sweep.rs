use std::io::Write;

use rayon::prelude::*;

use super::{train, Dataset, IdAudit, RegKind, Role, TrainConfig};
use crate::error::{Error, Result};
use crate::evaluation::{accuracy, auc};
use crate::models::{LossReport, Predictor};
use crate::regularization::{objective, Regularizer, RegularizerSpec};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Initialization seed for one grid point: `seed ^ splitmix64(alpha bits)`.
pub fn alpha_seed(seed: u64, alpha: f64) -> u64 {
    seed ^ splitmix64(alpha.to_bits())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub accuracy: f64,
    pub auc: Option<f64>,
    pub loss1: f64,
    pub reg_loss: f64,
}

impl SweepRow {
    fn failed(alpha: f64) -> Self {
        Self {
            alpha,
            accuracy: f64::NAN,
            auc: None,
            loss1: f64::NAN,
            reg_loss: f64::NAN,
        }
    }

    fn evaluate(p: &Predictor, data: &Dataset, spec: &RegularizerSpec) -> Result<Self> {
        let h = p.predict(data.x.view())?;
        let value = objective(p, &data.batch(), spec)?;
        Ok(Self {
            alpha: spec.alpha,
            accuracy: accuracy(&h, &data.y)?,
            auc: auc(&h, &data.y)?,
            loss1: LossReport::new(&h, &data.y).mean_logistic_loss,
            reg_loss: value.reg_term,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SweepFit {
    pub predictor: Predictor,
    pub test: SweepRow,
    pub train: SweepRow,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub alpha: f64,
    pub outcome: std::result::Result<SweepFit, String>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub reg: &'static str,
    /// Regularizer bound to the training set; its stage means are the ones
    /// used for test-time reporting.
    pub regularizer: Regularizer,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn test_rows(&self) -> Vec<SweepRow> {
        self.rows(|f| f.test)
    }

    pub fn train_rows(&self) -> Vec<SweepRow> {
        self.rows(|f| f.train)
    }

    fn rows(&self, pick: impl Fn(&SweepFit) -> SweepRow) -> Vec<SweepRow> {
        self.points
            .iter()
            .map(|p| match &p.outcome {
                Ok(f) => pick(f),
                Err(_) => SweepRow::failed(p.alpha),
            })
            .collect()
    }

    pub fn model(&self, alpha: f64) -> Option<&Predictor> {
        self.points
            .iter()
            .find(|p| p.alpha == alpha)
            .and_then(|p| p.outcome.as_ref().ok())
            .map(|f| &f.predictor)
    }
}

/// Trains one model per alpha on `train_set` with a fresh seed-derived
/// initialization and evaluates it on both sets. Test-time regularizer
/// values use the stage means and auxiliary model frozen from training.
/// A failing grid point is recorded and the sweep continues.
pub fn run_sweep(
    alphas: &[f64],
    base: &TrainConfig,
    reg: &RegKind,
    train_set: &Dataset,
    test_set: &Dataset,
    audit: Option<&IdAudit>,
) -> Result<SweepResult> {
    if alphas.is_empty() {
        return Err(Error::Validation("empty alpha grid".into()));
    }
    if alphas.iter().any(|a| !(a.is_finite() && *a >= 0.0)) || alphas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation(
            "alpha grid must be finite, >= 0 and strictly increasing".into(),
        ));
    }
    if let Some(a) = audit {
        a.record("sweep/train", Role::Fit, &train_set.ids);
        a.record("sweep/test", Role::Evaluate, &test_set.ids);
    }
    let regularizer = reg.bind(train_set);
    let points = alphas
        .par_iter()
        .map(|&alpha| {
            let config = TrainConfig {
                alpha,
                seed: alpha_seed(base.seed, alpha),
                ..base.clone()
            };
            let spec = RegularizerSpec {
                kind: regularizer.clone(),
                alpha,
            };
            let fit = train(&config, train_set, reg, None).and_then(|out| {
                Ok(SweepFit {
                    test: SweepRow::evaluate(&out.predictor, test_set, &spec)?,
                    train: SweepRow::evaluate(&out.predictor, train_set, &spec)?,
                    predictor: out.predictor,
                })
            });
            if let Err(e) = &fit {
                log::warn!("alpha {alpha}: {e}");
            }
            SweepPoint {
                alpha,
                outcome: fit.map_err(|e| e.to_string()),
            }
        })
        .collect();
    Ok(SweepResult {
        reg: reg.tag(),
        regularizer,
        points,
    })
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// `alpha,accuracy,auc`
pub fn write_metrics_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["alpha", "accuracy", "auc"])?;
    for r in rows {
        out.write_record([fmt(r.alpha), fmt(r.accuracy), r.auc.map(fmt).unwrap_or_default()])?;
    }
    out.flush()?;
    Ok(())
}

/// `alpha,loss1,reg_loss`
pub fn write_loss_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["alpha", "loss1", "reg_loss"])?;
    for r in rows {
        out.write_record([fmt(r.alpha), fmt(r.loss1), fmt(r.reg_loss)])?;
    }
    out.flush()?;
    Ok(())
}
