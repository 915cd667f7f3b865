use riss_reg::cohort::synthetic::{generate_synthetic, SyntheticSpec};
use riss_reg::cohort::{Feature, Preprocessor};
use riss_reg::models::{AuxiliaryModel, FeaturePair, LogRegOptions, Predictor};
use riss_reg::regularization::aa_regularizer;
use riss_reg::staging::{RissStage, StagingThresholds};
use riss_reg::training::{train, Dataset, RegKind, TrainConfig, TrainMode};

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

fn within_stage_variance(h: &[f64], stages: &[RissStage]) -> f64 {
    let mut total = 0.0;
    for s in [RissStage::Stage1, RissStage::Stage2, RissStage::Stage3] {
        let v: Vec<f64> = h
            .iter()
            .zip(stages)
            .filter(|(_, t)| **t == s)
            .map(|(h, _)| *h)
            .collect();
        if v.len() > 1 {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            total += v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
        }
    }
    total
}

fn fixture() -> (Dataset, AuxiliaryModel) {
    let cohort = generate_synthetic(&SyntheticSpec {
        n_patients: 300,
        seed: 21,
        ..Default::default()
    })
    .unwrap();
    let pair = FeaturePair::new(Feature::Age, Feature::Ldh).unwrap();
    let aux = AuxiliaryModel::fit(cohort.records(), pair, &LogRegOptions::default()).unwrap();
    let pre = Preprocessor::fit(cohort.records().iter()).unwrap();
    let data = Dataset::from_records(cohort.records(), &pre, &StagingThresholds::default(), Some(&aux)).unwrap();
    (data, aux)
}

#[test]
fn strong_alignment_tracks_auxiliary_model() {
    let (data, aux) = fixture();
    let config = TrainConfig {
        learning_rate: 1e-3,
        epochs: 150,
        alpha: 1e3,
        seed: 5,
        ..Default::default()
    };
    let soft = data.soft_labels.clone().unwrap();
    let init = Predictor::new(&config.layer_sizes, config.seed).unwrap();
    let r0 = aa_regularizer(&soft, &init.predict(data.x.view()).unwrap()).unwrap();

    let out = train(&config, &data, &RegKind::AuxiliaryAlignment(aux), None).unwrap();
    let h = out.predictor.predict(data.x.view()).unwrap();
    let r1 = aa_regularizer(&soft, &h).unwrap();
    assert!(r1 < r0, "{r1} !< {r0}");
    let rho = pearson(&h, &soft);
    assert!(rho > 0.9, "pearson {rho}");
}

#[test]
fn reg_only_stage_consistency_shrinks_within_stage_spread() {
    let (data, _) = fixture();
    let config = TrainConfig {
        learning_rate: 0.05,
        epochs: 60,
        alpha: 1.0,
        mode: TrainMode::RegOnly,
        seed: 9,
        ..Default::default()
    };
    let init = Predictor::new(&config.layer_sizes, config.seed).unwrap();
    let v0 = within_stage_variance(&init.predict(data.x.view()).unwrap(), &data.stages);
    let out = train(&config, &data, &RegKind::StageConsistency, None).unwrap();
    let v1 = within_stage_variance(&out.predictor.predict(data.x.view()).unwrap(), &data.stages);
    assert!(v1 < v0, "{v1} !< {v0}");
    let first = out.trace.first().unwrap().train.reg_term;
    let last = out.trace.last().unwrap().train.reg_term;
    assert!(last < first);
}
