use riss_reg::cohort::synthetic::{empirical_stage_rates, generate_synthetic, SyntheticSpec, TARGET_STAGE_RATES};
use riss_reg::staging::{stage_cohort, StagingThresholds};

#[test]
fn default_cohort_matches_targets() {
    let spec = SyntheticSpec::default();
    let cohort = generate_synthetic(&spec).unwrap();
    assert_eq!(cohort.len(), 812);
    let rate = cohort.death_rate();
    assert!((0.45..=0.58).contains(&rate), "death rate {rate}");
    let rates = empirical_stage_rates(&cohort, &StagingThresholds::default()).unwrap();
    for (r, t) in rates.iter().zip(TARGET_STAGE_RATES) {
        assert!((r - t).abs() <= 0.06, "{rates:?}");
    }
    let counts = stage_cohort(&cohort, &StagingThresholds::default()).unwrap().counts();
    assert!(counts.iter().all(|&c| c > 0), "{counts:?}");
}

#[test]
fn seeds_change_the_cohort_but_not_its_shape() {
    let a = generate_synthetic(&SyntheticSpec {
        n_patients: 100,
        seed: 1,
        ..Default::default()
    })
    .unwrap();
    let b = generate_synthetic(&SyntheticSpec {
        n_patients: 100,
        seed: 2,
        ..Default::default()
    })
    .unwrap();
    assert_eq!(a.len(), b.len());
    assert_ne!(a.labels(), b.labels());
}
