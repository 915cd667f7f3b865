//! R-ISS staging from B2M, LDH, albumin and age, without cytogenetics.

use std::fmt;
use std::io::Write;

use crate::cohort::{Cohort, PatientRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RissStage {
    Stage1,
    Stage2,
    Stage3,
}

impl RissStage {
    pub const ALL: [RissStage; 3] = [RissStage::Stage1, RissStage::Stage2, RissStage::Stage3];

    /// 0-based index for per-stage arrays.
    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(RissStage::Stage1),
            2 => Some(RissStage::Stage2),
            3 => Some(RissStage::Stage3),
            _ => None,
        }
    }
}

impl fmt::Display for RissStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Clinical cut-offs. LDH reference ranges differ between hospitals, hence
/// configurable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StagingThresholds {
    /// mg/L
    pub b2m_low: f64,
    /// mg/L
    pub b2m_high: f64,
    /// g/L
    pub albumin_min: f64,
    /// U/L, upper normal LDH below `age_cut`
    pub ldh_young: f64,
    /// U/L, upper normal LDH at or above `age_cut`
    pub ldh_old: f64,
    /// years
    pub age_cut: f64,
}

impl Default for StagingThresholds {
    fn default() -> Self {
        Self {
            b2m_low: 3.5,
            b2m_high: 5.5,
            albumin_min: 35.0,
            ldh_young: 235.0,
            ldh_old: 255.0,
            age_cut: 70.0,
        }
    }
}

impl StagingThresholds {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.b2m_low,
            self.b2m_high,
            self.albumin_min,
            self.ldh_young,
            self.ldh_old,
            self.age_cut,
        ];
        if all.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Validation(
                "staging thresholds must be finite and positive".into(),
            ));
        }
        if self.b2m_low >= self.b2m_high {
            return Err(Error::Validation("b2m_low must be below b2m_high".into()));
        }
        if self.ldh_young >= self.ldh_old {
            return Err(Error::Validation("ldh_young must be below ldh_old".into()));
        }
        Ok(())
    }
}

/// Stage of one patient. Inputs must be finite and non-negative.
pub fn riss_stage(b2m: f64, ldh: f64, albumin: f64, age: f64, t: &StagingThresholds) -> Result<RissStage> {
    for (name, v) in [("b2m", b2m), ("ldh", ldh), ("albumin", albumin), ("age", age)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Domain {
                id: String::new(),
                message: format!("{name} must be finite and non-negative, got {v}"),
            });
        }
    }
    let high_ldh = if age < t.age_cut {
        ldh > t.ldh_young
    } else {
        ldh > t.ldh_old
    };
    Ok(if b2m < t.b2m_low && albumin >= t.albumin_min && !high_ldh {
        RissStage::Stage1
    } else if b2m >= t.b2m_high && high_ldh {
        RissStage::Stage3
    } else {
        RissStage::Stage2
    })
}

pub fn stage_record(r: &PatientRecord, t: &StagingThresholds) -> Result<RissStage> {
    riss_stage(r.b2m(), r.ldh(), r.albumin(), r.age(), t).map_err(|e| match e {
        Error::Domain { message, .. } => Error::Domain {
            id: r.id.clone(),
            message,
        },
        other => other,
    })
}

/// Per-record stages plus the index sets of each stage.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StageAssignment {
    pub stages: Vec<RissStage>,
    /// Record indices per stage, ascending.
    pub sets: [Vec<usize>; 3],
}

impl StageAssignment {
    pub fn from_stages(stages: Vec<RissStage>) -> Self {
        let mut sets: [Vec<usize>; 3] = Default::default();
        for (i, s) in stages.iter().enumerate() {
            sets[s.index()].push(i);
        }
        Self { stages, sets }
    }

    pub fn set(&self, s: RissStage) -> &[usize] {
        &self.sets[s.index()]
    }

    pub fn counts(&self) -> [usize; 3] {
        [self.sets[0].len(), self.sets[1].len(), self.sets[2].len()]
    }
}

pub fn stage_cohort(cohort: &Cohort, t: &StagingThresholds) -> Result<StageAssignment> {
    let stages = cohort
        .records()
        .iter()
        .map(|r| stage_record(r, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(StageAssignment::from_stages(stages))
}

/// `id,stage` audit report.
pub fn write_stage_report<W: Write>(cohort: &Cohort, stages: &StageAssignment, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "stage"])?;
    for (r, s) in cohort.records().iter().zip(&stages.stages) {
        w.write_record([r.id.as_str(), &s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
