use std::fmt;
use std::str::FromStr;

use crate::error::Error;

pub const N_FEATURES: usize = 18;

/// Model input columns in their fixed order. Age is always first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    Age,
    Albumin,
    Ldh,
    B2m,
    Hemoglobin,
    Platelets,
    Creatinine,
    Crp,
    Alp,
    FlcLambda,
    FlcKappa,
    Leukocytes,
    Protein,
    IonizedCalcium,
    Iga,
    Igg,
    Igm,
    PlasmaCellPct,
}

impl Feature {
    pub const ALL: [Feature; N_FEATURES] = [
        Feature::Age,
        Feature::Albumin,
        Feature::Ldh,
        Feature::B2m,
        Feature::Hemoglobin,
        Feature::Platelets,
        Feature::Creatinine,
        Feature::Crp,
        Feature::Alp,
        Feature::FlcLambda,
        Feature::FlcKappa,
        Feature::Leukocytes,
        Feature::Protein,
        Feature::IonizedCalcium,
        Feature::Iga,
        Feature::Igg,
        Feature::Igm,
        Feature::PlasmaCellPct,
    ];

    /// Inclusion criteria: these are present for every patient.
    pub const MANDATORY: [Feature; 4] = [Feature::Age, Feature::Albumin, Feature::Ldh, Feature::B2m];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Feature> {
        Self::ALL.get(i).copied()
    }

    /// Column name in cohort CSV files.
    pub fn column(self) -> &'static str {
        match self {
            Feature::Age => "age",
            Feature::Albumin => "albumin",
            Feature::Ldh => "ldh",
            Feature::B2m => "b2m",
            Feature::Hemoglobin => "hemoglobin",
            Feature::Platelets => "platelets",
            Feature::Creatinine => "creatinine",
            Feature::Crp => "crp",
            Feature::Alp => "alp",
            Feature::FlcLambda => "flc_lambda",
            Feature::FlcKappa => "flc_kappa",
            Feature::Leukocytes => "leukocytes",
            Feature::Protein => "protein",
            Feature::IonizedCalcium => "ionized_calcium",
            Feature::Iga => "iga",
            Feature::Igg => "igg",
            Feature::Igm => "igm",
            Feature::PlasmaCellPct => "plasma_cell_pct",
        }
    }

    pub fn is_mandatory(self) -> bool {
        Self::MANDATORY.contains(&self)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Feature::ALL
            .iter()
            .copied()
            .find(|f| f.column().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Validation(format!("unknown feature `{s}`")))
    }
}

/// Full CSV header: `id`, the features in order, then `label`.
pub fn csv_header() -> Vec<&'static str> {
    let mut h = Vec::with_capacity(N_FEATURES + 2);
    h.push("id");
    h.extend(Feature::ALL.iter().map(|f| f.column()));
    h.push("label");
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_exact() {
        assert_eq!(
            csv_header().join(","),
            "id,age,albumin,ldh,b2m,hemoglobin,platelets,creatinine,crp,alp,flc_lambda,flc_kappa,\
             leukocytes,protein,ionized_calcium,iga,igg,igm,plasma_cell_pct,label"
        );
    }

    #[test]
    fn index_roundtrip() {
        for (i, f) in Feature::ALL.iter().enumerate() {
            assert_eq!(f.index(), i);
            assert_eq!(Feature::from_index(i), Some(*f));
            assert_eq!(f.column().parse::<Feature>().unwrap(), *f);
        }
        assert!("ldh2".parse::<Feature>().is_err());
    }
}
