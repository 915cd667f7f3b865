//! Patient records, CSV ingestion, preprocessing, splitting, and synthetic cohorts.

mod feature;
mod preprocess;
mod split;
pub mod synthetic;

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

pub use feature::{csv_header, Feature, N_FEATURES};
pub use preprocess::{fit_imputer, fit_standardizer, ImputeMeans, Preprocessor, StandardizeStats};
pub use split::{largest_remainder_counts, seeded_id_order, split, Split, SplitSpec};

use crate::error::{Error, Result};

/// One patient: raw clinical values and the five-year outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord {
    pub id: String,
    values: [Option<f64>; N_FEATURES],
    label: u8,
}

impl PatientRecord {
    /// Builds a record, enforcing the inclusion criteria: age, albumin, LDH and
    /// B2M present, age a non-negative integer, label in {0, 1}, all present
    /// values finite.
    pub fn new(id: impl Into<String>, values: [Option<f64>; N_FEATURES], label: u8) -> Result<Self> {
        let id = id.into();
        if label > 1 {
            return Err(Error::Validation(format!(
                "record `{id}`: label must be 0 or 1, got {label}"
            )));
        }
        for f in Feature::MANDATORY {
            if values[f.index()].is_none() {
                return Err(Error::Validation(format!(
                    "record `{id}`: mandatory feature `{f}` is missing"
                )));
            }
        }
        for f in Feature::ALL {
            if let Some(v) = values[f.index()] {
                if !v.is_finite() {
                    return Err(Error::Validation(format!("record `{id}`: feature `{f}` is not finite")));
                }
            }
        }
        let age = values[Feature::Age.index()].unwrap_or_default();
        if age < 0.0 || age.fract() != 0.0 {
            return Err(Error::Validation(format!(
                "record `{id}`: age must be a non-negative integer, got {age}"
            )));
        }
        Ok(Self { id, values, label })
    }

    #[inline]
    pub fn get(&self, f: Feature) -> Option<f64> {
        self.values[f.index()]
    }

    pub fn values(&self) -> &[Option<f64>; N_FEATURES] {
        &self.values
    }

    pub fn age(&self) -> f64 {
        self.values[Feature::Age.index()].unwrap_or_default()
    }

    pub fn albumin(&self) -> f64 {
        self.values[Feature::Albumin.index()].unwrap_or_default()
    }

    pub fn ldh(&self) -> f64 {
        self.values[Feature::Ldh.index()].unwrap_or_default()
    }

    pub fn b2m(&self) -> f64 {
        self.values[Feature::B2m.index()].unwrap_or_default()
    }

    pub fn label(&self) -> u8 {
        self.label
    }
}

/// Ordered collection of patient records. Preprocessing statistics are
/// attached once fitted on a designated fit set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Cohort {
    records: Vec<PatientRecord>,
    preprocessor: Option<Preprocessor>,
}

impl Cohort {
    /// Rejects duplicate ids.
    pub fn new(records: Vec<PatientRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Validation(format!("duplicate record id `{}`", r.id)));
            }
        }
        Ok(Self {
            records,
            preprocessor: None,
        })
    }

    pub fn records(&self) -> &[PatientRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.id.as_str()).collect()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.records.iter().map(|r| f64::from(r.label)).collect()
    }

    pub fn preprocessor(&self) -> Option<&Preprocessor> {
        self.preprocessor.as_ref()
    }

    pub fn set_preprocessor(&mut self, p: Preprocessor) {
        self.preprocessor = Some(p);
    }

    /// Fits imputation and standardization on the whole cohort and attaches it.
    pub fn fit_preprocessor(&mut self) -> Result<&Preprocessor> {
        let p = Preprocessor::fit(self.records.iter())?;
        self.preprocessor = Some(p);
        Ok(self.preprocessor.as_ref().expect("just set"))
    }

    /// Imputed and standardized design matrix (m x 18) using the attached
    /// statistics.
    pub fn apply_impute_standardize(&self) -> Result<ndarray::Array2<f64>> {
        let p = self
            .preprocessor
            .as_ref()
            .ok_or_else(|| Error::State("preprocessing statistics have not been fitted".into()))?;
        Ok(p.transform(&self.records))
    }

    /// Sub-cohort with the records at `indices`, in that order. Preprocessing
    /// is not carried over.
    pub fn subset(&self, indices: &[usize]) -> Cohort {
        Cohort {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            preprocessor: None,
        }
    }

    pub fn death_rate(&self) -> f64 {
        if self.records.is_empty() {
            return f64::NAN;
        }
        self.records.iter().map(|r| f64::from(r.label)).sum::<f64>() / self.records.len() as f64
    }
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<Option<f64>> {
    let s = raw.trim();
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|e| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("`{s}` is not a number ({e})"),
    })
}

/// Reads a cohort from CSV. Empty cells denote missing values; no
/// imputation is applied. Row numbers in errors are 1-based data rows.
pub fn read_csv<R: Read>(reader: R) -> Result<Cohort> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let expected = csv_header();
    if header.len() != expected.len() || header.iter().zip(&expected).any(|(a, b)| a != b) {
        let missing: Vec<_> = expected
            .iter()
            .filter(|c| !header.iter().any(|h| h == *c))
            .copied()
            .collect();
        return Err(Error::Validation(if missing.is_empty() {
            format!("header does not match schema; expected `{}`", expected.join(","))
        } else {
            format!("header is missing column(s): {}", missing.join(", "))
        }));
    }

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row?;
        let id = row.get(0).unwrap_or_default().to_string();
        if id.is_empty() {
            return Err(Error::Validation(format!("row {row_no}: empty id")));
        }
        let mut values = [None; N_FEATURES];
        for f in Feature::ALL {
            let cell = row.get(f.index() + 1).unwrap_or_default();
            values[f.index()] = parse_cell(cell, row_no, f.column())?;
            if f.is_mandatory() && values[f.index()].is_none() {
                return Err(Error::Validation(format!(
                    "row {row_no} (id `{id}`): mandatory field `{f}` is missing"
                )));
            }
        }
        let label_cell = row.get(N_FEATURES + 1).unwrap_or_default().trim();
        let label = match label_cell {
            "0" => 0,
            "1" => 1,
            "" => {
                return Err(Error::Validation(format!(
                    "row {row_no} (id `{id}`): mandatory field `label` is missing"
                )))
            }
            other => {
                return Err(Error::Validation(format!(
                    "row {row_no} (id `{id}`): label must be 0 or 1, got `{other}`"
                )))
            }
        };
        records.push(PatientRecord::new(id, values, label)?);
    }
    Cohort::new(records)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Cohort> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(std::io::BufReader::new(file))
}

/// Writes a cohort as CSV. Numbers use Rust's shortest round-trip format, so
/// reading the file back yields bit-identical values.
pub fn write_csv<W: Write>(cohort: &Cohort, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    w.write_record(csv_header())?;
    for r in cohort.records() {
        let mut row = Vec::with_capacity(N_FEATURES + 2);
        row.push(r.id.clone());
        for f in Feature::ALL {
            row.push(match r.get(f) {
                Some(v) if f == Feature::Age => format!("{}", v as u64),
                Some(v) => format!("{v}"),
                None => String::new(),
            });
        }
        row.push(r.label.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(cohort: &Cohort, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_csv(cohort, std::io::BufWriter::new(file))
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn record(id: &str, age: f64, albumin: f64, ldh: f64, b2m: f64, label: u8) -> PatientRecord {
        let mut v = [None; N_FEATURES];
        v[Feature::Age.index()] = Some(age);
        v[Feature::Albumin.index()] = Some(albumin);
        v[Feature::Ldh.index()] = Some(ldh);
        v[Feature::B2m.index()] = Some(b2m);
        for f in &Feature::ALL[4..] {
            v[f.index()] = Some(1.0 + f.index() as f64);
        }
        PatientRecord::new(id, v, label).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "id,age,albumin,ldh,b2m,hemoglobin,platelets,creatinine,crp,alp,flc_lambda,flc_kappa,leukocytes,protein,ionized_calcium,iga,igg,igm,plasma_cell_pct,label";

    fn row(id: &str, hemoglobin: &str, label: &str) -> String {
        format!("{id},65,38.5,210,2.9,{hemoglobin},200,90,4,80,30,40,6,75,1.2,2,20,0.5,25,{label}")
    }

    #[test]
    fn three_valid_rows() {
        let csv = format!(
            "{HEADER}\n{}\n{}\n{}\n",
            row("a", "120", "0"),
            row("b", "110", "1"),
            row("c", "100", "1")
        );
        let c = read_csv(csv.as_bytes()).unwrap();
        assert_eq!(c.len(), 3);
        assert!(c.preprocessor().is_none());
        assert_eq!(c.ids(), vec!["a", "b", "c"]);
        assert_eq!(c.records()[1].get(Feature::Hemoglobin), Some(110.0));
    }

    #[test]
    fn empty_cell_is_missing() {
        let csv = format!("{HEADER}\n{}\n", row("a", "", "0"));
        let c = read_csv(csv.as_bytes()).unwrap();
        assert_eq!(c.records()[0].get(Feature::Hemoglobin), None);
    }

    #[test]
    fn label_two_rejected() {
        let csv = format!("{HEADER}\n{}\n", row("a", "120", "2"));
        assert!(matches!(read_csv(csv.as_bytes()), Err(Error::Validation(_))));
    }

    #[test]
    fn malformed_cell_names_row_and_column() {
        let csv = format!("{HEADER}\n{}\n{}\n", row("a", "120", "0"), row("b", "12x", "0"));
        match read_csv(csv.as_bytes()) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "hemoglobin");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_mandatory_and_duplicates() {
        let bad = format!("{HEADER}\na,65,,210,2.9,120,200,90,4,80,30,40,6,75,1.2,2,20,0.5,25,0\n");
        let err = read_csv(bad.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("albumin"), "{err}");

        let dup = format!("{HEADER}\n{}\n{}\n", row("a", "1", "0"), row("a", "2", "1"));
        assert!(matches!(read_csv(dup.as_bytes()), Err(Error::Validation(_))));

        let nolabel = format!("{HEADER}\n{}\n", row("a", "1", ""));
        assert!(matches!(read_csv(nolabel.as_bytes()), Err(Error::Validation(_))));
    }

    #[test]
    fn header_without_b2m_is_rejected() {
        let header = HEADER.replace(",b2m", "");
        let csv = format!("{header}\na,65,38.5,210,120,200,90,4,80,30,40,6,75,1.2,2,20,0.5,25,0\n");
        let err = read_csv(csv.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("b2m"), "{err}");
    }

    #[test]
    fn write_then_read_is_identical() {
        let csv = format!("{HEADER}\n{}\n{}\n", row("a", "", "0"), row("b", "0.1", "1"));
        let c = read_csv(csv.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_csv(&c, &mut buf).unwrap();
        assert_eq!(read_csv(buf.as_slice()).unwrap(), c);
    }
}
