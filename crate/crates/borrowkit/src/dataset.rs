//! CSV dataset ingestion and emission.
//!
//! Column roles (outcome, treatment indicator, source, covariates) are bound
//! by header name, so any study's variable names work without positional
//! conventions. Rows are split into current-study treatment, current-study
//! control, and external-control groups; external subjects must be controls.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::propensity::CovariateMatrix;
use crate::summary::ArmData;
use crate::trial::TrialData;

/// A parsed dataset, split into analysis arms. Arm designs carry a leading
/// intercept; the raw covariate blocks are kept for propensity modelling and
/// covariate profiles. `external` is `None` when the file has no external
/// rows.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub treatment: ArmData,
    pub control: ArmData,
    pub external: Option<ArmData>,
    pub covs_treatment: DMatrix<f64>,
    pub covs_control: DMatrix<f64>,
    pub covs_external: DMatrix<f64>,
    pub covariate_names: Vec<String>,
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

struct GroupRows {
    covs: Vec<Vec<f64>>,
    y: Vec<f64>,
}

impl GroupRows {
    fn new() -> Self {
        GroupRows {
            covs: Vec::new(),
            y: Vec::new(),
        }
    }

    fn matrix(&self, p: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.covs.len(), p, |i, j| self.covs[i][j])
    }
}

fn build_arm(rows: &GroupRows, p: usize) -> Result<Option<(ArmData, DMatrix<f64>)>> {
    if rows.y.is_empty() {
        return Ok(None);
    }
    let covs = rows.matrix(p);
    let arm = ArmData::with_intercept(&covs, DVector::from_vec(rows.y.clone()))?;
    Ok(Some((arm, covs)))
}

impl Dataset {
    /// Reads a dataset from CSV text with the given column bindings.
    pub fn read_csv<R: Read>(
        reader: R,
        outcome_column: &str,
        treatment_column: &str,
        source_column: &str,
        covariate_columns: &[String],
    ) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let find = |name: &str| headers.iter().position(|h| h == name);

        let mut missing: Vec<&str> = Vec::new();
        let idx_outcome = find(outcome_column);
        let idx_treatment = find(treatment_column);
        let idx_source = find(source_column);
        if idx_outcome.is_none() {
            missing.push(outcome_column);
        }
        if idx_treatment.is_none() {
            missing.push(treatment_column);
        }
        if idx_source.is_none() {
            missing.push(source_column);
        }
        let mut idx_covs = Vec::with_capacity(covariate_columns.len());
        for c in covariate_columns {
            match find(c) {
                Some(i) => idx_covs.push(i),
                None => missing.push(c),
            }
        }
        if !missing.is_empty() {
            return Err(schema(format!("missing column(s): {}", missing.join(", "))));
        }
        let (idx_outcome, idx_treatment, idx_source) = (
            idx_outcome.unwrap(),
            idx_treatment.unwrap(),
            idx_source.unwrap(),
        );

        let p = covariate_columns.len();
        let mut treated = GroupRows::new();
        let mut control = GroupRows::new();
        let mut external = GroupRows::new();

        for (i, record) in rdr.records().enumerate() {
            let row = i + 1; // 1-based data row
            let record = record?;
            let field = |idx: usize| -> &str { record.get(idx).unwrap_or("").trim() };

            let y: f64 = field(idx_outcome).parse().map_err(|_| {
                schema(format!(
                    "row {row}: outcome '{}' is not a number",
                    field(idx_outcome)
                ))
            })?;
            if !y.is_finite() {
                return Err(schema(format!("row {row}: outcome is not finite")));
            }

            let t = match field(idx_treatment) {
                "0" => false,
                "1" => true,
                other => {
                    return Err(schema(format!(
                        "row {row}: treatment '{other}' must be 0 or 1"
                    )))
                }
            };

            let source = field(idx_source);
            let is_current = if source.eq_ignore_ascii_case("current") {
                true
            } else if source.eq_ignore_ascii_case("external") {
                false
            } else {
                return Err(schema(format!(
                    "row {row}: source '{source}' must be 'current' or 'external'"
                )));
            };

            if !is_current && t {
                return Err(schema(format!(
                    "row {row}: external subjects must be controls (treatment = 0)"
                )));
            }

            let mut covs = Vec::with_capacity(p);
            for (&ci, name) in idx_covs.iter().zip(covariate_columns) {
                let v: f64 = field(ci).parse().map_err(|_| {
                    schema(format!(
                        "row {row}: covariate {name} '{}' is not a number",
                        field(ci)
                    ))
                })?;
                if !v.is_finite() {
                    return Err(schema(format!("row {row}: covariate {name} is not finite")));
                }
                covs.push(v);
            }

            let group = match (is_current, t) {
                (true, true) => &mut treated,
                (true, false) => &mut control,
                (false, _) => &mut external,
            };
            group.covs.push(covs);
            group.y.push(y);
        }

        let (treatment, covs_treatment) =
            build_arm(&treated, p)?.ok_or_else(|| schema("no current-study treatment rows"))?;
        let (control, covs_control) =
            build_arm(&control, p)?.ok_or_else(|| schema("no current-study control rows"))?;
        let (external, covs_external) = match build_arm(&external, p)? {
            Some((arm, covs)) => (Some(arm), covs),
            None => (None, DMatrix::zeros(0, p)),
        };

        Ok(Dataset {
            treatment,
            control,
            external,
            covs_treatment,
            covs_control,
            covs_external,
            covariate_names: covariate_columns.to_vec(),
        })
    }

    /// Writes the dataset back out in canonical order (treatment rows, then
    /// current controls, then external controls). Numeric formatting uses the
    /// shortest representation that parses back to the identical value, so a
    /// write/read cycle is lossless.
    pub fn write_csv<W: Write>(
        &self,
        writer: W,
        outcome_column: &str,
        treatment_column: &str,
        source_column: &str,
    ) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec![
            outcome_column.to_string(),
            treatment_column.to_string(),
            source_column.to_string(),
        ];
        header.extend(self.covariate_names.iter().cloned());
        wtr.write_record(&header)?;

        let mut write_group = |covs: &DMatrix<f64>,
                               arm: Option<&ArmData>,
                               treated: bool,
                               source: &str|
         -> Result<()> {
            let Some(arm) = arm else { return Ok(()) };
            for i in 0..arm.n() {
                let mut rec = vec![
                    format!("{}", arm.y[i]),
                    if treated {
                        "1".to_string()
                    } else {
                        "0".to_string()
                    },
                    source.to_string(),
                ];
                for j in 0..covs.ncols() {
                    rec.push(format!("{}", covs[(i, j)]));
                }
                wtr.write_record(&rec)?;
            }
            Ok(())
        };
        write_group(&self.covs_treatment, Some(&self.treatment), true, "current")?;
        write_group(&self.covs_control, Some(&self.control), false, "current")?;
        write_group(
            &self.covs_external,
            self.external.as_ref(),
            false,
            "external",
        )?;
        wtr.flush()?;
        Ok(())
    }

    /// Converts a generated trial into the dataset layout (canonical row
    /// order), naming the covariates.
    pub fn from_trial(trial: &TrialData, covariate_names: &[&str]) -> Result<Dataset> {
        let p = trial.treatment.q() - 1;
        if covariate_names.len() != p {
            return Err(crate::error::invalid_arg(format!(
                "{} covariate names for {} covariates",
                covariate_names.len(),
                p
            )));
        }
        let strip = |arm: &ArmData| -> DMatrix<f64> {
            DMatrix::from_fn(arm.n(), p, |i, j| arm.x[(i, j + 1)])
        };
        Ok(Dataset {
            treatment: trial.treatment.clone(),
            control: trial.control.clone(),
            external: Some(trial.external.clone()),
            covs_treatment: strip(&trial.treatment),
            covs_control: strip(&trial.control),
            covs_external: strip(&trial.external),
            covariate_names: covariate_names.iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn n_treated(&self) -> usize {
        self.treatment.n()
    }

    pub fn n_control(&self) -> usize {
        self.control.n()
    }

    pub fn n_external(&self) -> usize {
        self.external.as_ref().map_or(0, |a| a.n())
    }

    /// Propensity design: current rows (treatment then control) labelled
    /// `true`, external rows labelled `false`.
    pub fn ps_data(&self) -> Result<CovariateMatrix> {
        let p = self.covariate_names.len();
        let n = self.n_treated() + self.n_control() + self.n_external();
        let mut x = DMatrix::zeros(n, p);
        let mut labels = Vec::with_capacity(n);
        let mut r = 0;
        for (covs, label) in [
            (&self.covs_treatment, true),
            (&self.covs_control, true),
            (&self.covs_external, false),
        ] {
            for i in 0..covs.nrows() {
                for j in 0..p {
                    x[(r, j)] = covs[(i, j)];
                }
                labels.push(label);
                r += 1;
            }
        }
        CovariateMatrix::new(x, labels)
    }

    /// `[1, covariate means]` over the whole current study.
    pub fn pooled_profile(&self) -> DVector<f64> {
        let p = self.covariate_names.len();
        let n = (self.n_treated() + self.n_control()) as f64;
        let mut profile = DVector::zeros(p + 1);
        profile[0] = 1.0;
        for covs in [&self.covs_treatment, &self.covs_control] {
            for i in 0..covs.nrows() {
                for j in 0..p {
                    profile[j + 1] += covs[(i, j)] / n;
                }
            }
        }
        profile
    }

    /// `[1, 0, ..., 0]`: the intercept-difference effect profile.
    pub fn intercept_profile(&self) -> DVector<f64> {
        let mut profile = DVector::zeros(self.covariate_names.len() + 1);
        profile[0] = 1.0;
        profile
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::scenarios::{ScenarioId, ScenarioSpec};
    use crate::trial::{generate_trial, GenConfig};

    const CSV: &str = "\
y,arm,src,age,score
1.5,1,current,60,10
2.5,1,current,61,11
0.5,0,current,62,12
0.75,0,current,63,13
0.25,0,external,64,14
0.125,0,external,65,15
";

    fn read(text: &str) -> Result<Dataset> {
        Dataset::read_csv(
            text.as_bytes(),
            "y",
            "arm",
            "src",
            &["age".to_string(), "score".to_string()],
        )
    }

    #[test]
    fn splits_groups_and_keeps_order() {
        let d = read(CSV).unwrap();
        assert_eq!(d.n_treated(), 2);
        assert_eq!(d.n_control(), 2);
        assert_eq!(d.n_external(), 2);
        assert_eq!(d.treatment.y[0], 1.5);
        assert_eq!(d.control.y[1], 0.75);
        assert_eq!(d.external.as_ref().unwrap().y[1], 0.125);
        assert_eq!(d.covs_external[(0, 0)], 64.0);
        // arm designs carry the intercept
        assert_eq!(d.treatment.q(), 3);
        assert_eq!(d.treatment.x[(0, 0)], 1.0);
        let ps = d.ps_data().unwrap();
        assert_eq!(ps.n_rows(), 6);
        assert_eq!(ps.labels(), &[true, true, true, true, false, false]);
        let profile = d.pooled_profile();
        assert_eq!(profile.len(), 3);
        assert!((profile[1] - 61.5).abs() < 1e-12);
        assert_eq!(d.intercept_profile().as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn missing_columns_are_listed() {
        let err = Dataset::read_csv(
            CSV.as_bytes(),
            "outcome",
            "arm",
            "src",
            &["age".to_string(), "bmi".to_string()],
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("outcome"), "{msg}");
        assert!(msg.contains("bmi"), "{msg}");
        assert!(!msg.contains("age,"), "present column not listed: {msg}");
    }

    #[test]
    fn value_validation_points_at_the_row() {
        let bad_treat = CSV.replace("2.5,1,current", "2.5,2,current");
        let msg = read(&bad_treat).unwrap_err().to_string();
        assert!(
            msg.contains("row 2") && msg.contains("must be 0 or 1"),
            "{msg}"
        );

        let bad_source = CSV.replace("0.25,0,external", "0.25,0,historic");
        let msg = read(&bad_source).unwrap_err().to_string();
        assert!(msg.contains("row 5") && msg.contains("historic"), "{msg}");

        let bad_outcome = CSV.replace("0.5,0,current", "oops,0,current");
        let msg = read(&bad_outcome).unwrap_err().to_string();
        assert!(msg.contains("row 3") && msg.contains("oops"), "{msg}");

        let treated_external = CSV.replace("0.25,0,external", "0.25,1,external");
        let msg = read(&treated_external).unwrap_err().to_string();
        assert!(
            msg.contains("row 5") && msg.contains("must be controls"),
            "{msg}"
        );
    }

    #[test]
    fn current_arms_are_required_but_external_is_optional() {
        let no_external = CSV
            .replace("0.25,0,external,64,14\n", "")
            .replace("0.125,0,external,65,15\n", "");
        let d = read(&no_external).unwrap();
        assert!(d.external.is_none());
        assert_eq!(d.covs_external.nrows(), 0);
        assert_eq!(d.n_external(), 0);

        let no_controls = CSV
            .replace("0.5,0,current,62,12\n", "")
            .replace("0.75,0,current,63,13\n", "");
        let msg = read(&no_controls).unwrap_err().to_string();
        assert!(msg.contains("control rows"), "{msg}");
    }

    #[test]
    fn source_labels_are_case_insensitive() {
        let mixed = CSV
            .replace("0.25,0,external", "0.25,0,External")
            .replace("1.5,1,current", "1.5,1,CURRENT");
        let d = read(&mixed).unwrap();
        assert_eq!(d.n_external(), 2);
        assert_eq!(d.n_treated(), 2);
    }

    #[test]
    fn write_read_round_trip_is_bit_exact() {
        let gen = GenConfig::new(ScenarioSpec::get(ScenarioId::IX), 30, 20);
        let trial = generate_trial(&gen, &mut RngStream::new(77, 0)).unwrap();
        let d = Dataset::from_trial(&trial, &["x2", "x3", "x4"]).unwrap();

        let mut buf = Vec::new();
        d.write_csv(&mut buf, "outcome", "treatment", "source")
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("outcome,treatment,source,x2,x3,x4\n"));

        let back = Dataset::read_csv(
            text.as_bytes(),
            "outcome",
            "treatment",
            "source",
            &["x2".to_string(), "x3".to_string(), "x4".to_string()],
        )
        .unwrap();

        assert_eq!(back.n_treated(), d.n_treated());
        for i in 0..d.treatment.n() {
            assert_eq!(back.treatment.y[i].to_bits(), d.treatment.y[i].to_bits());
            for j in 0..d.treatment.q() {
                assert_eq!(
                    back.treatment.x[(i, j)].to_bits(),
                    d.treatment.x[(i, j)].to_bits()
                );
            }
        }
        let (be, de) = (
            back.external.as_ref().unwrap(),
            d.external.as_ref().unwrap(),
        );
        for i in 0..de.n() {
            assert_eq!(be.y[i].to_bits(), de.y[i].to_bits());
        }
        // writing again reproduces the same bytes
        let mut buf2 = Vec::new();
        back.write_csv(&mut buf2, "outcome", "treatment", "source")
            .unwrap();
        assert_eq!(text.as_bytes(), buf2.as_slice());
    }
}
