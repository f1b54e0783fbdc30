//! The built-in simulation scenario table.
//!
//! Twelve scenarios cross covariate balance with outcome-variance
//! heterogeneity. Covariates `X2..X4` are normal with unit variance around
//! the listed means (`X1` is standard normal everywhere and is deliberately
//! excluded from both the propensity and outcome models); odd-numbered
//! scenarios shift the current-study means while the external means stay at
//! one. The outcome noise variance is `sigma2` in the current study and
//! `eta2` in the external controls.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};

/// Scenario identifier, written as a roman numeral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioId {
    I,
    II,
    III,
    IV,
    V,
    VI,
    VII,
    VIII,
    IX,
    X,
    XI,
    XII,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 12] = [
        ScenarioId::I,
        ScenarioId::II,
        ScenarioId::III,
        ScenarioId::IV,
        ScenarioId::V,
        ScenarioId::VI,
        ScenarioId::VII,
        ScenarioId::VIII,
        ScenarioId::IX,
        ScenarioId::X,
        ScenarioId::XI,
        ScenarioId::XII,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioId::I => "I",
            ScenarioId::II => "II",
            ScenarioId::III => "III",
            ScenarioId::IV => "IV",
            ScenarioId::V => "V",
            ScenarioId::VI => "VI",
            ScenarioId::VII => "VII",
            ScenarioId::VIII => "VIII",
            ScenarioId::IX => "IX",
            ScenarioId::X => "X",
            ScenarioId::XI => "XI",
            ScenarioId::XII => "XII",
        }
    }

    /// Parses `all`, a single numeral, or a comma-separated list.
    pub fn parse_list(text: &str) -> Result<Vec<ScenarioId>> {
        if text.trim().eq_ignore_ascii_case("all") {
            return Ok(ScenarioId::ALL.to_vec());
        }
        text.split(',')
            .map(|tok| tok.trim().parse())
            .collect::<Result<Vec<_>>>()
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        ScenarioId::ALL
            .iter()
            .find(|id| id.as_str() == up)
            .copied()
            .ok_or_else(|| invalid_arg(format!("unknown scenario '{s}' (expected I through XII)")))
    }
}

/// One row of the scenario table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    /// Means of `X2..X4` in the current study.
    pub mu_current: [f64; 3],
    /// Outcome noise variance in the current study.
    pub sigma2_current: f64,
    /// Means of `X2..X4` in the external controls.
    pub mu_external: [f64; 3],
    /// Outcome noise variance in the external controls.
    pub sigma2_external: f64,
}

const SHIFTED: [f64; 3] = [1.2, 1.5, 1.6];
const BALANCED: [f64; 3] = [1.0, 1.0, 1.0];

/// All twelve scenarios in order.
pub fn scenario_table() -> Vec<ScenarioSpec> {
    let variance_pairs = [
        (1.0, 1.0),
        (3.0, 3.0),
        (10.0, 10.0),
        (1.0, 1.5),
        (3.0, 4.0),
        (10.0, 12.0),
    ];
    ScenarioId::ALL
        .iter()
        .enumerate()
        .map(|(i, &id)| {
            let (sigma2, eta2) = variance_pairs[i / 2];
            let mu_current = if i % 2 == 0 { SHIFTED } else { BALANCED };
            ScenarioSpec {
                id,
                mu_current,
                sigma2_current: sigma2,
                mu_external: BALANCED,
                sigma2_external: eta2,
            }
        })
        .collect()
}

impl ScenarioSpec {
    pub fn get(id: ScenarioId) -> ScenarioSpec {
        scenario_table()
            .into_iter()
            .find(|s| s.id == id)
            .expect("every id has a table row")
    }
}

pub(crate) const SCENARIO_CSV_HEADER: &str =
    "scenario,mu_c2,mu_c3,mu_c4,sigma2,mu_e2,mu_e3,mu_e4,eta2";

/// Renders the table as CSV (used by the `scenarios` subcommand).
pub fn scenario_csv() -> String {
    let mut out = String::from(SCENARIO_CSV_HEADER);
    out.push('\n');
    for s in scenario_table() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            s.id,
            s.mu_current[0],
            s.mu_current[1],
            s.mu_current[2],
            s.sigma2_current,
            s.mu_external[0],
            s.mu_external[1],
            s.mu_external[2],
            s.sigma2_external,
        ));
    }
    out
}

/// Parses CSV in the `scenario_csv` layout back into specs.
pub fn parse_scenario_csv(text: &str) -> Result<Vec<ScenarioSpec>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Schema("empty scenario CSV".into()))?;
    if header != SCENARIO_CSV_HEADER {
        return Err(Error::Schema(format!(
            "unexpected scenario header '{header}' (expected '{SCENARIO_CSV_HEADER}')"
        )));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Schema(format!(
                "scenario row {} has {} fields, expected 9",
                lineno + 2,
                fields.len()
            )));
        }
        let id: ScenarioId = fields[0].parse()?;
        let num = |i: usize| -> Result<f64> {
            fields[i].trim().parse::<f64>().map_err(|_| {
                Error::Schema(format!(
                    "scenario row {}: bad number '{}'",
                    lineno + 2,
                    fields[i]
                ))
            })
        };
        out.push(ScenarioSpec {
            id,
            mu_current: [num(1)?, num(2)?, num(3)?],
            sigma2_current: num(4)?,
            mu_external: [num(5)?, num(6)?, num(7)?],
            sigma2_external: num(8)?,
        });
    }
    Ok(out)
}
