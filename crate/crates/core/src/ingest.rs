//! Study-level input: CSV (and a JSON mirror of the same schema).
//!
//! Columns: `label,measure,effect,se,ci_low,ci_high,ci_level`. `label`,
//! `measure` and `effect` are required; each row then needs either `se` or
//! both CI limits. `ci_level` defaults to 0.95. For ratio measures the
//! effect and CI are given on the ratio scale while `se` refers to the
//! natural-log scale.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::normal_quantile;
use crate::error::{Error, Result};
use crate::meta::{Measure, Study, StudySet};

/// Header names, in canonical order.
pub const CSV_COLUMNS: [&str; 7] = [
    "label", "measure", "effect", "se", "ci_low", "ci_high", "ci_level",
];

pub const DEFAULT_CI_LEVEL: f64 = 0.95;

/// Relative disagreement between a supplied and a CI-derived standard error
/// above which a warning is emitted.
pub const SE_MISMATCH_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReportedMeasure {
    HR,
    RR,
    OR,
    MD,
}

impl ReportedMeasure {
    pub fn is_ratio(self) -> bool {
        !matches!(self, ReportedMeasure::MD)
    }

    pub fn scale(self) -> Measure {
        if self.is_ratio() {
            Measure::Ratio
        } else {
            Measure::Difference
        }
    }
}

impl fmt::Display for ReportedMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for ReportedMeasure {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "HR" => Ok(ReportedMeasure::HR),
            "RR" => Ok(ReportedMeasure::RR),
            "OR" => Ok(ReportedMeasure::OR),
            "MD" => Ok(ReportedMeasure::MD),
            other => Err(format!(
                "unknown measure {other:?} (expected HR, RR, OR or MD)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportedCi {
    pub low: f64,
    pub high: f64,
    pub level: f64,
}

/// One validated input row, still on the reporting scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputRecord {
    /// Line number in the source file (1 = header), or array position + 1 for JSON.
    pub row: usize,
    pub label: String,
    pub measure: ReportedMeasure,
    pub effect: f64,
    pub se: Option<f64>,
    pub ci: Option<ReportedCi>,
}

impl InputRecord {
    fn validate(&self) -> Result<()> {
        let fail = |message: String| {
            Err(Error::Input {
                row: self.row,
                message,
            })
        };
        if self.label.is_empty() {
            return fail("empty label".into());
        }
        if !self.effect.is_finite() {
            return fail(format!("effect {} is not finite", self.effect));
        }
        if self.measure.is_ratio() && self.effect <= 0.0 {
            return fail(format!(
                "{} effect must be positive, got {}",
                self.measure, self.effect
            ));
        }
        if let Some(se) = self.se {
            if !(se.is_finite() && se > 0.0) {
                return fail(format!("se must be positive and finite, got {se}"));
            }
        }
        if let Some(ci) = self.ci {
            if !(ci.low.is_finite() && ci.high.is_finite()) {
                return fail("confidence limits must be finite".into());
            }
            if self.measure.is_ratio() && (ci.low <= 0.0 || ci.high <= 0.0) {
                return fail(format!(
                    "{} confidence limits must be positive",
                    self.measure
                ));
            }
            if ci.low >= ci.high {
                return fail(format!(
                    "ci_low {} must be below ci_high {}",
                    ci.low, ci.high
                ));
            }
            if !(ci.low < self.effect && self.effect < ci.high) {
                return fail(format!(
                    "effect {} lies outside its confidence interval [{}, {}]",
                    self.effect, ci.low, ci.high
                ));
            }
            if !(ci.level > 0.0 && ci.level < 1.0) {
                return fail(format!("ci_level must lie in (0, 1), got {}", ci.level));
            }
        }
        if self.se.is_none() && self.ci.is_none() {
            return fail("need either se or both ci_low and ci_high".into());
        }
        Ok(())
    }

    /// Standard error on the analysis scale implied by the CI.
    fn se_from_ci(&self) -> Option<f64> {
        let ci = self.ci?;
        let z = normal_quantile(0.5 * (1.0 + ci.level)).ok()?;
        let width = if self.measure.is_ratio() {
            ci.high.ln() - ci.low.ln()
        } else {
            ci.high - ci.low
        };
        Some(width / (2.0 * z))
    }
}

fn parse_number(row: usize, column: &str, raw: &str) -> Result<Option<f64>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse::<f64>().map(Some).map_err(|_| Error::Input {
        row,
        message: format!("column {column}: {raw:?} is not a number"),
    })
}

#[allow(clippy::too_many_arguments)]
fn build_record(
    row: usize,
    label: &str,
    measure: &str,
    effect: Option<f64>,
    se: Option<f64>,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    ci_level: Option<f64>,
) -> Result<InputRecord> {
    let measure = measure
        .parse::<ReportedMeasure>()
        .map_err(|message| Error::Input { row, message })?;
    let effect = effect.ok_or_else(|| Error::Input {
        row,
        message: "missing effect".into(),
    })?;
    let ci = match (ci_low, ci_high) {
        (Some(low), Some(high)) => Some(ReportedCi {
            low,
            high,
            level: ci_level.unwrap_or(DEFAULT_CI_LEVEL),
        }),
        (None, None) => None,
        _ => {
            return Err(Error::Input {
                row,
                message: "ci_low and ci_high must be given together".into(),
            })
        }
    };
    let record = InputRecord {
        row,
        label: label.trim().to_string(),
        measure,
        effect,
        se,
        ci,
    };
    record.validate()?;
    Ok(record)
}

fn check_duplicates(records: &[InputRecord]) -> Result<()> {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for r in records {
        if let Some(first) = seen.insert(r.label.as_str(), r.row) {
            return Err(Error::Input {
                row: r.row,
                message: format!("duplicate label {:?} (first seen on row {first})", r.label),
            });
        }
    }
    Ok(())
}

/// Reads records from CSV text. Rows keep file order.
pub fn parse_csv<R: Read>(reader: R) -> Result<Vec<InputRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Input {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    let column: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    for required in ["label", "measure", "effect"] {
        if !column.contains_key(required) {
            return Err(Error::MissingColumn(required.into()));
        }
    }
    let has_ci = column.contains_key("ci_low") && column.contains_key("ci_high");
    if !column.contains_key("se") && !has_ci {
        return Err(Error::MissingColumn("se (or ci_low and ci_high)".into()));
    }

    let mut records = Vec::new();
    for result in rdr.records() {
        let rec = result.map_err(|e| Error::Input {
            row: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let row = rec
            .position()
            .map_or(records.len() + 2, |p| p.line() as usize);
        let get = |name: &str| column.get(name).and_then(|&i| rec.get(i)).unwrap_or("");
        let num = |name: &str| parse_number(row, name, get(name));
        records.push(build_record(
            row,
            get("label"),
            get("measure"),
            num("effect")?,
            num("se")?,
            num("ci_low")?,
            num("ci_high")?,
            num("ci_level")?,
        )?);
    }
    check_duplicates(&records)?;
    Ok(records)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRecord {
    label: String,
    measure: String,
    effect: Option<f64>,
    se: Option<f64>,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    ci_level: Option<f64>,
}

/// Reads records from a JSON array whose objects use the CSV column names.
pub fn parse_json<R: Read>(reader: R) -> Result<Vec<InputRecord>> {
    let raw: Vec<JsonRecord> = serde_json::from_reader(reader).map_err(|e| Error::Input {
        row: e.line(),
        message: e.to_string(),
    })?;
    let records = raw
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            build_record(
                i + 1,
                &r.label,
                &r.measure,
                r.effect,
                r.se,
                r.ci_low,
                r.ci_high,
                r.ci_level,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    check_duplicates(&records)?;
    Ok(records)
}

/// Reads a CSV or JSON (by `.json` extension) study file.
pub fn load_path(path: &Path) -> Result<Vec<InputRecord>> {
    let file =
        std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        parse_json(file)
    } else {
        parse_csv(file)
    }
}

/// A normalized study set plus any non-fatal findings.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub studies: StudySet,
    pub measure: ReportedMeasure,
    pub warnings: Vec<String>,
}

/// Converts records to the analysis scale (natural log for ratio measures).
pub fn normalize(records: &[InputRecord]) -> Result<Normalized> {
    let first = records.first().ok_or(Error::NoStudies)?;
    let measure = first.measure;
    let mut warnings = Vec::new();
    let mut studies = Vec::with_capacity(records.len());
    for r in records {
        if r.measure != measure {
            return Err(Error::MixedMeasures {
                first: measure.to_string(),
                other: format!("{} (row {})", r.measure, r.row),
            });
        }
        let effect = if measure.is_ratio() {
            r.effect.ln()
        } else {
            r.effect
        };
        let derived = r.se_from_ci();
        let se = match (r.se, derived) {
            (Some(se), Some(d)) => {
                if ((se - d) / d).abs() > SE_MISMATCH_TOLERANCE {
                    warnings.push(format!(
                        "row {}: se {se} differs from the CI-derived {d:.6} by more than {:.0}%; using se",
                        r.row,
                        SE_MISMATCH_TOLERANCE * 100.0
                    ));
                }
                se
            }
            (Some(se), None) => se,
            (None, Some(d)) => d,
            (None, None) => unreachable!("validated records carry se or a CI"),
        };
        studies.push(Study::new(r.label.clone(), effect, se));
    }
    let studies = StudySet::new(studies, measure.scale())?;
    Ok(Normalized {
        studies,
        measure,
        warnings,
    })
}
