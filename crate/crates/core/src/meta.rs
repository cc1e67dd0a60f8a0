//! Inverse-variance meta-analysis.
//!
//! Three synthesis rules are supported:
//!
//! - [`MetaModel::FixedZ`]: common-effect model, weights `w_i = 1/se_i^2`, z-test.
//! - [`MetaModel::RandomZ`]: DerSimonian–Laird between-study variance,
//!   weights `w*_i = 1/(se_i^2 + tau^2)`, z-test.
//! - [`MetaModel::RandomT`]: same weights, Hartung–Knapp variance
//!   `sum w*_i (y_i - mu)^2 / ((N-1) sum w*_i)` and a t reference with
//!   `N-1` degrees of freedom.
//!
//! All arithmetic happens on the additive analysis scale (log scale for ratio
//! measures), where the null value is 0.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize, Serializer};

use crate::dist::{normal_quantile, normal_tails, t_quantile, t_tails};
use crate::error::{Error, Result};

/// One study's estimate on the analysis scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub label: String,
    /// Point estimate (log ratio for HR/RR/OR, raw for mean differences).
    pub effect: f64,
    /// Standard error of `effect`, on the same scale.
    pub se: f64,
}

impl Study {
    pub fn new(label: impl Into<String>, effect: f64, se: f64) -> Self {
        Study {
            label: label.into(),
            effect,
            se,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.effect.is_finite() {
            return Err(Error::InvalidStudy {
                label: self.label.clone(),
                reason: format!("effect {} is not finite", self.effect),
            });
        }
        if !(self.se.is_finite() && self.se > 0.0) {
            return Err(Error::InvalidStudy {
                label: self.label.clone(),
                reason: format!("standard error {} must be positive and finite", self.se),
            });
        }
        Ok(())
    }
}

/// Original reporting scale of the effects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// HR, RR or OR; effects are stored as natural logs.
    Ratio,
    /// Mean difference; effects are stored as is.
    Difference,
}

impl Measure {
    /// Null value on the display scale.
    pub fn null_display(self) -> f64 {
        match self {
            Measure::Ratio => 1.0,
            Measure::Difference => 0.0,
        }
    }

    /// Maps an analysis-scale value onto the display scale.
    pub fn to_display(self, x: f64) -> f64 {
        match self {
            Measure::Ratio => x.exp(),
            Measure::Difference => x,
        }
    }
}

/// A validated, ordered collection of studies with unique labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySet {
    studies: Vec<Study>,
    measure: Measure,
}

impl StudySet {
    pub fn new(studies: Vec<Study>, measure: Measure) -> Result<Self> {
        if studies.is_empty() {
            return Err(Error::NoStudies);
        }
        let mut seen = HashSet::with_capacity(studies.len());
        for s in &studies {
            s.validate()?;
            if !seen.insert(s.label.as_str()) {
                return Err(Error::DuplicateLabel(s.label.clone()));
            }
        }
        Ok(StudySet { studies, measure })
    }

    pub fn studies(&self) -> &[Study] {
        &self.studies
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn len(&self) -> usize {
        self.studies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.studies.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.studies.iter().map(|s| s.label.clone()).collect()
    }

    pub(crate) fn effects(&self) -> Vec<f64> {
        self.studies.iter().map(|s| s.effect).collect()
    }

    pub(crate) fn ses(&self) -> Vec<f64> {
        self.studies.iter().map(|s| s.se).collect()
    }
}

/// Which synthesis rule to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaModel {
    FixedZ,
    RandomZ,
    RandomT,
}

impl MetaModel {
    pub const ALL: [MetaModel; 3] = [MetaModel::FixedZ, MetaModel::RandomZ, MetaModel::RandomT];

    /// Smallest number of studies the model can synthesize.
    pub fn min_studies(self) -> usize {
        match self {
            MetaModel::FixedZ => 1,
            MetaModel::RandomZ | MetaModel::RandomT => 2,
        }
    }

    pub fn is_random(self) -> bool {
        !matches!(self, MetaModel::FixedZ)
    }
}

impl fmt::Display for MetaModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetaModel::FixedZ => "fixed",
            MetaModel::RandomZ => "random-z",
            MetaModel::RandomT => "random-t",
        })
    }
}

impl FromStr for MetaModel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "fixed" | "fixed-z" | "fixed_z" => Ok(MetaModel::FixedZ),
            "random-z" | "random_z" => Ok(MetaModel::RandomZ),
            "random-t" | "random_t" => Ok(MetaModel::RandomT),
            other => Err(format!(
                "unknown model {other:?} (expected fixed, random-z or random-t)"
            )),
        }
    }
}

/// Outcome of one meta-analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetaResult {
    pub model: MetaModel,
    pub n: usize,
    /// Estimate of the common effect (fixed) or the mean effect (random).
    pub summary: f64,
    pub se_summary: f64,
    /// Between-study variance; 0 for the fixed-effect model.
    pub tau2: f64,
    /// Test statistic `summary / se_summary`.
    pub statistic: f64,
    pub p_left: f64,
    pub p_right: f64,
    pub p_two: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub alpha: f64,
    /// Degrees of freedom of the reference distribution; infinite for z-tests
    /// (serialized as `null`).
    #[serde(serialize_with = "serialize_df")]
    pub df: f64,
}

fn serialize_df<S: Serializer>(df: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if df.is_finite() {
        s.serialize_f64(*df)
    } else {
        s.serialize_none()
    }
}

impl MetaResult {
    /// True when the (1 - alpha) interval leaves out the null value 0.
    pub fn ci_excludes_null(&self) -> bool {
        !(self.ci_low < 0.0 && 0.0 < self.ci_high)
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    Ok(())
}

/// Critical value of the reference distribution, `q_{1-alpha/2}`.
pub(crate) fn critical_value(alpha: f64, df: f64) -> Result<f64> {
    if df.is_finite() {
        t_quantile(1.0 - alpha / 2.0, df)
    } else {
        normal_quantile(1.0 - alpha / 2.0)
    }
}

/// Fixed-effect (common-effect) inverse-variance meta-analysis with a z-test.
pub fn fixed_effect_meta(studies: &StudySet, alpha: f64) -> Result<MetaResult> {
    analyze_effects(&studies.effects(), &studies.ses(), MetaModel::FixedZ, alpha)
}

/// DerSimonian–Laird moment estimator of the between-study variance.
pub fn dersimonian_laird_tau2(studies: &StudySet) -> Result<f64> {
    dl_tau2(&studies.effects(), &studies.ses())
}

/// Random-effects meta-analysis; `model` must be `RandomZ` or `RandomT`.
pub fn random_effects_meta(studies: &StudySet, model: MetaModel, alpha: f64) -> Result<MetaResult> {
    if !model.is_random() {
        return Err(Error::Degenerate(
            "random_effects_meta called with the fixed-effect model".into(),
        ));
    }
    analyze_effects(&studies.effects(), &studies.ses(), model, alpha)
}

/// Dispatches to the rule selected by `model`.
pub fn meta_analysis(studies: &StudySet, model: MetaModel, alpha: f64) -> Result<MetaResult> {
    analyze_effects(&studies.effects(), &studies.ses(), model, alpha)
}

/// Weights each study receives in the summary under `model` (unnormalized).
pub fn study_weights(studies: &StudySet, model: MetaModel) -> Result<Vec<f64>> {
    let ses = studies.ses();
    let tau2 = if model.is_random() {
        dl_tau2(&studies.effects(), &ses)?
    } else {
        0.0
    };
    Ok(ses.iter().map(|s| 1.0 / (s * s + tau2)).collect())
}

fn validate_parts(effects: &[f64], ses: &[f64]) -> Result<()> {
    if effects.len() != ses.len() {
        return Err(Error::Degenerate(format!(
            "{} effects but {} standard errors",
            effects.len(),
            ses.len()
        )));
    }
    if effects.is_empty() {
        return Err(Error::NoStudies);
    }
    for (i, (&y, &s)) in effects.iter().zip(ses).enumerate() {
        if !y.is_finite() || !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidStudy {
                label: format!("#{}", i + 1),
                reason: format!("effect {y}, se {s}"),
            });
        }
    }
    Ok(())
}

/// Weighted mean and sum of weights.
fn weighted_mean(effects: &[f64], weights: &[f64]) -> (f64, f64) {
    let w_sum: f64 = weights.iter().sum();
    let mean = effects.iter().zip(weights).map(|(y, w)| w * y).sum::<f64>() / w_sum;
    (mean, w_sum)
}

pub(crate) fn dl_tau2(effects: &[f64], ses: &[f64]) -> Result<f64> {
    validate_parts(effects, ses)?;
    let n = effects.len();
    if n < 2 {
        return Err(Error::Tau2Undefined(n));
    }
    let w: Vec<f64> = ses.iter().map(|s| 1.0 / (s * s)).collect();
    let (mean, w_sum) = weighted_mean(effects, &w);
    let q: f64 = effects
        .iter()
        .zip(&w)
        .map(|(y, wi)| wi * (y - mean) * (y - mean))
        .sum();
    let df = (n - 1) as f64;
    if q <= df {
        return Ok(0.0);
    }
    let c = w_sum - w.iter().map(|wi| wi * wi).sum::<f64>() / w_sum;
    Ok(((q - df) / c).max(0.0))
}

/// Meta-analysis on raw effect/standard-error slices. Used directly by the
/// subset enumeration and the simulation, which would otherwise rebuild a
/// labelled [`StudySet`] per evaluation.
pub fn analyze_effects(
    effects: &[f64],
    ses: &[f64],
    model: MetaModel,
    alpha: f64,
) -> Result<MetaResult> {
    check_alpha(alpha)?;
    validate_parts(effects, ses)?;
    let n = effects.len();
    if n < model.min_studies() {
        return Err(Error::TooFewStudies {
            context: "random-effects meta-analysis",
            needed: model.min_studies(),
            got: n,
        });
    }

    let (summary, se_summary, tau2, df) = match model {
        MetaModel::FixedZ => {
            let w: Vec<f64> = ses.iter().map(|s| 1.0 / (s * s)).collect();
            let (mean, w_sum) = weighted_mean(effects, &w);
            (mean, w_sum.recip().sqrt(), 0.0, f64::INFINITY)
        }
        MetaModel::RandomZ => {
            let tau2 = dl_tau2(effects, ses)?;
            let w: Vec<f64> = ses.iter().map(|s| 1.0 / (s * s + tau2)).collect();
            let (mean, w_sum) = weighted_mean(effects, &w);
            (mean, w_sum.recip().sqrt(), tau2, f64::INFINITY)
        }
        MetaModel::RandomT => {
            let tau2 = dl_tau2(effects, ses)?;
            let w: Vec<f64> = ses.iter().map(|s| 1.0 / (s * s + tau2)).collect();
            let (mean, w_sum) = weighted_mean(effects, &w);
            let df = (n - 1) as f64;
            let ss: f64 = effects
                .iter()
                .zip(&w)
                .map(|(y, wi)| wi * (y - mean) * (y - mean))
                .sum();
            let var = ss / (df * w_sum);
            if var.is_nan() || var <= 0.0 || effects.iter().all(|&y| y == effects[0]) {
                return Err(Error::Degenerate(
                    "Hartung-Knapp variance is zero (all effects identical)".into(),
                ));
            }
            (mean, var.sqrt(), tau2, df)
        }
    };

    let statistic = summary / se_summary;
    let (p_left, p_right) = if df.is_finite() {
        t_tails(statistic, df)
    } else {
        normal_tails(statistic)
    };
    let p_two = (2.0 * p_left.min(p_right)).min(1.0);
    let crit = critical_value(alpha, df)?;
    Ok(MetaResult {
        model,
        n,
        summary,
        se_summary,
        tau2,
        statistic,
        p_left,
        p_right,
        p_two,
        ci_low: summary - crit * se_summary,
        ci_high: summary + crit * se_summary,
        alpha,
        df,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

    fn set(rows: &[(f64, f64)]) -> StudySet {
        let studies = rows
            .iter()
            .enumerate()
            .map(|(i, &(y, s))| Study::new(format!("s{}", i + 1), y, s))
            .collect();
        StudySet::new(studies, Measure::Difference).unwrap()
    }

    #[test]
    fn single_study_fixed() {
        let r = fixed_effect_meta(&set(&[(0.5, 0.25)]), 0.05).unwrap();
        assert_eq!(r.summary, 0.5);
        assert_eq!(r.se_summary, 0.25);
        // z = 2; independent oracle: statrs normal.
        let oracle = 2.0 * Normal::new(0.0, 1.0).unwrap().sf(2.0);
        assert!((r.p_two - oracle).abs() < 1e-11);
        // 2 * Phi(-2) to 20 digits (mpmath).
        assert!((r.p_two - 0.045_500_263_896_358_41).abs() < 1e-16);
        assert!((r.p_two - 0.0455).abs() < 5e-5);
        assert!((r.ci_low - 0.010).abs() < 5e-4 && (r.ci_high - 0.990).abs() < 5e-4);
        assert_eq!(r.tau2, 0.0);
        assert!(r.df.is_infinite());
    }

    #[test]
    fn symmetric_null_pair() {
        let r = fixed_effect_meta(&set(&[(0.0, 1.0), (0.0, 1.0)]), 0.05).unwrap();
        assert_eq!(r.summary, 0.0);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_left, 0.5);
        assert_eq!(r.p_right, 0.5);
        assert_eq!(r.p_two, 1.0);
    }

    #[test]
    fn equal_pair_closed_form() {
        let r = fixed_effect_meta(&set(&[(0.5, 0.25), (0.5, 0.25)]), 0.05).unwrap();
        assert!((r.se_summary - 0.25 / 2f64.sqrt()).abs() < 1e-15);
        assert!((r.statistic - 8f64.sqrt()).abs() < 1e-12);
        let oracle = 2.0 * Normal::new(0.0, 1.0).unwrap().sf(8f64.sqrt());
        assert!((r.p_two - oracle).abs() < 1e-11);
        assert!((r.p_two - 0.00468).abs() < 1e-5);
    }

    #[test]
    fn errors() {
        assert_eq!(StudySet::new(vec![], Measure::Ratio), Err(Error::NoStudies));
        assert!(matches!(
            StudySet::new(vec![Study::new("a", f64::NAN, 1.0)], Measure::Ratio),
            Err(Error::InvalidStudy { .. })
        ));
        assert!(matches!(
            StudySet::new(vec![Study::new("a", 0.1, 0.0)], Measure::Ratio),
            Err(Error::InvalidStudy { .. })
        ));
        assert!(matches!(
            StudySet::new(
                vec![Study::new("a", 0.1, 1.0), Study::new("a", 0.2, 1.0)],
                Measure::Ratio
            ),
            Err(Error::DuplicateLabel(_))
        ));
        assert_eq!(
            dersimonian_laird_tau2(&set(&[(0.1, 1.0)])),
            Err(Error::Tau2Undefined(1))
        );
        assert!(random_effects_meta(&set(&[(0.1, 1.0)]), MetaModel::RandomZ, 0.05).is_err());
        assert!(fixed_effect_meta(&set(&[(0.1, 1.0)]), 1.0).is_err());
    }

    #[test]
    fn tau2_zero_heterogeneity() {
        let s = set(&[(0.3, 0.2), (0.3, 0.2), (0.3, 0.2)]);
        assert_eq!(dersimonian_laird_tau2(&s).unwrap(), 0.0);
        // Q = 0.005 < 1
        let s = set(&[(0.0, 1.0), (0.1, 1.0)]);
        assert_eq!(dersimonian_laird_tau2(&s).unwrap(), 0.0);
    }

    #[test]
    fn tau2_three_spread_studies() {
        // Oracle by hand: w = 100 each, mean 0, Q = 100 * (1 + 0 + 1) = 200,
        // c = 300 - 30000/300 = 200, tau2 = (200 - 2) / 200 = 0.99.
        let s = set(&[(-1.0, 0.1), (0.0, 0.1), (1.0, 0.1)]);
        assert!((dersimonian_laird_tau2(&s).unwrap() - 0.99).abs() < 1e-14);
    }

    #[test]
    fn random_z_reduces_to_fixed_without_heterogeneity() {
        let s = set(&[(0.4, 0.2), (0.4, 0.1), (0.4, 0.3)]);
        let f = fixed_effect_meta(&s, 0.05).unwrap();
        let r = random_effects_meta(&s, MetaModel::RandomZ, 0.05).unwrap();
        assert_eq!(r.tau2, 0.0);
        assert!((f.summary - r.summary).abs() < 1e-12);
        assert!((f.p_two - r.p_two).abs() < 1e-12);
        assert!((f.ci_low - r.ci_low).abs() < 1e-12);
    }

    #[test]
    fn random_t_equal_se_is_one_sample_t() {
        let ys = [0.12, -0.03, 0.31, 0.07, 0.2];
        let s = set(&ys.map(|y| (y, 0.05)));
        let r = random_effects_meta(&s, MetaModel::RandomT, 0.05).unwrap();
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let t = mean / (var / n).sqrt();
        let oracle = StudentsT::new(0.0, 1.0, n - 1.0).unwrap();
        assert!((r.p_right - oracle.sf(t)).abs() < 1e-10);
        assert!((r.p_left - oracle.cdf(t)).abs() < 1e-10);
        assert_eq!(r.df, 4.0);
    }

    #[test]
    fn strong_random_z_signal() {
        let s = set(&[(0.8, 0.05), (0.9, 0.05), (1.0, 0.05)]);
        let r = random_effects_meta(&s, MetaModel::RandomZ, 0.05).unwrap();
        assert!(r.p_two < 1e-6);
        assert!(r.ci_low > 0.0);
    }

    #[test]
    fn random_t_identical_effects_is_degenerate() {
        let s = set(&[(0.4, 0.1), (0.4, 0.1), (0.4, 0.1)]);
        assert!(matches!(
            random_effects_meta(&s, MetaModel::RandomT, 0.05),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn model_parsing() {
        assert_eq!("fixed".parse::<MetaModel>().unwrap(), MetaModel::FixedZ);
        assert_eq!("random-t".parse::<MetaModel>().unwrap(), MetaModel::RandomT);
        assert!("bogus".parse::<MetaModel>().is_err());
        for m in MetaModel::ALL {
            assert_eq!(m.to_string().parse::<MetaModel>().unwrap(), m);
        }
    }
}
