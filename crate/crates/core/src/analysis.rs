//! End-to-end analysis of one study file: summary meta-analysis,
//! leave-one-out table, r-value, sensitivity interval, optional lower bound.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{Normalized, ReportedMeasure};
use crate::meta::{meta_analysis, study_weights, Measure, MetaModel, MetaResult, Study};
use crate::replicability::{
    leave_one_out_report, replicability_bound_capped, IntervalMode, LeaveOneOutReport,
    RValueResult, ReplicabilityBound, SubsetScan, DEFAULT_MAX_EVALUATIONS, MIN_STUDIES,
};
use crate::report::{format_display, format_rvalue, report_sentence, IntervalReport};

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub model: MetaModel,
    pub alpha: f64,
    pub u: usize,
    pub bound: bool,
    pub interval_mode: IntervalMode,
    pub max_evaluations: u128,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            model: MetaModel::FixedZ,
            alpha: 0.05,
            u: 2,
            bound: false,
            interval_mode: IntervalMode::Argmax,
            max_evaluations: DEFAULT_MAX_EVALUATIONS,
        }
    }
}

/// Summary estimate and interval on the display scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DisplaySummary {
    pub summary: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub null_value: f64,
}

/// Full result document, serialized as the `--json` output of `analyze`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub measure: ReportedMeasure,
    pub scale: Measure,
    pub model: MetaModel,
    pub alpha: f64,
    pub u: usize,
    pub studies: Vec<Study>,
    pub weights: Vec<f64>,
    pub meta: MetaResult,
    pub meta_display: DisplaySummary,
    pub leave_one_out: LeaveOneOutReport,
    pub r_value: RValueResult,
    pub sensitivity_interval: IntervalReport,
    pub report_sentence: String,
    pub bound: Option<ReplicabilityBound>,
    pub warnings: Vec<String>,
}

pub fn run_analysis(input: &Normalized, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    let studies = &input.studies;
    let n = studies.len();
    if n < MIN_STUDIES {
        return Err(Error::TooFewStudies {
            context: "replicability analysis",
            needed: MIN_STUDIES,
            got: n,
        });
    }
    let scale = studies.measure();
    let meta = meta_analysis(studies, opts.model, opts.alpha)?;
    let weights = study_weights(studies, opts.model)?;
    let leave_one_out = leave_one_out_report(studies, opts.model, opts.alpha)?;
    let scan = SubsetScan::run(
        studies,
        opts.u,
        opts.model,
        opts.alpha,
        opts.max_evaluations,
    )?;
    let r_value = scan.r_value();
    let sensitivity_interval: IntervalReport = scan.sensitivity_interval(opts.interval_mode).into();
    let sentence = report_sentence(&r_value, opts.alpha);
    let bound = if opts.bound {
        Some(replicability_bound_capped(
            studies,
            opts.model,
            opts.alpha,
            opts.max_evaluations,
        )?)
    } else {
        None
    };

    let mut warnings = input.warnings.clone();
    if opts.model == MetaModel::RandomT {
        let smallest = (n - opts.u + 1).min(n - 1);
        let smallest = if opts.bound {
            bound
                .as_ref()
                .and_then(|b| b.trace.last())
                .map_or(smallest, |r| n - r.u + 1)
        } else {
            smallest
        };
        if smallest == 2 {
            warnings.push(
                "random-t on 2-study subsets uses a t reference with 1 degree of freedom".into(),
            );
        }
    }

    Ok(AnalysisReport {
        measure: input.measure,
        scale,
        model: opts.model,
        alpha: opts.alpha,
        u: opts.u,
        studies: studies.studies().to_vec(),
        weights,
        meta,
        meta_display: DisplaySummary {
            summary: scale.to_display(meta.summary),
            ci_low: scale.to_display(meta.ci_low),
            ci_high: scale.to_display(meta.ci_high),
            null_value: scale.null_display(),
        },
        leave_one_out,
        r_value,
        sensitivity_interval,
        report_sentence: sentence,
        bound,
        warnings,
    })
}

fn format_p(p: f64) -> String {
    if p < 1e-4 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

impl AnalysisReport {
    fn show(&self, x: f64) -> String {
        format_display(self.scale.to_display(x))
    }

    fn ci(&self, r: &MetaResult) -> String {
        format!(
            "{} [{}, {}]",
            self.show(r.summary),
            self.show(r.ci_low),
            self.show(r.ci_high)
        )
    }

    /// Human-readable report printed by the CLI.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let conf = format!("{}%", 100.0 * (1.0 - self.alpha));
        let m = &self.meta;
        let _ = writeln!(
            s,
            "Meta-analysis: model {}, {} studies, measure {}, alpha {}",
            self.model,
            self.studies.len(),
            self.measure,
            self.alpha
        );
        let _ = writeln!(
            s,
            "  summary {} ({conf} CI)  p = {}  (left {}, right {})  tau2 = {}",
            self.ci(m),
            format_p(m.p_two),
            format_p(m.p_left),
            format_p(m.p_right),
            m.tau2
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "Leave-one-out meta-analyses:");
        let width = self
            .leave_one_out
            .rows
            .iter()
            .map(|r| r.excluded.chars().count())
            .max()
            .unwrap_or(8)
            .max(8);
        let _ = writeln!(
            s,
            "  {:<width$}  {:<28}  p (two-sided)",
            "excluded",
            format!("estimate [{conf} CI]")
        );
        for row in &self.leave_one_out.rows {
            let _ = writeln!(
                s,
                "  {:<width$}  {:<28}  {}",
                row.excluded,
                self.ci(&row.result),
                format_p(row.result.p_two)
            );
        }
        let _ = writeln!(s);
        let r = &self.r_value;
        let _ = writeln!(
            s,
            "r-value (u = {}): {}  (left {}, right {}; {} subset meta-analyses)",
            r.u,
            format_rvalue(r.r_two),
            format_rvalue(r.r_left),
            format_rvalue(r.r_right),
            r.evaluations
        );
        let _ = writeln!(s, "  excluded for the r-value: {}", r.excluded().join(", "));
        let si = &self.sensitivity_interval;
        let _ = writeln!(
            s,
            "Sensitivity interval ({conf}): [{}, {}]{}",
            format_display(si.display_low),
            format_display(si.display_high),
            if si.excludes_null {
                ""
            } else {
                "  (contains the null)"
            }
        );
        let _ = writeln!(s, "{}", self.report_sentence);
        if let Some(b) = &self.bound {
            let _ = writeln!(s);
            let _ = writeln!(s, "Lower bound on the number of studies with an effect:");
            let _ = writeln!(
                s,
                "  {:>3}  {:>9}  {:>10}  {:>10}  excluded study",
                "u", "r-value", "SI lower", "SI upper"
            );
            for row in &b.trace {
                let _ = writeln!(
                    s,
                    "  {:>3}  {:>9}  {:>10}  {:>10}  {}",
                    row.u,
                    format!("{:.2e}", row.r_value),
                    format_display(row.interval.display_low()),
                    format_display(row.interval.display_high()),
                    row.excluded.join(", ")
                );
            }
            let _ = writeln!(
                s,
                "  with {conf} confidence at least {} studies have an effect in the direction of the summary{}",
                b.bound,
                if b.exhausted { " (every admissible u passed)" } else { "" }
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}
