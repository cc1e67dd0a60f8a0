//! Text, SVG and JSON output.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::meta::{check_alpha, critical_value, study_weights, Measure, MetaResult, StudySet};
use crate::multiplicity::{adjust, declare, Adjustment, EndpointFamily};
use crate::replicability::{RValueResult, SensitivityInterval};

/// r-values below this are shown as "<0.0001".
pub const DISPLAY_FLOOR: f64 = 1e-4;

/// Formats an r-value (or adjusted r-value) for text output: four decimals
/// with trailing zeros dropped, and a floor at 0.0001.
pub fn format_rvalue(r: f64) -> String {
    if r < DISPLAY_FLOOR {
        return "<0.0001".to_string();
    }
    trim_zeros(format!("{r:.4}"))
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

/// `= 0.0355` or `< 0.0001`.
fn rvalue_relation(r: f64) -> String {
    let f = format_rvalue(r);
    match f.strip_prefix('<') {
        Some(rest) => format!("< {rest}"),
        None => format!("= {f}"),
    }
}

fn rvalue_clause(r: f64) -> String {
    format!("(r-value {})", rvalue_relation(r))
}

/// The sentence recommended for abstracts and forest plots.
pub fn report_sentence(r: &RValueResult, alpha: f64) -> String {
    let clause = rvalue_clause(r.r_two);
    match (r.r_two <= alpha, r.u) {
        (true, 2) => format!("This result was replicated in more than one study {clause}."),
        (false, 2) => format!(
            "We cannot rule out the possibility that this result is based on a single study {clause}."
        ),
        (true, u) => format!("This result was replicated in at least {u} studies {clause}."),
        (false, u) => format!(
            "We cannot rule out the possibility that this result is based on fewer than {u} studies {clause}."
        ),
    }
}

/// Formats a value on the display scale for tables and plots.
pub fn format_display(x: f64) -> String {
    if x.abs() >= 100.0 {
        format!("{x:.1}")
    } else if x.abs() >= 0.01 || x == 0.0 {
        format!("{x:.2}")
    } else {
        format!("{x:.3e}")
    }
}

#[derive(Debug, Clone)]
pub struct PlotOptions {
    pub title: Option<String>,
    /// Name of the effect measure shown on the axis (e.g. "HR").
    pub measure_label: String,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions {
            title: None,
            measure_label: "Effect".into(),
        }
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

// Fixed geometry, in px.
const WIDTH: f64 = 900.0;
const LABEL_X: f64 = 20.0;
const PLOT_X0: f64 = 270.0;
const PLOT_X1: f64 = 610.0;
const ESTIMATE_X: f64 = 640.0;
const WEIGHT_X: f64 = 880.0;
const TOP: f64 = 70.0;
const ROW_H: f64 = 24.0;
const MAX_MARKER: f64 = 16.0;

/// Tick positions (analysis scale) and their labels.
fn ticks(lo: f64, hi: f64, measure: Measure) -> Vec<(f64, String)> {
    match measure {
        Measure::Ratio => {
            let (dlo, dhi) = (lo.exp(), hi.exp());
            let mut out = Vec::new();
            let first = dlo.log10().floor() as i32;
            let last = dhi.log10().ceil() as i32;
            let mantissas: &[f64] = if last - first > 3 {
                &[1.0]
            } else {
                &[1.0, 2.0, 5.0]
            };
            for e in first..=last {
                for m in mantissas {
                    let v = m * 10f64.powi(e);
                    if v >= dlo && v <= dhi {
                        out.push((v.ln(), trim_zeros(format!("{v:.3}"))));
                    }
                }
            }
            out
        }
        Measure::Difference => {
            let span = hi - lo;
            let raw = span / 6.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0]
                .iter()
                .map(|m| m * mag)
                .find(|s| span / s <= 8.0)
                .unwrap_or(10.0 * mag);
            let mut out = Vec::new();
            let mut k = (lo / step).ceil() as i64;
            while (k as f64) * step <= hi + 1e-12 * span {
                let v = k as f64 * step;
                let v = if v.abs() < 1e-12 * span { 0.0 } else { v };
                out.push((v, trim_zeros(format!("{v:.4}"))));
                k += 1;
            }
            out
        }
    }
}

/// SVG forest plot with the r-value annotation. Studies excluded for the
/// r-value (see [`RValueResult::excluded`]) are marked with an asterisk.
pub fn render_forest_plot(
    studies: &StudySet,
    meta: &MetaResult,
    rres: &RValueResult,
    interval: Option<&SensitivityInterval>,
    options: &PlotOptions,
) -> Result<String> {
    let measure = studies.measure();
    let crit = critical_value(meta.alpha, f64::INFINITY)?;
    let weights = study_weights(studies, meta.model)?;
    let w_total: f64 = weights.iter().sum();
    let w_max = weights.iter().cloned().fold(0.0, f64::max);

    struct Row<'a> {
        label: &'a str,
        effect: f64,
        low: f64,
        high: f64,
        weight: f64,
        excluded: bool,
    }
    let excluded = rres.excluded();
    let rows: Vec<Row> = studies
        .studies()
        .iter()
        .zip(&weights)
        .map(|(s, &w)| Row {
            label: &s.label,
            effect: s.effect,
            low: s.effect - crit * s.se,
            high: s.effect + crit * s.se,
            weight: w,
            excluded: excluded.iter().any(|l| l == &s.label),
        })
        .collect();

    for r in &rows {
        if !(r.low.is_finite() && r.high.is_finite()) {
            return Err(Error::Render(format!(
                "non-finite interval for study {:?}",
                r.label
            )));
        }
        if r.high.is_nan() || r.low.is_nan() || r.high <= r.low {
            return Err(Error::Render(format!(
                "zero-width interval for study {:?}",
                r.label
            )));
        }
    }
    if !meta.ci_low.is_finite() || !meta.ci_high.is_finite() || meta.ci_high <= meta.ci_low {
        return Err(Error::Render("degenerate summary interval".into()));
    }

    let mut lo = rows
        .iter()
        .map(|r| r.low)
        .fold(meta.ci_low.min(0.0), f64::min);
    let mut hi = rows
        .iter()
        .map(|r| r.high)
        .fold(meta.ci_high.max(0.0), f64::max);
    if let Some(si) = interval {
        lo = lo.min(si.low);
        hi = hi.max(si.high);
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let x = |v: f64| PLOT_X0 + (v - lo) / (hi - lo) * (PLOT_X1 - PLOT_X0);

    let n = rows.len() as f64;
    let summary_y = TOP + n * ROW_H + ROW_H;
    let axis_y = summary_y + ROW_H;
    let height = axis_y + 120.0;
    for v in [x(lo), x(hi), x(0.0), summary_y, height] {
        if !v.is_finite() {
            return Err(Error::Render("non-finite plot coordinate".into()));
        }
    }

    let conf = trim_zeros(format!("{:.2}", 100.0 * (1.0 - meta.alpha)));
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{WIDTH:.0}" height="{height:.0}" fill="white"/>"#
    );
    if let Some(title) = &options.title {
        let _ = writeln!(
            svg,
            r#"<text x="{LABEL_X:.0}" y="24" font-size="15" font-weight="bold">{}</text>"#,
            escape(title)
        );
    }
    let header_y = TOP - 18.0;
    let _ = writeln!(
        svg,
        r#"<text x="{LABEL_X:.0}" y="{header_y:.2}" font-weight="bold">Study</text>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{ESTIMATE_X:.0}" y="{header_y:.2}" font-weight="bold">{} [{conf}% CI]</text>"#,
        escape(&options.measure_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{WEIGHT_X:.0}" y="{header_y:.2}" font-weight="bold" text-anchor="end">Weight</text>"#
    );

    // Null line.
    let x0 = x(0.0);
    let _ = writeln!(
        svg,
        r##"<line class="null" x1="{x0:.2}" y1="{:.2}" x2="{x0:.2}" y2="{axis_y:.2}" stroke="#666" stroke-dasharray="4,3"/>"##,
        TOP - 8.0
    );

    for (i, r) in rows.iter().enumerate() {
        let y = TOP + i as f64 * ROW_H + ROW_H / 2.0;
        let _ = writeln!(svg, r#"<g class="study">"#);
        let _ = writeln!(
            svg,
            r#"<text x="{LABEL_X:.0}" y="{:.2}">{}</text>"#,
            y + 4.0,
            escape(r.label)
        );
        if r.excluded {
            let _ = writeln!(
                svg,
                r#"<text class="excluded" x="{:.0}" y="{:.2}" font-weight="bold">*</text>"#,
                PLOT_X0 - 16.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/>"#,
            x(r.low),
            x(r.high)
        );
        // Marker area proportional to weight.
        let side = MAX_MARKER * (r.weight / w_max).sqrt();
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="{side:.2}" height="{side:.2}" fill="black"/>"#,
            x(r.effect) - side / 2.0,
            y - side / 2.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{ESTIMATE_X:.0}" y="{:.2}">{} [{}, {}]</text>"#,
            y + 4.0,
            format_display(measure.to_display(r.effect)),
            format_display(measure.to_display(r.low)),
            format_display(measure.to_display(r.high))
        );
        let _ = writeln!(
            svg,
            r#"<text x="{WEIGHT_X:.0}" y="{:.2}" text-anchor="end">{:.1}%</text>"#,
            y + 4.0,
            100.0 * r.weight / w_total
        );
        let _ = writeln!(svg, "</g>");
    }

    // Summary diamond.
    let (dl, dc, dh) = (x(meta.ci_low), x(meta.summary), x(meta.ci_high));
    let _ = writeln!(
        svg,
        r#"<polygon class="summary" points="{dl:.2},{summary_y:.2} {dc:.2},{:.2} {dh:.2},{summary_y:.2} {dc:.2},{:.2}" fill="black"/>"#,
        summary_y - 7.0,
        summary_y + 7.0
    );
    let model_name = match meta.model {
        crate::meta::MetaModel::FixedZ => "Total (fixed effect)",
        crate::meta::MetaModel::RandomZ => "Total (random effects, z)",
        crate::meta::MetaModel::RandomT => "Total (random effects, t)",
    };
    let _ = writeln!(
        svg,
        r#"<text x="{LABEL_X:.0}" y="{:.2}" font-weight="bold">{model_name}</text>"#,
        summary_y + 4.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{ESTIMATE_X:.0}" y="{:.2}" font-weight="bold">{} [{}, {}]</text>"#,
        summary_y + 4.0,
        format_display(measure.to_display(meta.summary)),
        format_display(measure.to_display(meta.ci_low)),
        format_display(measure.to_display(meta.ci_high))
    );

    // Axis.
    let _ = writeln!(
        svg,
        r#"<line class="axis" x1="{PLOT_X0:.2}" y1="{axis_y:.2}" x2="{PLOT_X1:.2}" y2="{axis_y:.2}" stroke="black"/>"#
    );
    for (v, label) in ticks(lo, hi, measure) {
        let tx = x(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{tx:.2}" y1="{axis_y:.2}" x2="{tx:.2}" y2="{:.2}" stroke="black"/>"#,
            axis_y + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{tx:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#,
            axis_y + 18.0
        );
    }
    let scale_note = match measure {
        Measure::Ratio => " (log scale)",
        Measure::Difference => "",
    };
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}{scale_note}</text>"#,
        0.5 * (PLOT_X0 + PLOT_X1),
        axis_y + 34.0,
        escape(&options.measure_label)
    );

    // Annotations.
    let mut note_y = axis_y + 60.0;
    let _ = writeln!(
        svg,
        r#"<text class="rvalue" x="{LABEL_X:.0}" y="{note_y:.2}">r-value (u = {}) {}</text>"#,
        rres.u,
        escape(&rvalue_relation(rres.r_two))
    );
    if let Some(si) = interval {
        note_y += 18.0;
        let _ = writeln!(
            svg,
            r#"<text class="sensitivity" x="{LABEL_X:.0}" y="{note_y:.2}">Sensitivity interval ({conf}%): [{}, {}]</text>"#,
            format_display(measure.to_display(si.low)),
            format_display(measure.to_display(si.high))
        );
    }
    if !excluded.is_empty() {
        note_y += 18.0;
        let _ = writeln!(
            svg,
            r#"<text x="{LABEL_X:.0}" y="{note_y:.2}">* excluded for the r-value computation</text>"#
        );
    }
    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}

/// Per-endpoint adjustment output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdjustedEntry {
    pub label: String,
    pub r_value: f64,
    pub adjusted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdjustmentReport {
    pub method: Adjustment,
    pub alpha: f64,
    pub entries: Vec<AdjustedEntry>,
    pub declared: Vec<String>,
}

impl AdjustmentReport {
    pub fn new(family: &EndpointFamily, method: Adjustment, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let adjusted = adjust(family, method);
        let declared = declare(family, &adjusted, alpha);
        let entries = family
            .entries()
            .iter()
            .zip(&adjusted)
            .map(|((label, r), &a)| AdjustedEntry {
                label: label.clone(),
                r_value: *r,
                adjusted: a,
            })
            .collect();
        Ok(AdjustmentReport {
            method,
            alpha,
            entries,
            declared,
        })
    }

    pub fn to_text(&self) -> String {
        let width = self
            .entries
            .iter()
            .map(|e| e.label.chars().count())
            .max()
            .unwrap_or(0)
            .max(8);
        let mut s = String::new();
        let method = match self.method {
            Adjustment::Bonferroni => "Bonferroni (FWER)",
            Adjustment::Bh => "Benjamini-Hochberg (FDR)",
        };
        let _ = writeln!(s, "Adjustment: {method}, alpha {}", self.alpha);
        let _ = writeln!(
            s,
            "  {:<width$}  {:>8}  {:>8}",
            "endpoint", "r-value", "adjusted"
        );
        for e in &self.entries {
            let _ = writeln!(
                s,
                "  {:<width$}  {:>8}  {:>8}",
                e.label,
                format_rvalue(e.r_value),
                format_rvalue(e.adjusted)
            );
        }
        if self.declared.is_empty() {
            let _ = writeln!(s, "Declared replicable: none");
        } else {
            let _ = writeln!(s, "Declared replicable: {}", self.declared.join(", "));
        }
        s
    }
}

/// Sensitivity interval with its display-scale endpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalReport {
    #[serde(flatten)]
    pub interval: SensitivityInterval,
    pub display_low: f64,
    pub display_high: f64,
    pub excludes_null: bool,
}

impl From<SensitivityInterval> for IntervalReport {
    fn from(interval: SensitivityInterval) -> Self {
        IntervalReport {
            display_low: interval.display_low(),
            display_high: interval.display_high(),
            excludes_null: interval.excludes_null(),
            interval,
        }
    }
}

/// Serializes any result document with stable key order and full precision.
pub fn serialize_results<T: Serialize>(doc: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}
