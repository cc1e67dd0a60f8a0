//! Leave-u-out replicability analysis.
//!
//! For `u` in `2..=N` the r-value is the largest meta-analysis p-value over
//! every subset that keeps `N - u + 1` of the `N` studies. A small r-value
//! means the finding survives the removal of any `u - 1` studies, i.e. at
//! least `u` studies carry the effect.
//!
//! Subsets are enumerated exhaustively in lexicographic order of their
//! (0-based) study indices. Ties in every argmax are resolved in favour of the
//! lexicographically smallest subset, so results never depend on the order in
//! which parallel workers finish.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::meta::{
    analyze_effects, check_alpha, meta_analysis, Measure, MetaModel, MetaResult, StudySet,
};

/// Default ceiling on the number of subset meta-analyses per r-value.
pub const DEFAULT_MAX_EVALUATIONS: u128 = 1_000_000;

/// Minimum number of studies for any replicability analysis.
pub const MIN_STUDIES: usize = 3;

const PARALLEL_THRESHOLD: usize = 512;

/// Binomial coefficient C(n, k), exact in 128-bit arithmetic for the sizes
/// used here.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Lexicographic stream of all `k`-subsets of `{0, .., n-1}`.
#[derive(Debug, Clone)]
pub struct Subsets {
    n: usize,
    next: Option<Vec<usize>>,
}

impl Iterator for Subsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let k = current.len();
        let mut succ = current.clone();
        // Rightmost position that can still be advanced.
        let mut i = k;
        while i > 0 {
            i -= 1;
            if succ[i] < self.n - k + i {
                succ[i] += 1;
                for j in i + 1..k {
                    succ[j] = succ[j - 1] + 1;
                }
                self.next = Some(succ);
                return Some(current);
            }
        }
        Some(current)
    }
}

/// All subsets of size `k` drawn from `n` items, as sorted 0-based indices.
pub fn enumerate_subsets(n: usize, k: usize) -> Result<Subsets> {
    if k == 0 || k > n {
        return Err(Error::InvalidSubsetSize { n, k });
    }
    Ok(Subsets {
        n,
        next: Some((0..k).collect()),
    })
}

/// r-values for one choice of `u`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RValueResult {
    pub u: usize,
    pub model: MetaModel,
    pub r_left: f64,
    pub r_right: f64,
    /// `min(1, 2 min(r_left, r_right))`.
    pub r_two: f64,
    /// Subset attaining `r_left`, as study labels in input order.
    pub argmax_left: Vec<String>,
    pub argmax_right: Vec<String>,
    /// Studies left out of `argmax_left`.
    pub excluded_left: Vec<String>,
    pub excluded_right: Vec<String>,
    /// Number of subset meta-analyses performed, `C(N, u - 1)`.
    pub evaluations: u128,
}

impl RValueResult {
    /// Studies whose removal drives the two-sided r-value: the complement of
    /// the argmax subset on the side that attains `min(r_left, r_right)`.
    pub fn excluded(&self) -> &[String] {
        if self.r_left < self.r_right {
            &self.excluded_left
        } else {
            &self.excluded_right
        }
    }

    /// True when replicability in at least `u` studies is established at `alpha`.
    pub fn is_replicated(&self, alpha: f64) -> bool {
        self.r_two <= alpha
    }
}

/// How the sensitivity interval endpoints are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMode {
    /// Upper limit from the subset attaining `r_left`, lower limit from the
    /// subset attaining `r_right`.
    #[default]
    Argmax,
    /// Smallest lower limit and largest upper limit over all subset intervals.
    Union,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Analysis,
    Ratio,
}

impl From<Measure> for Scale {
    fn from(m: Measure) -> Self {
        match m {
            Measure::Ratio => Scale::Ratio,
            Measure::Difference => Scale::Analysis,
        }
    }
}

/// Interval covering the (1 - alpha) confidence intervals of the leave-(u-1)-out
/// meta-analyses. Endpoints are stored on the analysis scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityInterval {
    pub low: f64,
    pub high: f64,
    pub alpha: f64,
    pub u: usize,
    pub mode: IntervalMode,
    pub source_low: Vec<String>,
    pub source_high: Vec<String>,
    pub scale: Scale,
}

impl SensitivityInterval {
    pub fn excludes_null(&self) -> bool {
        !(self.low < 0.0 && 0.0 < self.high)
    }

    pub fn display_low(&self) -> f64 {
        self.to_display(self.low)
    }

    pub fn display_high(&self) -> f64 {
        self.to_display(self.high)
    }

    fn to_display(&self, x: f64) -> f64 {
        match self.scale {
            Scale::Ratio => x.exp(),
            Scale::Analysis => x,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    index: usize,
    result: MetaResult,
}

/// Running maxima over subsets. `key` is maximized lexicographically; exact
/// ties go to the smaller enumeration index.
fn pick(
    a: Option<Candidate>,
    b: Option<Candidate>,
    key: fn(&MetaResult) -> (f64, f64),
) -> Option<Candidate> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => {
            let (kx, ky) = (key(&x.result), key(&y.result));
            if ky > kx || (ky == kx && y.index < x.index) {
                Some(y)
            } else {
                Some(x)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Extremes {
    left: Option<Candidate>,
    right: Option<Candidate>,
    lowest: Option<Candidate>,
    highest: Option<Candidate>,
}

impl Extremes {
    fn single(c: Candidate) -> Self {
        Extremes {
            left: Some(c),
            right: Some(c),
            lowest: Some(c),
            highest: Some(c),
        }
    }

    fn merge(self, other: Self) -> Self {
        Extremes {
            // All subsets share one reference distribution, so p_left is
            // increasing in the statistic; the statistic separates subsets
            // whose p-values saturate at 0 or 1.
            left: pick(self.left, other.left, |r| (r.p_left, r.statistic)),
            right: pick(self.right, other.right, |r| (r.p_right, -r.statistic)),
            lowest: pick(self.lowest, other.lowest, |r| (-r.ci_low, 0.0)),
            highest: pick(self.highest, other.highest, |r| (r.ci_high, 0.0)),
        }
    }
}

/// Everything learned from one pass over the size-`N - u + 1` subsets.
#[derive(Debug, Clone)]
pub struct SubsetScan {
    pub u: usize,
    pub model: MetaModel,
    pub alpha: f64,
    pub evaluations: u128,
    subsets: Vec<Vec<usize>>,
    extremes: Extremes,
    labels: Vec<String>,
    measure: Measure,
}

impl SubsetScan {
    /// Meta-analyzes every subset of `N - u + 1` studies.
    pub fn run(
        studies: &StudySet,
        u: usize,
        model: MetaModel,
        alpha: f64,
        max_evaluations: u128,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        let n = studies.len();
        check_u(n, u, model)?;
        let k = n - u + 1;
        let count = binomial(n, u - 1);
        if count > max_evaluations {
            return Err(Error::EnumerationCap {
                count,
                cap: max_evaluations,
            });
        }

        let subsets: Vec<Vec<usize>> = enumerate_subsets(n, k)?.collect();
        let effects: Vec<f64> = studies.studies().iter().map(|s| s.effect).collect();
        let ses: Vec<f64> = studies.studies().iter().map(|s| s.se).collect();

        let evaluate =
            |index: usize, subset: &[usize]| -> std::result::Result<Extremes, (usize, Error)> {
                let ys: Vec<f64> = subset.iter().map(|&i| effects[i]).collect();
                let ss: Vec<f64> = subset.iter().map(|&i| ses[i]).collect();
                analyze_effects(&ys, &ss, model, alpha)
                    .map(|result| Extremes::single(Candidate { index, result }))
                    .map_err(|e| (index, e))
            };
        // Keep the error from the lexicographically first failing subset.
        let combine =
            |a: std::result::Result<Extremes, (usize, Error)>,
             b: std::result::Result<Extremes, (usize, Error)>| match (a, b) {
                (Ok(x), Ok(y)) => Ok(x.merge(y)),
                (Err(e), Ok(_)) | (Ok(_), Err(e)) => Err(e),
                (Err(e1), Err(e2)) => Err(if e1.0 <= e2.0 { e1 } else { e2 }),
            };

        let reduced = if subsets.len() >= PARALLEL_THRESHOLD {
            subsets
                .par_iter()
                .enumerate()
                .map(|(i, s)| evaluate(i, s))
                .reduce(|| Ok(Extremes::default()), combine)
        } else {
            subsets
                .iter()
                .enumerate()
                .map(|(i, s)| evaluate(i, s))
                .fold(Ok(Extremes::default()), combine)
        };

        let labels = studies.labels();
        let extremes = reduced.map_err(|(index, source)| Error::SubsetFailed {
            subset: subsets[index].iter().map(|&i| labels[i].clone()).collect(),
            source: Box::new(source),
        })?;

        Ok(SubsetScan {
            u,
            model,
            alpha,
            evaluations: count,
            subsets,
            extremes,
            labels,
            measure: studies.measure(),
        })
    }

    fn names(&self, indices: &[usize]) -> Vec<String> {
        indices.iter().map(|&i| self.labels[i].clone()).collect()
    }

    fn complement(&self, indices: &[usize]) -> Vec<String> {
        (0..self.labels.len())
            .filter(|i| !indices.contains(i))
            .map(|i| self.labels[i].clone())
            .collect()
    }

    fn candidate(&self, c: Option<Candidate>) -> Candidate {
        c.expect("scan always evaluates at least one subset")
    }

    /// Indices of the subset attaining `r_left`.
    pub fn argmax_left(&self) -> &[usize] {
        &self.subsets[self.candidate(self.extremes.left).index]
    }

    /// Indices of the subset attaining `r_right`.
    pub fn argmax_right(&self) -> &[usize] {
        &self.subsets[self.candidate(self.extremes.right).index]
    }

    /// Meta-analysis of the subset attaining `r_left`.
    pub fn left_result(&self) -> MetaResult {
        self.candidate(self.extremes.left).result
    }

    /// Meta-analysis of the subset attaining `r_right`.
    pub fn right_result(&self) -> MetaResult {
        self.candidate(self.extremes.right).result
    }

    pub fn r_value(&self) -> RValueResult {
        let left = self.candidate(self.extremes.left);
        let right = self.candidate(self.extremes.right);
        let r_left = left.result.p_left;
        let r_right = right.result.p_right;
        let sl = &self.subsets[left.index];
        let sr = &self.subsets[right.index];
        RValueResult {
            u: self.u,
            model: self.model,
            r_left,
            r_right,
            r_two: (2.0 * r_left.min(r_right)).min(1.0),
            argmax_left: self.names(sl),
            argmax_right: self.names(sr),
            excluded_left: self.complement(sl),
            excluded_right: self.complement(sr),
            evaluations: self.evaluations,
        }
    }

    pub fn sensitivity_interval(&self, mode: IntervalMode) -> SensitivityInterval {
        let (lo, hi) = match mode {
            IntervalMode::Argmax => {
                let left = self.candidate(self.extremes.left);
                let right = self.candidate(self.extremes.right);
                if right.result.ci_low <= left.result.ci_high {
                    (right, left)
                } else {
                    // The two argmax intervals are disjoint; fall back to their hull.
                    let lo = if left.result.ci_low < right.result.ci_low {
                        left
                    } else {
                        right
                    };
                    let hi = if right.result.ci_high > left.result.ci_high {
                        right
                    } else {
                        left
                    };
                    (lo, hi)
                }
            }
            IntervalMode::Union => (
                self.candidate(self.extremes.lowest),
                self.candidate(self.extremes.highest),
            ),
        };
        SensitivityInterval {
            low: lo.result.ci_low,
            high: hi.result.ci_high,
            alpha: self.alpha,
            u: self.u,
            mode,
            source_low: self.names(&self.subsets[lo.index]),
            source_high: self.names(&self.subsets[hi.index]),
            scale: self.measure.into(),
        }
    }
}

/// Largest admissible `u` for `n` studies under `model`.
pub fn max_u(n: usize, model: MetaModel) -> usize {
    (n + 1).saturating_sub(model.min_studies())
}

fn check_u(n: usize, u: usize, model: MetaModel) -> Result<()> {
    if n < MIN_STUDIES {
        return Err(Error::TooFewStudies {
            context: "replicability analysis",
            needed: MIN_STUDIES,
            got: n,
        });
    }
    let max = max_u(n, model);
    if u < 2 || u > max {
        return Err(Error::UOutOfRange { u, min: 2, max });
    }
    Ok(())
}

/// r-value at `u` for the given model.
pub fn r_value(studies: &StudySet, u: usize, model: MetaModel) -> Result<RValueResult> {
    // The p-values do not depend on the confidence level.
    SubsetScan::run(studies, u, model, 0.05, DEFAULT_MAX_EVALUATIONS).map(|s| s.r_value())
}

/// (1 - alpha) sensitivity interval at `u`.
pub fn sensitivity_interval(
    studies: &StudySet,
    u: usize,
    model: MetaModel,
    alpha: f64,
) -> Result<SensitivityInterval> {
    SubsetScan::run(studies, u, model, alpha, DEFAULT_MAX_EVALUATIONS)
        .map(|s| s.sensitivity_interval(IntervalMode::Argmax))
}

/// One leave-one-out meta-analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeaveOneOutRow {
    pub excluded: String,
    pub result: MetaResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeaveOneOutReport {
    pub alpha: f64,
    /// One row per study, in input order; row `i` omits study `i`.
    pub rows: Vec<LeaveOneOutRow>,
    pub r_value: RValueResult,
    pub replicated: bool,
    pub decision: String,
}

/// Meta-analysis with each study omitted in turn, plus the u = 2 r-value.
pub fn leave_one_out_report(
    studies: &StudySet,
    model: MetaModel,
    alpha: f64,
) -> Result<LeaveOneOutReport> {
    check_alpha(alpha)?;
    let n = studies.len();
    check_u(n, 2, model)?;
    let all = studies.studies();
    let mut rows = Vec::with_capacity(n);
    for (i, omitted) in all.iter().enumerate() {
        let rest: Vec<_> = all
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, s)| s.clone())
            .collect();
        let subset = StudySet::new(rest, studies.measure())?;
        let result = meta_analysis(&subset, model, alpha).map_err(|e| Error::SubsetFailed {
            subset: subset.labels(),
            source: Box::new(e),
        })?;
        rows.push(LeaveOneOutRow {
            excluded: omitted.label.clone(),
            result,
        });
    }
    let r = SubsetScan::run(studies, 2, model, alpha, DEFAULT_MAX_EVALUATIONS)?.r_value();
    let replicated = r.is_replicated(alpha);
    let decision = if replicated {
        format!(
            "r-value {} <= {}: replicated in at least 2 studies",
            r.r_two, alpha
        )
    } else {
        format!(
            "r-value {} > {}: not replicable; the finding may rest on a single study",
            r.r_two, alpha
        )
    };
    Ok(LeaveOneOutReport {
        alpha,
        rows,
        r_value: r,
        replicated,
        decision,
    })
}

/// One row of the lower-bound trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub u: usize,
    pub r_value: f64,
    /// Studies newly excluded relative to the previous row's worst-case subset.
    pub excluded: Vec<String>,
    /// All studies left out of this row's worst-case subset.
    pub excluded_all: Vec<String>,
    pub interval: SensitivityInterval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicabilityBound {
    pub alpha: f64,
    /// (1 - alpha) lower bound on the number of studies with an effect in the
    /// direction of the summary; 1 means replicability was not established.
    pub bound: usize,
    /// True when every admissible `u` passed, so the bound is limited by `N`
    /// (or `N - 1` for random-effects models) rather than by the data.
    pub exhausted: bool,
    pub trace: Vec<BoundRow>,
}

/// Scans `u = 2, 3, ..` and stops at the first r-value above `alpha`.
pub fn replicability_bound(
    studies: &StudySet,
    model: MetaModel,
    alpha: f64,
) -> Result<ReplicabilityBound> {
    replicability_bound_capped(studies, model, alpha, DEFAULT_MAX_EVALUATIONS)
}

pub fn replicability_bound_capped(
    studies: &StudySet,
    model: MetaModel,
    alpha: f64,
    max_evaluations: u128,
) -> Result<ReplicabilityBound> {
    check_alpha(alpha)?;
    let n = studies.len();
    check_u(n, 2, model)?;
    let full = meta_analysis(studies, model, alpha)?;
    if full.p_two > alpha {
        return Err(Error::NotSignificant {
            p_two: full.p_two,
            alpha,
        });
    }
    let positive = full.summary > 0.0;

    let mut trace = Vec::new();
    let mut bound = 1;
    let mut previous: Vec<String> = Vec::new();
    let mut exhausted = true;
    for u in 2..=max_u(n, model) {
        let scan = SubsetScan::run(studies, u, model, alpha, max_evaluations)?;
        let r = scan.r_value();
        let excluded_all = if positive {
            r.excluded_right.clone()
        } else {
            r.excluded_left.clone()
        };
        let excluded = excluded_all
            .iter()
            .filter(|l| !previous.contains(l))
            .cloned()
            .collect();
        trace.push(BoundRow {
            u,
            r_value: r.r_two,
            excluded,
            excluded_all: excluded_all.clone(),
            interval: scan.sensitivity_interval(IntervalMode::Argmax),
        });
        if r.r_two > alpha {
            exhausted = false;
            break;
        }
        bound = u;
        previous = excluded_all;
    }
    Ok(ReplicabilityBound {
        alpha,
        bound,
        exhausted,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::normal_sf;
    use crate::meta::Study;

    fn set(rows: &[(f64, f64)]) -> StudySet {
        let studies = rows
            .iter()
            .enumerate()
            .map(|(i, &(y, s))| Study::new(format!("s{}", i + 1), y, s))
            .collect();
        StudySet::new(studies, Measure::Difference).unwrap()
    }

    fn dominant() -> StudySet {
        set(&[(5.0, 0.1), (0.0, 1.0), (0.01, 1.0)])
    }

    #[test]
    fn subsets_lexicographic() {
        let all: Vec<_> = enumerate_subsets(3, 2).unwrap().collect();
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(enumerate_subsets(5, 4).unwrap().count(), 5);
        assert_eq!(enumerate_subsets(11, 5).unwrap().count(), 462);
        assert_eq!(enumerate_subsets(4, 4).unwrap().count(), 1);
        assert!(enumerate_subsets(3, 4).is_err());
        assert!(enumerate_subsets(3, 0).is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(11, 5), 462);
        assert_eq!(binomial(5, 4), 5);
        assert_eq!(binomial(60, 30), 118_264_581_564_861_424);
        assert_eq!(binomial(3, 4), 0);
    }

    #[test]
    fn dominant_study_is_not_replicated() {
        let s = dominant();
        let r = r_value(&s, 2, MetaModel::FixedZ).unwrap();
        assert!(r.r_two > 0.05);
        assert_eq!(r.excluded(), ["s1".to_string()]);
        // Oracle: without s1 the two remaining studies pool to 0.005 with se 1/sqrt(2).
        let z = 0.005 / (0.5f64).sqrt();
        assert!((r.r_right - normal_sf(z)).abs() < 1e-15);
    }

    #[test]
    fn identical_studies_share_one_p_value() {
        let s = set(&[(1.0, 0.1), (1.0, 0.1), (1.0, 0.1)]);
        let pair = set(&[(1.0, 0.1), (1.0, 0.1)]);
        let p = meta_analysis(&pair, MetaModel::FixedZ, 0.05).unwrap();
        let r = r_value(&s, 2, MetaModel::FixedZ).unwrap();
        assert_eq!(r.r_two, p.p_two);
        let si = sensitivity_interval(&s, 2, MetaModel::FixedZ, 0.05).unwrap();
        assert_eq!((si.low, si.high), (p.ci_low, p.ci_high));
        // Ties resolve to the lexicographically smallest subset.
        assert_eq!(r.argmax_left, vec!["s1", "s2"]);
        assert_eq!(r.argmax_right, vec!["s1", "s2"]);
    }

    #[test]
    fn u_range_checks() {
        let s = dominant();
        assert!(matches!(
            r_value(&s, 1, MetaModel::FixedZ),
            Err(Error::UOutOfRange { .. })
        ));
        assert!(matches!(
            r_value(&s, 4, MetaModel::FixedZ),
            Err(Error::UOutOfRange { .. })
        ));
        assert!(r_value(&s, 3, MetaModel::FixedZ).is_ok());
        assert!(matches!(
            r_value(&s, 3, MetaModel::RandomZ),
            Err(Error::UOutOfRange { max: 2, .. })
        ));
        let two = set(&[(1.0, 0.1), (1.0, 0.1)]);
        assert!(matches!(
            r_value(&two, 2, MetaModel::FixedZ),
            Err(Error::TooFewStudies { needed: 3, .. })
        ));
    }

    #[test]
    fn enumeration_cap() {
        let rows: Vec<_> = (0..20).map(|i| (0.1 * i as f64, 1.0)).collect();
        let s = set(&rows);
        let err = SubsetScan::run(&s, 11, MetaModel::FixedZ, 0.05, 1000).unwrap_err();
        assert_eq!(
            err,
            Error::EnumerationCap {
                count: 184_756,
                cap: 1000
            }
        );
    }

    #[test]
    fn subset_failure_names_subset() {
        // Two identical effects make the Hartung-Knapp variance vanish.
        let s = set(&[(0.2, 0.1), (0.2, 0.1), (0.5, 0.1)]);
        let err = r_value(&s, 2, MetaModel::RandomT).unwrap_err();
        match err {
            Error::SubsetFailed { subset, .. } => assert_eq!(subset, vec!["s1", "s2"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn evaluation_count() {
        let s = set(&[(0.3, 0.2), (0.1, 0.2), (0.4, 0.3), (0.2, 0.1), (0.5, 0.2)]);
        for u in 2..=5 {
            let r = r_value(&s, u, MetaModel::FixedZ).unwrap();
            assert_eq!(r.evaluations, binomial(5, u - 1));
        }
    }

    #[test]
    fn leave_one_out_rows() {
        let s = set(&[(1.0, 0.1), (1.0, 0.1), (1.0, 0.1)]);
        let rep = leave_one_out_report(&s, MetaModel::FixedZ, 0.05).unwrap();
        assert_eq!(rep.rows.len(), 3);
        assert!(rep.rows.windows(2).all(|w| w[0].result == w[1].result));
        assert!(rep.replicated);

        let rep = leave_one_out_report(&dominant(), MetaModel::FixedZ, 0.05).unwrap();
        let insignificant: Vec<_> = rep.rows.iter().filter(|r| r.result.p_two > 0.05).collect();
        assert_eq!(insignificant.len(), 1);
        assert_eq!(insignificant[0].excluded, "s1");
        assert!(!rep.replicated);
        let max_left = rep
            .rows
            .iter()
            .map(|r| r.result.p_left)
            .fold(f64::MIN, f64::max);
        assert_eq!(max_left, rep.r_value.r_left);
    }

    #[test]
    fn bound_strong_studies() {
        let s = set(&[(5.0, 0.1), (5.0, 0.1), (5.0, 0.1)]);
        let b = replicability_bound(&s, MetaModel::FixedZ, 0.05).unwrap();
        assert_eq!(b.bound, 3);
        assert!(b.exhausted);
        assert_eq!(b.trace.len(), 2);
        assert!(b.trace.iter().all(|r| r.r_value <= 0.05));
    }

    #[test]
    fn bound_dominant_study() {
        let b = replicability_bound(&dominant(), MetaModel::FixedZ, 0.05).unwrap();
        assert_eq!(b.bound, 1);
        assert_eq!(b.trace.len(), 1);
        assert_eq!(b.trace[0].excluded, vec!["s1"]);
        assert!(b.trace[0].r_value > 0.05);
    }

    #[test]
    fn bound_requires_significance() {
        let s = set(&[(0.0, 1.0), (0.1, 1.0), (-0.1, 1.0)]);
        assert!(matches!(
            replicability_bound(&s, MetaModel::FixedZ, 0.05),
            Err(Error::NotSignificant { .. })
        ));
    }

    #[test]
    fn union_mode_contains_argmax_interval() {
        let s = set(&[(0.3, 0.2), (0.1, 0.05), (0.4, 0.3), (0.2, 0.1), (0.9, 0.6)]);
        let scan =
            SubsetScan::run(&s, 3, MetaModel::FixedZ, 0.05, DEFAULT_MAX_EVALUATIONS).unwrap();
        let a = scan.sensitivity_interval(IntervalMode::Argmax);
        let u = scan.sensitivity_interval(IntervalMode::Union);
        assert!(u.low <= a.low && a.high <= u.high);
    }
}
