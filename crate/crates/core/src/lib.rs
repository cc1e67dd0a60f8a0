//! Meta-analysis engine with leave-u-out replicability analysis.
//!
//! The crate computes fixed- and random-effects meta-analyses, r-values over
//! all subsets that drop `u - 1` studies, sensitivity intervals, confidence
//! lower bounds on the number of studies with an effect, multiplicity
//! adjustments for families of r-values, annotated forest plots, and a
//! Monte-Carlo study of random-effects type-I error.

pub mod analysis;
pub mod dist;
pub mod error;
pub mod ingest;
pub mod meta;
pub mod multiplicity;
pub mod replicability;
pub mod report;
pub mod simulation;

pub use analysis::{run_analysis, AnalysisOptions, AnalysisReport};
pub use error::{Error, ErrorKind, Result};
pub use meta::{
    analyze_effects, dersimonian_laird_tau2, fixed_effect_meta, meta_analysis, random_effects_meta,
    study_weights, Measure, MetaModel, MetaResult, Study, StudySet,
};
pub use multiplicity::{adjust, bh_adjust, bonferroni_adjust, declare, Adjustment, EndpointFamily};
pub use replicability::{
    enumerate_subsets, leave_one_out_report, r_value, replicability_bound,
    replicability_bound_capped, sensitivity_interval, BoundRow, IntervalMode, LeaveOneOutReport,
    LeaveOneOutRow, RValueResult, ReplicabilityBound, Scale, SensitivityInterval, SubsetScan,
};
pub use report::{
    format_rvalue, render_forest_plot, report_sentence, serialize_results, AdjustmentReport,
    IntervalReport, PlotOptions,
};
pub use simulation::{run_simulation, OutlierDesign, SimConfig, SimTest, SimulationGrid};
