//! Rendered output: SVG structure, JSON/CSV/SVG snapshots.
//!
//! Snapshots live in `tests/snapshots/`. A missing snapshot is written on first
//! run; set `METAREP_UPDATE_SNAPSHOTS=1` to rewrite them after an intended change.

use std::path::PathBuf;

use metarep_core::ingest::{normalize, parse_csv, Normalized, ReportedMeasure};
use metarep_core::report::{format_rvalue, render_forest_plot, serialize_results, PlotOptions};
use metarep_core::simulation::{chart_svg, grid_csv, run_simulation, SimConfig, SimTest};
use metarep_core::{run_analysis, AnalysisOptions, Measure, MetaModel, Study, StudySet};

fn snapshot(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/snapshots")
        .join(name);
    let update = std::env::var_os("METAREP_UPDATE_SNAPSHOTS").is_some_and(|v| v == "1");
    if update || !path.exists() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap();
    assert!(
        expected == actual,
        "snapshot {name} differs; rerun with METAREP_UPDATE_SNAPSHOTS=1 if intended"
    );
}

fn difference_set(rows: &[(&str, f64, f64)]) -> Normalized {
    let studies = rows.iter().map(|&(l, e, s)| Study::new(l, e, s)).collect();
    Normalized {
        studies: StudySet::new(studies, Measure::Difference).unwrap(),
        measure: ReportedMeasure::MD,
        warnings: Vec::new(),
    }
}

fn symmetric() -> Normalized {
    difference_set(&[("A", 1.0, 0.1), ("B", 1.0, 0.1), ("C", 1.0, 0.1)])
}

fn dominant() -> Normalized {
    difference_set(&[("A", 5.0, 0.1), ("B", 0.0, 1.0), ("C", 0.01, 1.0)])
}

fn hazard_ratios() -> Normalized {
    let text = "label,measure,effect,ci_low,ci_high
Study 1,HR,0.80,0.60,1.07
Study 2,HR,0.85,0.66,1.10
Study 3,HR,0.90,0.70,1.16
Study 4,HR,0.78,0.58,1.05
Study 5,HR,0.70,0.55,0.89
";
    normalize(&parse_csv(text.as_bytes()).unwrap()).unwrap()
}

fn render(input: &Normalized, model: MetaModel) -> (metarep_core::AnalysisReport, String) {
    let opts = AnalysisOptions {
        model,
        ..Default::default()
    };
    let rep = run_analysis(input, &opts).unwrap();
    let svg = render_forest_plot(
        &input.studies,
        &rep.meta,
        &rep.r_value,
        Some(&rep.sensitivity_interval.interval),
        &PlotOptions {
            title: Some("Example".into()),
            measure_label: input.measure.to_string(),
        },
    )
    .unwrap();
    (rep, svg)
}

fn class_count(doc: &roxmltree::Document, tag: &str, class: &str) -> usize {
    doc.descendants()
        .filter(|n| n.has_tag_name(tag) && n.attribute("class") == Some(class))
        .count()
}

#[test]
fn forest_plot_structure() {
    for (input, model) in [
        (symmetric(), MetaModel::FixedZ),
        (dominant(), MetaModel::FixedZ),
        (hazard_ratios(), MetaModel::RandomZ),
        (hazard_ratios(), MetaModel::RandomT),
    ] {
        let (rep, svg) = render(&input, model);
        let doc = roxmltree::Document::parse(&svg).expect("well-formed SVG");
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        assert_eq!(class_count(&doc, "g", "study"), input.studies.len());
        assert_eq!(class_count(&doc, "polygon", "summary"), 1);
        assert_eq!(class_count(&doc, "line", "null"), 1);
        assert_eq!(
            class_count(&doc, "text", "excluded"),
            rep.r_value.excluded().len()
        );
        let note = doc
            .descendants()
            .find(|n| n.attribute("class") == Some("rvalue"))
            .and_then(|n| n.text())
            .unwrap();
        let shown = if rep.r_value.r_two < 1e-4 {
            "< 0.0001".to_string()
        } else {
            format!("= {}", format_rvalue(rep.r_value.r_two))
        };
        assert!(note.contains(&shown), "{note}");
    }
}

#[test]
fn asterisk_marks_the_dominant_study() {
    let (_, svg) = render(&dominant(), MetaModel::FixedZ);
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let marked: Vec<&str> = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("study"))
        .filter(|g| {
            g.children()
                .any(|c| c.attribute("class") == Some("excluded"))
        })
        .map(|g| {
            g.children()
                .find(|c| c.has_tag_name("text"))
                .unwrap()
                .text()
                .unwrap()
        })
        .collect();
    assert_eq!(marked, ["A"]);
}

#[test]
fn symmetric_interval_is_any_pair_interval() {
    let input = symmetric();
    let (rep, _) = render(&input, MetaModel::FixedZ);
    let pair = metarep_core::fixed_effect_meta(
        &StudySet::new(input.studies.studies()[..2].to_vec(), Measure::Difference).unwrap(),
        0.05,
    )
    .unwrap();
    let si = &rep.sensitivity_interval.interval;
    assert!((si.low - pair.ci_low).abs() < 1e-12);
    assert!((si.high - pair.ci_high).abs() < 1e-12);
    assert!((rep.r_value.r_two - pair.p_two).abs() < 1e-15);
}

#[test]
fn json_snapshots() {
    for (name, input, model) in [
        ("symmetric.json", symmetric(), MetaModel::FixedZ),
        ("dominant.json", dominant(), MetaModel::FixedZ),
        ("hazard_ratios.json", hazard_ratios(), MetaModel::RandomZ),
    ] {
        let opts = AnalysisOptions {
            model,
            bound: true,
            ..Default::default()
        };
        let rep = run_analysis(&input, &opts).unwrap();
        let json = serialize_results(&rep).unwrap();
        assert_eq!(
            json,
            serialize_results(&run_analysis(&input, &opts).unwrap()).unwrap()
        );
        snapshot(name, &json);
    }
}

#[test]
fn svg_snapshot() {
    let (_, svg) = render(&hazard_ratios(), MetaModel::RandomZ);
    assert_eq!(svg, render(&hazard_ratios(), MetaModel::RandomZ).1);
    snapshot("hazard_ratios.svg", &svg);
}

#[test]
fn simulation_snapshots() {
    let config = SimConfig {
        n_values: vec![3, 5],
        tau2_values: vec![0.01, 0.25],
        mu_n_grid: vec![0.0, 0.5, 1.0],
        iterations: 1000,
        ..SimConfig::full(42)
    };
    let grid = run_simulation(&config).unwrap();
    let chart = chart_svg(&grid, SimTest::ZHiggins, 0.01);
    roxmltree::Document::parse(&chart).expect("well-formed chart");
    assert_eq!(grid, run_simulation(&config).unwrap());
    snapshot("simulation_2x2x3.csv", &grid_csv(&grid));
    snapshot("z_higgins_tau2_0.01.svg", &chart);
}
