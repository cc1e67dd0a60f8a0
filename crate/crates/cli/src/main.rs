//! `metarep`: replicability analysis of meta-analyses from the command line.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 analysis
//! precondition not met, 4 subset enumeration cap exceeded.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use metarep_core::ingest::{load_path, normalize};
use metarep_core::report::{render_forest_plot, serialize_results, AdjustmentReport, PlotOptions};
use metarep_core::simulation::{emit_grid, run_simulation, OutlierDesign, SimConfig, SimTest};
use metarep_core::{
    run_analysis, Adjustment, AnalysisOptions, EndpointFamily, Error, ErrorKind, IntervalMode,
    MetaModel,
};

/// Environment variable naming the directory for relative output paths.
const OUT_DIR_ENV: &str = "METAREP_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "metarep",
    version,
    about = "Replicability analysis for meta-analyses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Meta-analysis, leave-one-out table, r-value and sensitivity interval.
    Analyze(AnalyzeArgs),
    /// Bonferroni or Benjamini-Hochberg adjustment of a family of r-values.
    Adjust(AdjustArgs),
    /// Random-effects type-I error simulation.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Study file (CSV, or JSON with a .json extension).
    #[arg(long)]
    input: PathBuf,
    /// fixed, random-z or random-t.
    #[arg(long, default_value = "fixed")]
    model: MetaModel,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Number of studies the finding must rest on (u - 1 studies are dropped).
    #[arg(long, default_value_t = 2)]
    u: usize,
    /// Also compute the lower bound on the number of studies with an effect.
    #[arg(long)]
    bound: bool,
    /// Use the union of all subset confidence intervals as the sensitivity interval.
    #[arg(long)]
    union: bool,
    /// Write the forest plot SVG here.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Plot title.
    #[arg(long)]
    title: Option<String>,
    /// Write the JSON report here ("-" for stdout).
    #[arg(long)]
    json: Option<PathBuf>,
    /// Maximum number of subset meta-analyses per r-value.
    #[arg(long, default_value_t = 1_000_000)]
    max_evaluations: u128,
}

#[derive(Args)]
struct AdjustArgs {
    /// Comma-separated r-values, one per endpoint.
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        allow_hyphen_values = true
    )]
    rvalues: Vec<f64>,
    /// Comma-separated endpoint labels (default 1, 2, ...).
    #[arg(long, value_delimiter = ',')]
    labels: Option<Vec<String>>,
    /// bh or bonferroni.
    #[arg(long, default_value = "bh")]
    method: Adjustment,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Write the JSON report here ("-" for stdout).
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Grid {
    Full,
    Desk,
}

#[derive(Clone, Copy, ValueEnum)]
enum Outlier {
    Fixed,
    Shifted,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "desk")]
    grid: Grid,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Iterations per cell (default 10000).
    #[arg(long)]
    iterations: Option<u64>,
    /// How the last study's mean is set.
    #[arg(long, value_enum, default_value = "fixed")]
    outlier: Outlier,
    /// Output directory (default: $METAREP_OUT_DIR, else the current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the full grid as JSON here ("-" for stdout).
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Input => 2,
            ErrorKind::Precondition => 3,
            ErrorKind::Cap => 4,
            ErrorKind::Io => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Adjust(a) => adjust(a),
        Command::Simulate(a) => simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn out_dir() -> Option<PathBuf> {
    std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

/// Relative output paths land in `$METAREP_OUT_DIR` when it is set.
fn resolve(path: &Path) -> PathBuf {
    match out_dir() {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

fn is_stdout(path: &Path) -> bool {
    path.as_os_str() == "-"
}

fn write_file(path: &Path, contents: &str) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(Error::from)?;
    }
    std::fs::write(path, contents).map_err(|e| Failure {
        code: 1,
        message: format!("cannot write {}: {e}", path.display()),
    })
}

/// Writes `doc` to the `--json` target. Returns true when it went to stdout.
fn emit_json(target: Option<&Path>, doc: &str) -> std::result::Result<bool, Failure> {
    match target {
        None => Ok(false),
        Some(p) if is_stdout(p) => {
            print!("{doc}");
            Ok(true)
        }
        Some(p) => {
            let path = resolve(p);
            write_file(&path, doc)?;
            eprintln!("wrote {}", path.display());
            Ok(false)
        }
    }
}

fn analyze(args: AnalyzeArgs) -> CliResult {
    let records = load_path(&args.input)?;
    let input = normalize(&records)?;
    let opts = AnalysisOptions {
        model: args.model,
        alpha: args.alpha,
        u: args.u,
        bound: args.bound,
        interval_mode: if args.union {
            IntervalMode::Union
        } else {
            IntervalMode::Argmax
        },
        max_evaluations: args.max_evaluations,
    };
    let report = run_analysis(&input, &opts)?;
    // Render everything before writing anything, so failures leave no partial files.
    let json = serialize_results(&report)?;
    let svg = match &args.plot {
        Some(_) => Some(render_forest_plot(
            &input.studies,
            &report.meta,
            &report.r_value,
            Some(&report.sensitivity_interval.interval),
            &PlotOptions {
                title: args.title.clone(),
                measure_label: report.measure.to_string(),
            },
        )?),
        None => None,
    };

    let json_on_stdout = emit_json(args.json.as_deref(), &json)?;
    if !json_on_stdout {
        print!("{}", report.to_text());
    } else {
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
    }
    if let (Some(p), Some(svg)) = (&args.plot, svg) {
        let path = resolve(p);
        write_file(&path, &svg)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn adjust(args: AdjustArgs) -> CliResult {
    let entries: Vec<(String, f64)> = match &args.labels {
        Some(labels) => {
            if labels.len() != args.rvalues.len() {
                return Err(Error::InvalidFamily(format!(
                    "{} labels for {} r-values",
                    labels.len(),
                    args.rvalues.len()
                ))
                .into());
            }
            labels
                .iter()
                .cloned()
                .zip(args.rvalues.iter().copied())
                .collect()
        }
        None => args
            .rvalues
            .iter()
            .enumerate()
            .map(|(i, &r)| ((i + 1).to_string(), r))
            .collect(),
    };
    let family = EndpointFamily::new(entries)?;
    let report = AdjustmentReport::new(&family, args.method, args.alpha)?;
    let json = serialize_results(&report)?;
    if !emit_json(args.json.as_deref(), &json)? {
        print!("{}", report.to_text());
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> CliResult {
    let mut config = match args.grid {
        Grid::Full => SimConfig::full(args.seed),
        Grid::Desk => SimConfig::desk(args.seed),
    };
    if let Some(it) = args.iterations {
        config.iterations = it;
    }
    config.outlier = match args.outlier {
        Outlier::Fixed => OutlierDesign::Fixed,
        Outlier::Shifted => OutlierDesign::Shifted,
    };
    let dir = args
        .out
        .clone()
        .or_else(out_dir)
        .unwrap_or_else(|| PathBuf::from("."));

    let grid = run_simulation(&config)?;
    let json = serialize_results(&grid)?;
    let written = emit_grid(&grid, &dir)?;
    let json_on_stdout = emit_json(args.json.as_deref(), &json)?;
    for path in &written {
        eprintln!("wrote {}", path.display());
    }
    if json_on_stdout {
        return Ok(());
    }

    println!(
        "Simulation: {} cells, {} iterations each, seed {}",
        grid.cells.len(),
        config.iterations,
        config.seed
    );
    println!("Rejection fraction at mu_N = 0 and maximum over mu_N:");
    println!(
        "  {:>3}  {:>6}  {:>10}  {:>10}  {:>10}  {:>10}",
        "N", "tau2", "z at 0", "z max", "t at 0", "t max"
    );
    for &n in &config.n_values {
        for &tau2 in &config.tau2_values {
            let at0 = |test| {
                grid.cells
                    .iter()
                    .filter(|c| c.test == test && c.n == n && c.tau2 == tau2)
                    .min_by(|a, b| a.mu_n.abs().total_cmp(&b.mu_n.abs()))
                    .map_or(f64::NAN, |c| c.fraction)
            };
            let max = |test| grid.max_fraction(test, n, tau2).unwrap_or(f64::NAN);
            println!(
                "  {:>3}  {:>6}  {:>10.4}  {:>10.4}  {:>10.4}  {:>10.4}",
                n,
                tau2,
                at0(SimTest::ZHiggins),
                max(SimTest::ZHiggins),
                at0(SimTest::TPlain),
                max(SimTest::TPlain)
            );
        }
    }
    Ok(())
}
