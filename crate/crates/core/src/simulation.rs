//! Monte-Carlo study of random-effects rejection rates when a single study
//! carries the effect.
//!
//! Per iteration, `N - 1` study means are drawn from `Normal(0, tau2)` and the
//! last study mean is set from `mu_n` (see [`OutlierDesign`]). Observed effects
//! are drawn around those means with standard deviation `within_sd`. Two one-sided (right) tests are
//! applied to the same draws:
//!
//! - `z_higgins`: the DerSimonian–Laird random-effects z-test from
//!   [`crate::meta`], with every `se_i = within_sd`;
//! - `t_plain`: a one-sample t-test with `N - 1` degrees of freedom on the
//!   observed effects.
//!
//! Every cell `(N, tau2, mu_n)` owns an RNG stream whose seed is a hash of the
//! master seed and the cell coordinates, so cells can be computed in any
//! order (or in parallel) and a cell's numbers do not depend on which grid it
//! belongs to.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::t_sf;
use crate::error::{Error, Result};
use crate::meta::{analyze_effects, MetaModel};

/// How the last study's mean is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierDesign {
    /// `mu_N = mu_n` exactly.
    #[default]
    Fixed,
    /// `mu_N = mu_n + Normal(0, tau2)`: at `mu_n = 0` all N means are
    /// exchangeable and the t-test has exact level.
    Shifted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub n_values: Vec<usize>,
    pub tau2_values: Vec<f64>,
    pub mu_n_grid: Vec<f64>,
    pub within_sd: f64,
    pub iterations: u64,
    pub alpha: f64,
    pub seed: u64,
    pub outlier: OutlierDesign,
}

/// `{0, 0.05, ..., 5}`.
pub fn full_mu_grid() -> Vec<f64> {
    (0..=100).map(|k| k as f64 / 20.0).collect()
}

impl SimConfig {
    /// The complete grid: N in {3,5,7,9,20}, six tau2 values, 101 values of mu_n.
    pub fn full(seed: u64) -> Self {
        SimConfig {
            n_values: vec![3, 5, 7, 9, 20],
            tau2_values: vec![0.01, 0.04, 0.09, 0.25, 0.49, 1.0],
            mu_n_grid: full_mu_grid(),
            within_sd: 0.01,
            iterations: 10_000,
            alpha: 0.05,
            seed,
            outlier: OutlierDesign::Fixed,
        }
    }

    /// A reduced grid that runs in seconds.
    pub fn desk(seed: u64) -> Self {
        SimConfig {
            n_values: vec![3, 9],
            tau2_values: vec![0.01, 0.25],
            mu_n_grid: vec![0.0, 0.1, 0.3, 1.0],
            ..Self::full(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_values.is_empty() || self.tau2_values.is_empty() || self.mu_n_grid.is_empty() {
            return bad("grids must be nonempty".into());
        }
        if let Some(n) = self.n_values.iter().find(|&&n| n < 2) {
            return bad(format!("N must be at least 2, got {n}"));
        }
        if let Some(t) = self
            .tau2_values
            .iter()
            .find(|t| !(t.is_finite() && **t >= 0.0))
        {
            return bad(format!("tau2 must be finite and nonnegative, got {t}"));
        }
        if let Some(m) = self.mu_n_grid.iter().find(|m| !m.is_finite()) {
            return bad(format!("mu_n must be finite, got {m}"));
        }
        if !(self.within_sd.is_finite() && self.within_sd > 0.0) {
            return bad(format!(
                "within_sd must be positive, got {}",
                self.within_sd
            ));
        }
        if self.iterations == 0 {
            return bad("iterations must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimTest {
    ZHiggins,
    TPlain,
}

impl SimTest {
    pub const ALL: [SimTest; 2] = [SimTest::ZHiggins, SimTest::TPlain];

    pub fn name(self) -> &'static str {
        match self {
            SimTest::ZHiggins => "z_higgins",
            SimTest::TPlain => "t_plain",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimCell {
    pub test: SimTest,
    pub n: usize,
    pub tau2: f64,
    pub mu_n: f64,
    pub rejections: u64,
    pub fraction: f64,
    /// `sqrt(p (1 - p) / iterations)`.
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationGrid {
    pub config: SimConfig,
    /// Ordered by test, then N, tau2, mu_n (config order).
    pub cells: Vec<SimCell>,
}

impl SimulationGrid {
    pub fn cell(&self, test: SimTest, n: usize, tau2: f64, mu_n: f64) -> Option<&SimCell> {
        self.cells
            .iter()
            .find(|c| c.test == test && c.n == n && c.tau2 == tau2 && c.mu_n == mu_n)
    }

    /// Largest rejection fraction over mu_n for one (test, N, tau2) curve.
    pub fn max_fraction(&self, test: SimTest, n: usize, tau2: f64) -> Option<f64> {
        self.cells
            .iter()
            .filter(|c| c.test == test && c.n == n && c.tau2 == tau2)
            .map(|c| c.fraction)
            .reduce(f64::max)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the RNG stream for one cell.
pub fn cell_seed(seed: u64, n: usize, tau2: f64, mu_n: f64) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ n as u64);
    h = splitmix64(h ^ tau2.to_bits());
    splitmix64(h ^ mu_n.to_bits())
}

/// One-sided right p-value of the one-sample t-test on `xs`.
fn one_sample_t_p_right(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    if var <= 0.0 {
        return if mean > 0.0 { 0.0 } else { 1.0 };
    }
    t_sf(mean / (var / n).sqrt(), n - 1.0).unwrap_or(1.0)
}

/// Rejection counts (z, t) for one cell.
fn run_cell(config: &SimConfig, n: usize, tau2: f64, mu_n: f64) -> Result<(u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(config.seed, n, tau2, mu_n));
    let tau = tau2.sqrt();
    let ses = vec![config.within_sd; n];
    let mut theta = vec![0.0; n];
    let (mut z_rej, mut t_rej) = (0, 0);
    for _ in 0..config.iterations {
        for (i, th) in theta.iter_mut().enumerate() {
            let mean = match (i + 1 == n, config.outlier) {
                (true, OutlierDesign::Fixed) => mu_n,
                (true, OutlierDesign::Shifted) => {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mu_n + tau * z
                }
                (false, _) => {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    tau * z
                }
            };
            let e: f64 = StandardNormal.sample(&mut rng);
            *th = mean + config.within_sd * e;
        }
        let z = analyze_effects(&theta, &ses, MetaModel::RandomZ, config.alpha)?;
        if z.p_right <= config.alpha {
            z_rej += 1;
        }
        if one_sample_t_p_right(&theta) <= config.alpha {
            t_rej += 1;
        }
    }
    Ok((z_rej, t_rej))
}

/// Runs every cell of the grid. Deterministic for a given config.
pub fn run_simulation(config: &SimConfig) -> Result<SimulationGrid> {
    config.validate()?;
    let coords: Vec<(usize, f64, f64)> = config
        .n_values
        .iter()
        .flat_map(|&n| {
            config
                .tau2_values
                .iter()
                .flat_map(move |&t| config.mu_n_grid.iter().map(move |&m| (n, t, m)))
        })
        .collect();
    let counts = coords
        .par_iter()
        .map(|&(n, t, m)| run_cell(config, n, t, m))
        .collect::<Result<Vec<_>>>()?;

    let iters = config.iterations as f64;
    let make = |test, (n, tau2, mu_n): (usize, f64, f64), rejections: u64| {
        let fraction = rejections as f64 / iters;
        SimCell {
            test,
            n,
            tau2,
            mu_n,
            rejections,
            fraction,
            mc_se: (fraction * (1.0 - fraction) / iters).sqrt(),
        }
    };
    let mut cells = Vec::with_capacity(2 * coords.len());
    for test in SimTest::ALL {
        for (&c, &(z, t)) in coords.iter().zip(&counts) {
            let rej = match test {
                SimTest::ZHiggins => z,
                SimTest::TPlain => t,
            };
            cells.push(make(test, c, rej));
        }
    }
    Ok(SimulationGrid {
        config: config.clone(),
        cells,
    })
}

pub const CSV_HEADER: &str = "test,N,tau2,mu_n,fraction,mc_se";

/// CSV with columns `test,N,tau2,mu_n,fraction,mc_se`.
pub fn grid_csv(grid: &SimulationGrid) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for c in &grid.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            c.test.name(),
            c.n,
            c.tau2,
            c.mu_n,
            c.fraction,
            c.mc_se
        );
    }
    out
}

const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

/// Line chart of rejection fraction against mu_n, one line per N.
pub fn chart_svg(grid: &SimulationGrid, test: SimTest, tau2: f64) -> String {
    let (w, h) = (640.0, 420.0);
    let (x0, x1, y0, y1) = (70.0, 520.0, 370.0, 40.0);
    let mus = &grid.config.mu_n_grid;
    let mu_lo = mus.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut mu_hi = mus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if mu_hi <= mu_lo {
        mu_hi = mu_lo + 1.0;
    }
    let top = grid
        .cells
        .iter()
        .filter(|c| c.test == test && c.tau2 == tau2)
        .map(|c| c.fraction)
        .fold(grid.config.alpha, f64::max);
    let y_max = ((top * 1.1) * 20.0).ceil() / 20.0;
    let px = |m: f64| x0 + (m - mu_lo) / (mu_hi - mu_lo) * (x1 - x0);
    let py = |f: f64| y0 - f / y_max * (y0 - y1);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{w:.0}" height="{h:.0}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{x0:.0}" y="24" font-size="14" font-weight="bold">{}, tau2 = {tau2}</text>"#,
        test.name()
    );
    let _ = writeln!(
        s,
        r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}" stroke="black"/>"#
    );
    for k in 0..=5 {
        let m = mu_lo + (mu_hi - mu_lo) * k as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.2}</text>"#,
            px(m),
            y0 + 16.0,
            m
        );
        let f = y_max * k as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.3}</text>"#,
            x0 - 6.0,
            py(f) + 4.0,
            f
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">mu_N</text>"#,
        0.5 * (x0 + x1),
        y0 + 34.0
    );
    let _ = writeln!(
        s,
        r##"<line class="alpha" x1="{x0:.2}" y1="{0:.2}" x2="{x1:.2}" y2="{0:.2}" stroke="#999" stroke-dasharray="4,3"/>"##,
        py(grid.config.alpha)
    );
    for (i, &n) in grid.config.n_values.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts: Vec<&SimCell> = grid
            .cells
            .iter()
            .filter(|c| c.test == test && c.tau2 == tau2 && c.n == n)
            .collect();
        pts.sort_by(|a, b| a.mu_n.total_cmp(&b.mu_n));
        let points: Vec<String> = pts
            .iter()
            .map(|c| format!("{:.2},{:.2}", px(c.mu_n), py(c.fraction)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            points.join(" ")
        );
        let ly = y1 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            x1 + 20.0,
            x1 + 40.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">N = {n}</text>"#,
            x1 + 46.0,
            ly + 4.0
        );
    }
    let _ = writeln!(s, "</svg>");
    s
}

/// File name of the chart for one (test, tau2) panel.
pub fn chart_file_name(test: SimTest, tau2: f64) -> String {
    format!("{}_tau2_{tau2}.svg", test.name())
}

/// Writes `rejection_rates.csv` and one chart per (test, tau2) into `dir`.
pub fn emit_grid(grid: &SimulationGrid, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let csv_path = dir.join("rejection_rates.csv");
    std::fs::write(&csv_path, grid_csv(grid))?;
    written.push(csv_path);
    for test in SimTest::ALL {
        for &tau2 in &grid.config.tau2_values {
            let path = dir.join(chart_file_name(test, tau2));
            std::fs::write(&path, chart_svg(grid, test, tau2))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(seed: u64) -> SimConfig {
        SimConfig {
            n_values: vec![3, 5],
            tau2_values: vec![0.01, 0.25],
            mu_n_grid: vec![0.0, 0.5, 1.0],
            iterations: 400,
            ..SimConfig::full(seed)
        }
    }

    #[test]
    fn full_grid_shape() {
        let g = full_mu_grid();
        assert_eq!(g.len(), 101);
        assert_eq!(g[3], 0.15);
        assert_eq!(g[100], 5.0);
    }

    #[test]
    fn seed_determinism() {
        let a = run_simulation(&tiny(7)).unwrap();
        let b = run_simulation(&tiny(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(grid_csv(&a), grid_csv(&b));
        let c = run_simulation(&tiny(8)).unwrap();
        assert_ne!(a.cells, c.cells);
    }

    #[test]
    fn cells_are_grid_independent() {
        let small = SimConfig {
            n_values: vec![5],
            tau2_values: vec![0.25],
            mu_n_grid: vec![0.5],
            ..tiny(7)
        };
        let a = run_simulation(&tiny(7)).unwrap();
        let b = run_simulation(&small).unwrap();
        let cb = b.cell(SimTest::TPlain, 5, 0.25, 0.5).unwrap();
        assert_eq!(a.cell(SimTest::TPlain, 5, 0.25, 0.5).unwrap(), cb);
    }

    #[test]
    fn fractions_and_mc_se() {
        let g = run_simulation(&tiny(3)).unwrap();
        assert_eq!(g.cells.len(), 2 * 2 * 2 * 3);
        for c in &g.cells {
            assert!((0.0..=1.0).contains(&c.fraction));
            let se = (c.fraction * (1.0 - c.fraction) / 400.0).sqrt();
            assert_eq!(c.mc_se, se);
        }
    }

    #[test]
    fn z_test_dominates_t_test_at_null() {
        // Same draws for both tests. With equal se the DL z statistic equals the
        // t statistic whenever the sample variance exceeds within_sd^2, and the
        // normal critical value is the smaller one.
        let g = run_simulation(&tiny(11)).unwrap();
        for c in g.cells.iter().filter(|c| c.test == SimTest::TPlain) {
            let z = g.cell(SimTest::ZHiggins, c.n, c.tau2, c.mu_n).unwrap();
            assert!(z.rejections >= c.rejections);
        }
    }

    #[test]
    fn shifted_design_differs_and_is_deterministic() {
        let fixed = run_simulation(&tiny(5)).unwrap();
        let cfg = SimConfig {
            outlier: OutlierDesign::Shifted,
            ..tiny(5)
        };
        let a = run_simulation(&cfg).unwrap();
        assert_eq!(a, run_simulation(&cfg).unwrap());
        assert_ne!(a.cells, fixed.cells);
    }

    #[test]
    fn fixed_design_n3_t_statistic_is_bounded() {
        // With one observation pinned near 0 and N = 3, t <= 2 < t_{0.95, 2},
        // so the plain t-test almost never rejects at mu_n = 0 once tau >> within_sd.
        let cfg = SimConfig {
            n_values: vec![3],
            tau2_values: vec![1.0],
            mu_n_grid: vec![0.0],
            iterations: 2000,
            ..SimConfig::full(9)
        };
        let g = run_simulation(&cfg).unwrap();
        assert!(g.cell(SimTest::TPlain, 3, 1.0, 0.0).unwrap().fraction < 0.005);
    }

    #[test]
    fn invalid_configs() {
        let mut c = tiny(1);
        c.n_values = vec![1];
        assert!(run_simulation(&c).is_err());
        let mut c = tiny(1);
        c.mu_n_grid.clear();
        assert!(run_simulation(&c).is_err());
        let mut c = tiny(1);
        c.within_sd = 0.0;
        assert!(run_simulation(&c).is_err());
        let mut c = tiny(1);
        c.iterations = 0;
        assert!(run_simulation(&c).is_err());
    }

    #[test]
    fn csv_layout() {
        let g = run_simulation(&tiny(1)).unwrap();
        let csv = grid_csv(&g);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert!(lines.next().unwrap().starts_with("z_higgins,3,0.01,0,"));
        assert_eq!(csv.lines().count(), 1 + g.cells.len());
    }
}
