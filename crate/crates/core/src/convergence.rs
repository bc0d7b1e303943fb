//! Refinement studies for the manufactured problem.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::assembly::{assemble, compute_errors, ErrorReport, QuadratureConfig};
use crate::error::{invalid, Result};
use crate::infsup::InfSupEstimate;
use crate::mesh::{build_cube_mesh, cells_for_level};
use crate::problem::ManufacturedProblem;
use crate::solver::{solve_stokes_with, Ordering, SolverStats};
use crate::space::{DofCounts, DofMap};

/// Highest level run without an explicit opt-in.
pub const DEFAULT_MAX_LEVEL: u32 = 4;

#[derive(Debug, Clone, Serialize)]
pub struct LevelResult {
    pub level: u32,
    pub cells_per_side: usize,
    pub tets: usize,
    pub counts: DofCounts,
    pub errors: ErrorReport,
    pub stats: SolverStats,
    /// Wall time; not serialized so reports are reproducible.
    #[serde(skip)]
    pub seconds: f64,
}

/// Assembles, solves and measures the manufactured problem at one level.
pub fn run_level(level: u32, config: &QuadratureConfig, ordering: Ordering) -> Result<LevelResult> {
    let n = cells_for_level(level)?;
    let start = Instant::now();
    let mesh = build_cube_mesh(n)?;
    let dm = DofMap::new(&mesh);
    let problem = ManufacturedProblem;
    let system = assemble(&mesh, &dm, |x| problem.force(x), config)?;
    let sol = solve_stokes_with(&system, ordering)?;
    let mut errors = compute_errors(&mesh, &dm, &sol.velocity, &sol.pressure, &problem, config.data_degree)?;
    errors.level = Some(level);
    Ok(LevelResult {
        level,
        cells_per_side: n,
        tets: mesh.num_tets(),
        counts: system.counts,
        errors,
        stats: sol.stats,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Observed orders between consecutive levels; `None` on the first row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rates {
    pub l2_velocity: Option<f64>,
    pub h1_broken: Option<f64>,
    pub l2_pressure: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    #[serde(flatten)]
    pub result: LevelResult,
    pub rates: Rates,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub infsup: Vec<InfSupEstimate>,
}

fn rate(coarse: f64, fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    (coarse / fine).ln() / (h_coarse / h_fine).ln()
}

impl ConvergenceTable {
    pub fn from_results(results: Vec<LevelResult>) -> Self {
        let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(results.len());
        for r in results {
            let rates = match rows.last() {
                Some(prev) => {
                    let (c, f) = (&prev.result.errors, &r.errors);
                    Rates {
                        l2_velocity: Some(rate(c.l2_velocity, f.l2_velocity, c.h, f.h)),
                        h1_broken: Some(rate(c.h1_broken, f.h1_broken, c.h, f.h)),
                        l2_pressure: Some(rate(c.l2_pressure, f.l2_pressure, c.h, f.h)),
                    }
                }
                None => Rates { l2_velocity: None, h1_broken: None, l2_pressure: None },
            };
            rows.push(ConvergenceRow { result: r, rates });
        }
        Self { rows, infsup: Vec::new() }
    }

    pub fn row(&self, level: u32) -> Option<&ConvergenceRow> {
        self.rows.iter().find(|r| r.result.level == level)
    }

    /// One record per level; numbers in shortest round-trip form.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "level", "h", "l2_velocity", "rate_l2_velocity", "h1_broken", "rate_h1_broken", "l2_pressure",
            "rate_l2_pressure",
        ])?;
        let opt = |r: Option<f64>| r.map(|v| v.to_string()).unwrap_or_default();
        for row in &self.rows {
            let e = &row.result.errors;
            w.write_record([
                row.result.level.to_string(),
                e.h.to_string(),
                e.l2_velocity.to_string(),
                opt(row.rates.l2_velocity),
                e.h1_broken.to_string(),
                opt(row.rates.h1_broken),
                e.l2_pressure.to_string(),
                opt(row.rates.l2_pressure),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        Ok(())
    }

    /// Plain-text table in the usual layout.
    pub fn render(&self) -> String {
        let mut s = format!(
            "{:>5} {:>9} {:>9} {:>12} {:>5} {:>12} {:>5} {:>12} {:>5}\n",
            "level", "u dofs", "p dofs", "|u-uh|_0", "rate", "|u-uh|_1,h", "rate", "|p-ph|_0", "rate"
        );
        let opt = |r: Option<f64>| r.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
        for row in &self.rows {
            let e = &row.result.errors;
            s += &format!(
                "{:>5} {:>9} {:>9} {:>12.3e} {:>5} {:>12.3e} {:>5} {:>12.3e} {:>5}\n",
                row.result.level,
                row.result.counts.velocity(),
                row.result.counts.pressure,
                e.l2_velocity,
                opt(row.rates.l2_velocity),
                e.h1_broken,
                opt(row.rates.h1_broken),
                e.l2_pressure,
                opt(row.rates.l2_pressure),
            );
        }
        s
    }
}

/// Runs levels `1..=max_level`. Levels above [`DEFAULT_MAX_LEVEL`] need
/// `allow_large`.
pub fn run_convergence(max_level: u32, allow_large: bool, config: &QuadratureConfig) -> Result<ConvergenceTable> {
    if max_level == 0 {
        return Err(invalid("max level must be at least 1"));
    }
    if max_level > DEFAULT_MAX_LEVEL && !allow_large {
        return Err(invalid(format!(
            "level {max_level} exceeds {DEFAULT_MAX_LEVEL}; pass the large-level flag to run it"
        )));
    }
    let results = (1..=max_level)
        .map(|l| run_level(l, config, Ordering::Natural))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable::from_results(results))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_of_exact_power_law() {
        assert!((rate(8.0, 1.0, 1.0, 0.5) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn large_levels_need_opt_in() {
        assert!(run_convergence(5, false, &QuadratureConfig::default()).is_err());
        assert!(run_convergence(0, true, &QuadratureConfig::default()).is_err());
    }

    #[test]
    fn first_row_has_no_rates() {
        let t = run_convergence(2, false, &QuadratureConfig::default()).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!(t.rows[0].rates.l2_velocity.is_none());
        assert!(t.rows[1].rates.h1_broken.is_some());
        assert!(t.render().lines().count() == 3);
    }
}
