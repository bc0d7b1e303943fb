use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use ncstokes::assembly::QuadratureConfig;
use ncstokes::convergence::{run_convergence, run_level, DEFAULT_MAX_LEVEL};
use ncstokes::infsup::{infsup_for_level, EigenMethod, VelocityNorm};
use ncstokes::mesh::build_cube_mesh;
use ncstokes::solver::Ordering;
use ncstokes::space::DofMap;
use ncstokes::verify::{run_suite, Suite};
use ncstokes::vtk::write_vtk_file;
use ncstokes::{Error, Result};

/// Nonconforming P2 / discontinuous P1 Stokes solver on the unit cube.
#[derive(Parser)]
#[command(name = "ncstokes", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the n×n×n cube mesh and print its entity and DOF counts.
    Mesh {
        #[arg(long)]
        n: usize,
        /// Write the mesh as legacy ASCII VTK.
        #[arg(long)]
        vtk: Option<PathBuf>,
    },
    /// Solve the manufactured problem on one level and report errors.
    Solve {
        #[arg(long)]
        level: u32,
        /// Quadrature degree for the load vector and error integrals.
        #[arg(long, default_value_t = 10)]
        quad_degree: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Allow levels above the default cap.
        #[arg(long)]
        allow_large: bool,
    },
    /// Run levels 1..=L and print the error table with observed rates.
    Convergence {
        #[arg(long)]
        max_level: u32,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        quad_degree: usize,
        /// Also estimate the inf-sup constant on levels up to 3.
        #[arg(long)]
        with_infsup: bool,
        #[arg(long)]
        allow_large: bool,
    },
    /// Run a verification suite; prints a JSON report and fails on any check.
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long)]
        level: Option<u32>,
    },
    /// Estimate the discrete inf-sup constant on levels 1..=L.
    Infsup {
        #[arg(long)]
        max_level: u32,
        #[arg(long, value_enum, default_value_t = MethodArg::Lanczos)]
        method: MethodArg,
        /// Use the broken H1 seminorm instead of the full norm.
        #[arg(long)]
        seminorm: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Dofs,
    Jumps,
    Unisolvence,
    Infsup,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Dofs => Suite::Dofs,
            SuiteArg::Jumps => Suite::Jumps,
            SuiteArg::Unisolvence => Suite::Unisolvence,
            SuiteArg::Infsup => Suite::Infsup,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Dense,
    Lanczos,
}

fn config(quad_degree: usize) -> QuadratureConfig {
    QuadratureConfig { data_degree: quad_degree, ..QuadratureConfig::default() }
}

fn write_json(path: &PathBuf, value: &serde_json::Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Runs the command; `Ok(false)` means a check failed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Mesh { n, vtk } => {
            let mesh = build_cube_mesh(n)?;
            let dm = DofMap::new(&mesh);
            let report = json!({
                "n": n,
                "vertices": mesh.vertices.len(),
                "edges": mesh.edges.len(),
                "faces": mesh.faces.len(),
                "tets": mesh.num_tets(),
                "interior_vertices": mesh.interior_vertex_ids.len(),
                "interior_edges": mesh.interior_edge_ids.len(),
                "interior_faces": mesh.interior_face_ids.len(),
                "h": mesh.h(),
                "dofs": dm.counts,
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
            if let Some(path) = vtk {
                write_vtk_file(&mesh, &format!("unit cube, n = {n}"), &path)?;
            }
            Ok(true)
        }
        Command::Solve { level, quad_degree, out, allow_large } => {
            if level > DEFAULT_MAX_LEVEL && !allow_large {
                return Err(Error::InvalidArgument(format!(
                    "level {level} exceeds {DEFAULT_MAX_LEVEL}; pass --allow-large"
                )));
            }
            let r = run_level(level, &config(quad_degree), Ordering::Natural)?;
            let e = &r.errors;
            println!(
                "level {level}: |u-uh|_0 = {:.6e}  |u-uh|_1,h = {:.6e}  |p-ph|_0 = {:.6e}",
                e.l2_velocity, e.h1_broken, e.l2_pressure
            );
            println!(
                "residuals: momentum {:.3e}  divergence {:.3e}  mean {:.3e}",
                r.stats.momentum_residual, r.stats.divergence_residual, r.stats.mean_residual
            );
            if let Some(path) = out {
                write_json(&path, &serde_json::to_value(&r)?)?;
            }
            Ok(true)
        }
        Command::Convergence { max_level, csv, json, quad_degree, with_infsup, allow_large } => {
            let mut table = run_convergence(max_level, allow_large, &config(quad_degree))?;
            if with_infsup {
                for level in 1..=max_level.min(3) {
                    table.infsup.push(infsup_for_level(level, VelocityNorm::Full, EigenMethod::Lanczos)?);
                }
            }
            print!("{}", table.render());
            for est in &table.infsup {
                println!("level {}: beta_h = {:.6}", est.level.unwrap_or(0), est.beta);
            }
            if let Some(path) = csv {
                table.write_csv(&path)?;
            }
            if let Some(path) = json {
                table.write_json(&path)?;
            }
            Ok(true)
        }
        Command::Verify { suite, level } => {
            let suite = Suite::from(suite);
            let report = run_suite(suite, level.unwrap_or(suite.default_level()))?;
            println!("{}", serde_json::to_string_pretty(&report.to_json())?);
            Ok(report.passed())
        }
        Command::Infsup { max_level, method, seminorm } => {
            let method = match method {
                MethodArg::Dense => EigenMethod::Dense,
                MethodArg::Lanczos => EigenMethod::Lanczos,
            };
            let norm = if seminorm { VelocityNorm::Seminorm } else { VelocityNorm::Full };
            let mut all_positive = true;
            for level in 1..=max_level {
                let est = infsup_for_level(level, norm, method)?;
                println!("{}", serde_json::to_string(&est)?);
                all_positive &= est.beta > 0.0;
            }
            Ok(all_positive)
        }
    }
}

fn main() -> ExitCode {
    faer::set_global_parallelism(faer::Par::Seq);
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
