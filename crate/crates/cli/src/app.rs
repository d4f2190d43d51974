//! Subcommands and exit-code mapping.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use thiserror::Error;
use twogrid::geometry::{build_projection, pair_elements, GeometryError, DEFAULT_CONTAINMENT_TOL};
use twogrid::mandel::{mandel_benchmark, BenchmarkError, MandelConfig};
use twogrid::mesh::{box_tet_mesh, load_mesh, write_mesh, MeshError};
use twogrid::{CoupledState, CouplingError, FineGrid, ProjectionDiagnostics, Simulation};

use crate::config::{parse_mandel_config, ConfigError, RunConfig};
use crate::output::{write_probe_csv, ProbeRow};
use crate::vtk::{write_vtk, VtkError, VtkFields};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "twogrid",
    version,
    about = "Two-grid fixed-stress poroelasticity on tetrahedral meshes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a coupled simulation described by a configuration file.
    Run { config: PathBuf },
    /// Mandel benchmark against the analytic solution.
    Mandel {
        /// Which physics gets the finer mesh.
        #[arg(long)]
        fine: FineGrid,
        /// Optional file with [mandel] and [material] sections.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the probe series as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Build transfer operators between two meshes and print diagnostics.
    ProjectTest { mesh_a: PathBuf, mesh_b: PathBuf },
    /// Write a structured box mesh in tetmesh v1 format.
    MeshBox {
        nx: usize,
        ny: usize,
        nz: usize,
        lx: f64,
        ly: f64,
        lz: f64,
        out: PathBuf,
    },
}

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Vtk(#[from] VtkError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{0}")]
    Invalid(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        let numerical = match self {
            AppError::Coupling(e) | AppError::Benchmark(BenchmarkError::Coupling(e)) => {
                e.is_numerical()
            }
            _ => false,
        };
        if numerical {
            EXIT_NUMERICAL
        } else {
            EXIT_INVALID
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> AppError + '_ {
    move |source| AppError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read(path: &Path) -> Result<String, AppError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match cli.command {
        Command::Run { config } => cmd_run(&config, stdout),
        Command::Mandel { fine, config, csv } => {
            cmd_mandel(fine, config.as_deref(), csv.as_deref(), stdout)
        }
        Command::ProjectTest { mesh_a, mesh_b } => cmd_project_test(&mesh_a, &mesh_b, stdout),
        Command::MeshBox {
            nx,
            ny,
            nz,
            lx,
            ly,
            lz,
            out,
        } => cmd_mesh_box([nx, ny, nz], [lx, ly, lz], &out, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn step_line(s: &CoupledState) -> String {
    format!(
        "step {} t = {:e} iterations = {} increment = {:e} converged = {}",
        s.step,
        s.time,
        s.iterations,
        s.increment_norm(),
        s.converged
    )
}

fn write_snapshots(sim: &Simulation, s: &CoupledState, dir: &Path) -> Result<(), AppError> {
    let flow = &s.flow;
    write_vtk(
        &sim.flow_mesh,
        &format!("flow step {} t = {:e}", s.step, s.time),
        &VtkFields {
            cell_scalars: &[
                ("p", &flow.p),
                ("eps_v", &flow.eps_v),
                ("sigma_v", &flow.sigma_v),
            ],
            point_vectors: &[],
        },
        &dir.join(format!("flow_{:05}.vtk", s.step)),
    )?;
    let mech = &s.mech;
    write_vtk(
        &sim.mech_mesh,
        &format!("mech step {} t = {:e}", s.step, s.time),
        &VtkFields {
            cell_scalars: &[
                ("p", &mech.p_mech),
                ("eps_v", &mech.eps_v),
                ("sigma_v", &mech.sigma_v),
            ],
            point_vectors: &[("displacement", &mech.u)],
        },
        &dir.join(format!("mech_{:05}.vtk", s.step)),
    )?;
    Ok(())
}

fn cmd_run(path: &Path, stdout: &mut dyn Write) -> Result<(), AppError> {
    let text = read(path)?;
    let base = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let cfg = RunConfig::parse(&text, base)?;
    let sim = Simulation::new(
        cfg.flow_mesh.clone(),
        cfg.mech_mesh.clone(),
        cfg.material.clone(),
        cfg.flow_bc.clone(),
        cfg.mech_bc.clone(),
        DEFAULT_CONTAINMENT_TOL,
    )?;

    let dir = cfg.output_dir();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let log_path = dir.join("run.log");
    let mut log = BufWriter::new(File::create(&log_path).map_err(io_err(&log_path))?);
    let mut header = String::from("# configuration\n");
    header.push_str(&cfg.to_text());
    header.push_str("\n# projection\n");
    if let Some(d) = &sim.diagnostics {
        header.push_str(&d.to_string());
    }
    header.push_str("\n# steps\n");
    log.write_all(header.as_bytes())
        .map_err(io_err(&log_path))?;

    let n_steps = cfg.coupling.schedule.n_steps();
    let cadence = cfg.output.cadence;
    let mut failure: Option<AppError> = None;
    let result = sim.run_with(&cfg.coupling, cfg.initial_pressure, &cfg.probes, |s| {
        let mut step = || -> Result<(), AppError> {
            writeln!(log, "{}", step_line(s)).map_err(io_err(&log_path))?;
            if cfg.output.vtk && (s.step % cadence == 0 || s.step == n_steps) {
                write_snapshots(&sim, s, &dir)?;
            }
            Ok(())
        };
        step().map_err(|e| {
            let msg = e.to_string();
            failure = Some(e);
            CouplingError::InvalidConfig(format!("output failed: {msg}"))
        })
    });
    let out = match (result, failure) {
        (_, Some(e)) => return Err(e),
        (Err(e), None) => {
            let _ = writeln!(log, "error: {e}");
            let _ = log.flush();
            return Err(e.into());
        }
        (Ok(out), None) => out,
    };
    log.flush().map_err(io_err(&log_path))?;

    if cfg.output.csv {
        let reference = cfg.analytic()?;
        for series in &out.probes {
            let rows: Vec<ProbeRow> = series
                .times
                .iter()
                .zip(&series.pressure)
                .map(|(&t, &p)| {
                    let ana = reference
                        .as_ref()
                        .filter(|_| t > 0.0)
                        .map(|r| cfg.initial_pressure + r.pressure(series.point.y, t));
                    (t, p, ana)
                })
                .collect();
            let csv_path = dir.join(format!("probe_{}.csv", series.name));
            let f = File::create(&csv_path).map_err(io_err(&csv_path))?;
            write_probe_csv(BufWriter::new(f), &rows)?;
        }
    }

    let last = out.states.last().expect("initial state is always present");
    let max_it = out.states.iter().map(|s| s.iterations).max().unwrap_or(0);
    let _ = writeln!(stdout, "steps: {n_steps}");
    let _ = writeln!(stdout, "final_time: {:e}", last.time);
    let _ = writeln!(stdout, "max_iterations: {max_it}");
    let _ = writeln!(
        stdout,
        "all_converged: {}",
        out.states.iter().all(|s| s.converged)
    );
    let _ = writeln!(stdout, "output: {}", dir.display());
    Ok(())
}

fn cmd_mandel(
    fine: FineGrid,
    config: Option<&Path>,
    csv: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), AppError> {
    let cfg = match config {
        Some(p) => parse_mandel_config(&read(p)?)?,
        None => MandelConfig::default(),
    };
    let (report, _) = mandel_benchmark(&cfg, fine)?;
    let _ = writeln!(stdout, "{report}");
    if let Some(path) = csv {
        let rows: Vec<ProbeRow> = report
            .times
            .iter()
            .zip(&report.p_numeric)
            .zip(&report.p_analytic)
            .map(|((&t, &p), &a)| (t, p, Some(a)))
            .collect();
        let f = File::create(path).map_err(io_err(path))?;
        write_probe_csv(BufWriter::new(f), &rows)?;
    }
    Ok(())
}

fn load_mesh_file(path: &Path) -> Result<twogrid::TetMesh, AppError> {
    Ok(load_mesh(&read(path)?)?.0)
}

fn cmd_project_test(a: &Path, b: &Path, stdout: &mut dyn Write) -> Result<(), AppError> {
    let ma = load_mesh_file(a)?;
    let mb = load_mesh_file(b)?;
    let pairs = pair_elements(&ma, &mb, DEFAULT_CONTAINMENT_TOL)?;
    let (f2m, m2f) = build_projection(&pairs, ma.num_tets(), mb.num_tets());
    let d = ProjectionDiagnostics::new(&pairs, &f2m, &m2f);
    let _ = write!(stdout, "{d}");
    let _ = writeln!(
        stdout,
        "identity: {}, uncovered: {}",
        d.identity,
        d.uncovered_flow + d.uncovered_mech
    );
    Ok(())
}

fn cmd_mesh_box(
    cells: [usize; 3],
    lengths: [f64; 3],
    out: &Path,
    stdout: &mut dyn Write,
) -> Result<(), AppError> {
    if cells.iter().any(|&c| c == 0) {
        return Err(AppError::Invalid("cell counts must be >= 1".into()));
    }
    if lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(AppError::Invalid("lengths must be finite and > 0".into()));
    }
    let m = box_tet_mesh(
        cells[0], cells[1], cells[2], lengths[0], lengths[1], lengths[2],
    );
    fs::write(out, write_mesh(&m)).map_err(io_err(out))?;
    let _ = writeln!(
        stdout,
        "wrote {} nodes, {} tets to {}",
        m.num_nodes(),
        m.num_tets(),
        out.display()
    );
    Ok(())
}
