use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use choquard::config::{parse_radii, Radius, RunConfig};
use choquard::grid3d::{ground_state_iterate, radial_deviation, shell_profile, OracleOptions, OracleSeed};
use choquard::solver::solve_ball;
use choquard::sweep::{default_radii, run_sweep};
use choquard::verify::{self, Suite};
use choquard::{BallSpec, Dimension, Error, Tolerances};

#[derive(Parser)]
#[command(name = "choquard", version, about = "Radial ground states of the Choquard equation on balls and on R^N")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ground state on the ball of the given radius, or on the whole space with `inf`.
    Solve {
        #[arg(long)]
        dim: u32,
        #[arg(long, allow_hyphen_values = true)]
        radius: String,
        #[arg(long)]
        tol_ode: Option<f64>,
        /// GroundState JSON; the profile CSV goes next to it with extension `.csv`.
        #[arg(long, default_value = "ground_state.json")]
        out: PathBuf,
    },
    /// Convergence sweep over ball radii.
    Sweep {
        #[arg(long)]
        dim: u32,
        /// Comma-separated radii; defaults to 2,4,8,16,32 (top radius halved above three dimensions).
        #[arg(long)]
        radii: Option<String>,
        /// CSV output; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Finite-difference solve of the coupled system on a 3D grid.
    Oracle3d {
        #[arg(long, allow_hyphen_values = true)]
        radius: f64,
        #[arg(long, default_value_t = 41)]
        grid: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        asymmetric_seed: bool,
        #[arg(long, default_value = "oracle3d")]
        out_dir: PathBuf,
    },
    /// Runs invariant suites and prints PASS/FAIL per check.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        return fail(&e);
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => fail(&e),
    }
}

fn init_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("SOLVER_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Parse(format!("SOLVER_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Domain(e.to_string()))
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
    ExitCode::from(if e.is_validation() { 2 } else { 1 })
}

fn dispatch(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Solve { dim, radius, tol_ode, out } => {
            let mut cfg = RunConfig {
                dim,
                radius: radius.parse()?,
                out: Some(out),
                ..Default::default()
            };
            if let Some(x) = tol_ode {
                cfg.tolerances.ode = x;
            }
            solve(&cfg)
        }
        Command::Sweep { dim, radii, out, json } => {
            let dim = Dimension::new(dim)?;
            let radii = match radii {
                Some(s) => parse_radii(&s)?,
                None => default_radii(dim),
            };
            let sweep = run_sweep(dim, &radii, &Tolerances::default())?;
            let csv = sweep.to_csv_string();
            match out {
                Some(p) => write(&p, csv.as_bytes())?,
                None => print!("{csv}"),
            }
            if let Some(p) = json {
                write(&p, sweep.to_json().as_bytes())?;
            }
            Ok(if sweep.succeeded() > 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Oracle3d {
            radius,
            grid,
            seed,
            asymmetric_seed,
            out_dir,
        } => {
            let cfg = RunConfig {
                radius: Radius::Finite(radius),
                grid,
                seed,
                ..Default::default()
            };
            let ball = cfg.ball()?;
            let seed = if asymmetric_seed { OracleSeed::Asymmetric } else { OracleSeed::Random(cfg.seed) };
            oracle(&ball, cfg.grid, &seed, &out_dir)
        }
        Command::Verify { suite, seed } => {
            let suite: Suite = suite.parse()?;
            let checks = verify::run(suite, seed);
            for c in &checks {
                println!("{c}");
            }
            let failed = checks.iter().filter(|c| !c.pass).count();
            println!("{} checks, {failed} failed", checks.len());
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn solve(cfg: &RunConfig) -> Result<ExitCode, Error> {
    let ball = cfg.ball()?;
    let gs = solve_ball(&ball, &cfg.tolerances)?;
    let out = cfg.out.clone().unwrap_or_else(|| "ground_state.json".into());
    write(&out, gs.to_json().as_bytes())?;
    write(&out.with_extension("csv"), gs.profile.to_csv_string().as_bytes())?;
    print!("{}", gs.summary_lines());
    Ok(ExitCode::SUCCESS)
}

fn oracle(ball: &BallSpec, grid: usize, seed: &OracleSeed, dir: &Path) -> Result<ExitCode, Error> {
    let run = ground_state_iterate(ball, grid, seed, &OracleOptions::default())?;
    let u = &run.field.u;
    let deviation = radial_deviation(u)?;
    fs::create_dir_all(dir)?;
    write(&dir.join("u.bin"), &u.to_bytes())?;
    write(&dir.join("w.bin"), &run.field.w.to_bytes())?;
    let sidecar = serde_json::to_string(&u.sidecar())?;
    write(&dir.join("u.json"), sidecar.as_bytes())?;
    write(&dir.join("w.json"), sidecar.as_bytes())?;
    write(&dir.join("shell_profile.csv"), shell_profile(u)?.to_csv_string().as_bytes())?;
    let summary = json!({
        "c_R_grid": run.energy,
        "radial_deviation": deviation,
        "iterations": run.field.iteration,
        "residual": run.field.residual,
    });
    let text = serde_json::to_string_pretty(&summary)?;
    write(&dir.join("summary.json"), text.as_bytes())?;
    println!("{text}");
    Ok(ExitCode::SUCCESS)
}
