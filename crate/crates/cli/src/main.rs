use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bse_cli::config::Geometry;
use bse_cli::{build_mesh, run, CliError, RunConfig, RunOptions};
use bse_core::mesh::write_mesh;
use bse_core::oracle::disk_eigs_second;
use clap::{Parser, Subcommand, ValueEnum};
use log::{error, LevelFilter};

#[derive(Parser)]
#[command(name = "bse", version, about = "Bulk-surface finite element runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the task described by a JSON configuration.
    Run {
        config: PathBuf,
        /// Output directory, overriding `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Generate a mesh and write it in the text mesh format.
    Mesh {
        #[arg(long, value_enum)]
        geometry: GeometryKind,
        /// Boundary nodes of a disk, or cells per side of a square.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        refine: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dispersion roots of the unit-disk eigenproblem.
    Oracle {
        #[arg(long = "K")]
        k: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 8)]
        mmax: usize,
        #[arg(long, default_value_t = 40.0)]
        lmax: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GeometryKind {
    Disk,
    Square,
}

fn init_logging() {
    let level = match std::env::var("BSE_LOG").as_deref() {
        Ok("debug") => LevelFilter::Debug,
        Ok("info") => LevelFilter::Info,
        Ok("quiet") => LevelFilter::Off,
        _ => LevelFilter::Warn,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
}

fn write_error(dir: &Path, e: &CliError) {
    let _ = std::fs::create_dir_all(dir);
    let path = dir.join("error.json");
    if let Err(io) = std::fs::write(&path, format!("{}\n", e.to_json())) {
        error!("cannot write {}: {io}", path.display());
    }
}

fn run_command(config: &Path, opts: RunOptions) -> Result<(), (CliError, PathBuf)> {
    let fallback = opts.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let cfg = RunConfig::load(config).map_err(|e| (e, fallback.clone()))?;
    let dir = opts.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let outcome = run(&cfg, &opts).map_err(|e| (e, dir))?;
    for f in &outcome.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn parent_dir(p: &Path) -> PathBuf {
    p.parent().filter(|d| !d.as_os_str().is_empty()).map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, seed, threads } => run_command(&config, RunOptions { out, seed, threads }),
        Command::Mesh { geometry, n, refine, out } => {
            let g = match geometry {
                GeometryKind::Disk => Geometry::Disk { n_boundary: n, refine },
                GeometryKind::Square => Geometry::Square { n_per_side: n, refine },
            };
            build_mesh(&g)
                .and_then(|m| write_mesh(&m, &out).map_err(CliError::from))
                .map_err(|e| (e, parent_dir(&out)))
        }
        Command::Oracle { k, alpha, gamma, mmax, lmax, out } => disk_eigs_second(k, alpha, gamma, mmax, lmax)
            .map_err(CliError::from)
            .and_then(|roots| bse_cli::write_roots(&roots, &out))
            .map_err(|e| (e, parent_dir(&out))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((e, dir)) => {
            eprintln!("error: {e}");
            write_error(&dir, &e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
