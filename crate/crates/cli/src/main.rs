//! `memsim`: runs the analytic, PDE and Monte Carlo engines from the shell.
//!
//! Exit status: 0 on success, 1 when an engine or I/O step fails, 2 when a
//! configuration or netlist cannot be parsed or validated.

mod config;
mod engines;
mod error;
mod reproduce;
mod table;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use memsim::circuit::{parse_netlist, solve_operating_point, Element};

use crate::config::Overrides;
use crate::error::CliError;
use crate::reproduce::Figure;

#[derive(Debug, Parser)]
#[command(
    name = "memsim",
    version,
    about = "Stochastic memristive circuit simulator"
)]
struct Cli {
    /// Master seed for Monte Carlo, replacing `mc.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trajectory count for Monte Carlo, replacing `mc.trajectories`.
    #[arg(long, global = true)]
    trajectories: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the engine selected in a TOML configuration and write CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output file; defaults to the config's `output`, else stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the reference curves as CSV and gnuplot data.
    Reproduce {
        figure: Figure,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Parse a netlist, check connectivity and solve its operating point.
    NetlistCheck { file: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let overrides = Overrides {
        seed: cli.seed,
        trajectories: cli.trajectories,
    };
    let result = match cli.command {
        Command::Simulate { config, out } => simulate(&config, out, overrides),
        Command::Reproduce { figure, out } => reproduce(figure, &out),
        Command::NetlistCheck { file } => netlist_check(&file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn simulate(path: &Path, out: Option<PathBuf>, overrides: Overrides) -> Result<(), CliError> {
    let prepared = config::load(path, overrides)?;
    let outcome = engines::simulate(&prepared)?;
    let csv = outcome.table.to_csv();
    let target = out.or_else(|| {
        let base = path.parent().unwrap_or(Path::new("."));
        prepared.config.output.as_ref().map(|o| base.join(o))
    });
    match &target {
        Some(file) => table::write_file(file, &csv)?,
        None => std::io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|source| CliError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            })?,
    }
    if let Some(s) = outcome.summary {
        let summary = format!(
            "max_abs_dev_pde={:e}\nmax_z_mc={:e}\n",
            s.max_abs_dev_pde, s.max_z_mc
        );
        if target.is_some() {
            print!("{summary}");
        } else {
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn reproduce(figure: Figure, dir: &Path) -> Result<(), CliError> {
    let table = reproduce::table(figure)?;
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let csv = dir.join(format!("{}.csv", figure.name()));
    let dat = dir.join(format!("{}.dat", figure.name()));
    table::write_file(&csv, &table.to_csv())?;
    table::write_file(&dat, &table.to_gnuplot())?;
    println!("wrote {} and {}", csv.display(), dat.display());
    Ok(())
}

fn netlist_check(path: &Path) -> Result<(), CliError> {
    let netlist_error = |message: String| CliError::Netlist {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| netlist_error(e.to_string()))?;
    let netlist = parse_netlist(&text).map_err(|e| netlist_error(e.to_string()))?;
    let initial = netlist.initial_state();
    solve_operating_point(&netlist, &initial)
        .map_err(|e| CliError::engine("operating point", e))?;
    let count = |f: fn(&Element) -> bool| {
        netlist
            .components()
            .iter()
            .filter(|c| f(&c.element))
            .count()
    };
    println!("OK");
    println!("nodes: {}", netlist.node_count());
    println!(
        "components: {} ({} sources, {} resistors, {} capacitors, {} memristors)",
        netlist.components().len(),
        count(|e| matches!(e, Element::VoltageSource(_))),
        count(|e| matches!(e, Element::Resistor(_))),
        count(|e| matches!(e, Element::Capacitor { .. })),
        count(|e| matches!(e, Element::Memristor { .. })),
    );
    println!("operating point: solvable at t = 0");
    Ok(())
}
