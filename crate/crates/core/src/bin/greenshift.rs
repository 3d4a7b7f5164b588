use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use greenshift::exact::{build_ilp, export_lp, ExactInstance};
use greenshift::experiment::{
    emit_plot_data, read_results, run_to_dir, validate_run, write_series, ExperimentSpec, Figure, Slice,
};
use greenshift::spectrum::SpectrumGrid;
use greenshift::workload::generate_requests;

#[derive(Parser)]
#[command(name = "greenshift", version, about = "Renewable-aware VM migration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write CSV results into the output directory.
    Run {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the spec file's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the spec file's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one figure's series as `figure-<name>.csv` next to the results.
    Plot {
        #[arg(long)]
        figure: Figure,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        umax: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        loads: Option<Vec<f64>>,
        /// Output file instead of the default inside the results directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check a finished run. Exits with 1 if any invariant fails.
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Write the migration ILP of one cell in LP format.
    ExportIlp {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Load to draw; defaults to the spec file's first.
        #[arg(long)]
        load: Option<f64>,
        /// Defaults to the spec file's first value.
        #[arg(long)]
        umax: Option<f64>,
        #[arg(long, default_value_t = 0)]
        replication: u64,
    },
}

enum Failure {
    Validation,
    Other(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Other(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation) => ExitCode::from(1),
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { spec, seed, out } => {
            let mut spec = ExperimentSpec::from_file(&spec)?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            if let Some(out) = out {
                spec.out_dir = out;
            }
            let dir = spec.out_dir.clone();
            let result = run_to_dir(&spec, &dir)?;
            println!("{} rows written to {}", result.rows.len(), dir.display());
        }
        Command::Plot { figure, input, algorithms, umax, loads, out } => {
            let rows = read_results(&input)?;
            let points = emit_plot_data(&rows, figure, &Slice { algorithms, umax, loads })?;
            let path = out.unwrap_or_else(|| input.join(format!("figure-{figure}.csv")));
            write_series(&points, figure, &path)?;
            println!("{} points written to {}", points.len(), path.display());
        }
        Command::Validate { input } => {
            let report = validate_run(&input);
            print!("{report}");
            if !report.passed() {
                return Err(Failure::Validation);
            }
        }
        Command::ExportIlp { spec, out, load, umax, replication } => {
            let spec = ExperimentSpec::from_file(&spec)?;
            let topo = spec.load_topology()?;
            let load = load.unwrap_or(spec.loads[0]);
            let umax = umax.unwrap_or(spec.umax[0]);
            let config = spec.scenario(load, replication);
            let draw = generate_requests(&config, topo.dc_nodes())?;
            let grid = SpectrumGrid::for_topology(&topo, spec.slot_rate_gbps);
            let inst = ExactInstance::from_draw(&topo, grid, &draw, config.energy_model(), spec.network(umax));
            let model = build_ilp(&inst, spec.ilp_row_budget)?;
            std::fs::write(&out, export_lp(&model))?;
            println!("{} variables, {} rows written to {}", model.variables.len(), model.rows.len(), out.display());
        }
    }
    Ok(())
}
