//! `mimetic-swe`: meshes, scenario runs, property suites and spectra.
//!
//! Exit status is 0 when every declared threshold passes, 1 when one fails
//! (or a run aborts) and 2 on a usage error.

mod commands;
mod manifest;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "mimetic-swe", version, about = "Mixed finite element linear rotating shallow-water solver")]
struct Cli {
    /// Worker threads for parallel sections; 1 gives a fully sequential run.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate, validate or convert meshes.
    Mesh {
        #[command(subcommand)]
        action: MeshAction,
    },
    /// Run one scenario.
    Run {
        scenario: Scenario,
        #[command(flatten)]
        common: Common,
        /// Key-value config file, one `key = value` per line.
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        /// Mesh sizes for the Rossby convergence study, e.g. `8,16,32`.
        #[arg(long, value_name = "LIST")]
        sizes: Option<String>,
        /// Override a config key; may be repeated.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run a property suite.
    Verify {
        suite: Suite,
        #[command(flatten)]
        common: Common,
        /// Random fields or states per suite.
        #[arg(long, value_name = "N")]
        samples: Option<usize>,
        /// Time steps per state.
        #[arg(long, value_name = "N")]
        steps: Option<usize>,
    },
    /// Mode census, projection kernels and lowest wave frequency.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.0)]
        c2: f64,
        #[arg(long, default_value_t = 1.0)]
        f: f64,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Output directory for this run; defaults to `$MIMETIC_SWE_OUT/<run>` or `runs/<run>`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// `periodic:n`, `plane:n`, `channel:n`, `icosa:level`, `cylinder:na,nz`, `disk:rings` or `file:PATH`.
    #[arg(long, value_name = "SPEC")]
    mesh: Vec<String>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Write the assembled matrices in Matrix Market format.
    #[arg(long)]
    dump_matrices: bool,
}

#[derive(Debug, Subcommand)]
enum MeshAction {
    /// Build a mesh from a spec and write it in the native format.
    Generate {
        spec: String,
        /// Destination file; stdout when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Load a mesh file or spec, validate it and print its counts.
    Validate { spec: String },
    /// Read a gmsh or native file and write it in the native format.
    Convert { input: PathBuf, output: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Scenario {
    FplaneSteady,
    Kelvin,
    Rossby,
    BetaTube,
    SolidRotation,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Suite {
    Commuting,
    Conservation,
    Steady,
    Census,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match cli.command {
        Command::Mesh { action } => commands::mesh(action),
        Command::Run { scenario, common, config, sizes, set } => commands::run(scenario, &common, config, sizes, &set),
        Command::Verify { suite, common, samples, steps } => commands::verify(suite, &common, samples, steps),
        Command::Spectrum { common, c2, f } => commands::spectrum(&common, c2, f),
    };
    match outcome {
        Ok(commands::Status::Passed) => ExitCode::SUCCESS,
        Ok(commands::Status::Failed(names)) => {
            for n in &names {
                eprintln!("threshold failed: {n}");
            }
            ExitCode::from(1)
        }
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
