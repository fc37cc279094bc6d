use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use relu_varieties::par::Execution;
use relu_varieties::report::{find_preset, parse_config, run_pipeline, run_regions, AnalysisConfig, RunOptions, Stage, PRESETS};
use relu_varieties::Error;

#[derive(Parser)]
#[command(name = "reluvar", version, about = "Rank constraints on the outputs of ReLU networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the constraint inventory without verifying it.
    Invariants(Common),
    /// Build the constraints and check them on sampled parameters.
    Verify(Common),
    /// Functional dimension from exact Jacobian ranks.
    Dimension(Common),
    /// Carry pattern constraints to the outputs of the configured dataset.
    Transform(Common),
    /// Activation-pattern scan of a 2D slice, written as CSV.
    Regions {
        #[command(flatten)]
        common: Common,
        /// Grid size (overrides the config).
        #[arg(long, num_args = 2, value_names = ["W", "H"])]
        grid: Option<Vec<usize>>,
    },
    /// Run the full pipeline on a bundled preset, or list presets without a name.
    Preset {
        name: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the full pipeline.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Config file (JSON, schema v1).
    #[arg(short = 'c', long)]
    config: Option<PathBuf>,
    /// Use a bundled preset instead of a config file.
    #[arg(long)]
    preset: Option<String>,
    /// Write the output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    coeff_bound: Option<i64>,
    #[arg(long)]
    max_minors: Option<usize>,
    /// Include wall-clock timings in the report.
    #[arg(long)]
    timing: bool,
    /// Run everything on the calling thread.
    #[arg(long)]
    sequential: bool,
}

enum Failure {
    Config(String),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e.to_string())
    }
}

impl Common {
    fn load(&self) -> Result<AnalysisConfig, Failure> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(_), Some(_)) => return Err(Failure::Config("give either --config or --preset, not both".into())),
            (Some(path), None) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
                parse_config(&text)?
            }
            (None, Some(name)) => find_preset(name)?.config(),
            (None, None) => return Err(Failure::Config("no config given; use --config PATH or --preset NAME".into())),
        };
        if let Some(s) = self.seed {
            cfg.verify.master_seed = s;
        }
        if let Some(n) = self.samples {
            cfg.verify.num_samples = n;
        }
        if let Some(b) = self.coeff_bound {
            cfg.verify.coeff_bound = b;
        }
        if let Some(m) = self.max_minors {
            cfg.limits.max_minors = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }

    fn emit(&self, text: &str) -> Result<(), Failure> {
        match &self.out {
            Some(path) => fs::write(path, text).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display()))),
            None => match io::stdout().lock().write_all(text.as_bytes()) {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(Failure::Config(format!("cannot write output: {e}"))),
                _ => Ok(()),
            },
        }
    }

    fn run(&self, stage: Stage) -> Result<(), Failure> {
        let cfg = self.load()?;
        let opts = RunOptions {
            stage,
            timing: self.timing,
            execution: self.execution(),
        };
        let report = run_pipeline(&cfg, &opts)?;
        self.emit(&report.to_json())?;
        if report.summary.all_hold {
            Ok(())
        } else {
            Err(Failure::Verification)
        }
    }
}

fn list_presets() -> String {
    let width = PRESETS.iter().map(|p| p.name.len()).max().unwrap_or(0);
    PRESETS
        .iter()
        .map(|p| format!("{:width$}  {}\n", p.name, p.description))
        .collect()
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Invariants(c) => c.run(Stage::Invariants),
        Command::Verify(c) => c.run(Stage::Verify),
        Command::Dimension(c) => c.run(Stage::Dimension),
        Command::Transform(c) => c.run(Stage::Transform),
        Command::Report(c) => c.run(Stage::Report),
        Command::Preset { name, mut common } => match name.or(common.preset.take()) {
            Some(name) => {
                if common.config.is_some() {
                    return Err(Failure::Config("preset does not take --config".into()));
                }
                common.preset = Some(name);
                common.run(Stage::Report)
            }
            None => common.emit(&list_presets()),
        },
        Command::Regions { common, grid } => {
            let cfg = common.load()?;
            let grid = grid.map(|g| (g[0], g[1]));
            let scan = run_regions(&cfg, grid, common.execution())?;
            common.emit(&scan.to_csv())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => {
            eprintln!("reluvar: some constraints failed verification");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("reluvar: {msg}");
            ExitCode::from(2)
        }
    }
}
