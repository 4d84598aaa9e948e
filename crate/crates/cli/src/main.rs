use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fmto_cli::{config_dir_of, default_config, run, Command, RunConfig, RunOptions, PAPER_REPLICA};

#[derive(Parser, Debug)]
#[command(
    name = "fmto",
    version,
    about = "Levitated torsional-oscillator magnetometer simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Run configuration (TOML). Without it a single default scenario runs.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Use a bundled configuration instead of a file (`paper-replica`).
    #[arg(long, global = true, conflicts_with = "config")]
    bundled: Option<String>,

    /// Output root; each scenario writes to OUT/<name>/.
    #[arg(long, global = true, default_value = "fmto-out")]
    out: PathBuf,

    /// Overrides every scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Run every scenario in the config.
    Run,
    Simulate,
    Analyze,
    Calibrate,
    Sensitivity,
    Bounds,
    Coils,
    Sweep,
    /// Print the bundled paper-replica config.
    ShowConfig,
}

impl Cmd {
    fn only(self) -> Option<Command> {
        match self {
            Cmd::Run | Cmd::ShowConfig => None,
            Cmd::Simulate => Some(Command::Simulate),
            Cmd::Analyze => Some(Command::Analyze),
            Cmd::Calibrate => Some(Command::Calibrate),
            Cmd::Sensitivity => Some(Command::Sensitivity),
            Cmd::Bounds => Some(Command::Bounds),
            Cmd::Coils => Some(Command::Coils),
            Cmd::Sweep => Some(Command::Sweep),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(
        env_logger::Env::default().default_filter_or(if cli.verbose { "info" } else { "warn" }),
    )
    .init();
    if let Cmd::ShowConfig = cli.command {
        print!("{PAPER_REPLICA}");
        return ExitCode::SUCCESS;
    }
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let (cfg, config_dir) = match (&cli.config, cli.bundled.as_deref()) {
        (Some(path), _) => match RunConfig::load(path) {
            Ok(c) => (c, config_dir_of(path)),
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        (None, Some("paper-replica")) => (
            RunConfig::from_toml_str(PAPER_REPLICA).expect("bundled config parses"),
            PathBuf::new(),
        ),
        (None, Some(other)) => {
            eprintln!("error: no bundled config named '{other}'");
            return ExitCode::from(2);
        }
        (None, None) => match cli.command.only() {
            Some(c) => (default_config(c), PathBuf::new()),
            None => {
                eprintln!("error: `run` needs --config or --bundled");
                return ExitCode::from(2);
            }
        },
    };
    let opts = RunOptions {
        out: cli.out.clone(),
        seed: cli.seed,
        config_dir,
        only: cli.command.only(),
    };
    match run(&cfg, &opts) {
        Ok(reports) => {
            for r in reports {
                println!(
                    "{}: {} files in {}",
                    r.name,
                    r.manifest.outputs.len(),
                    r.dir.display()
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
