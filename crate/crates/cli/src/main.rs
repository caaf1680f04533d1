use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sparseform_cli::runner::{run, Op, Overrides};

#[derive(Parser)]
#[command(name = "sparseform", version, about = "Sparse-form norm experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for reports and artifacts (default: current dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config grid depth.
    #[arg(long)]
    depth: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Weight characteristics of each sampled pair.
    Characteristics(Common),
    /// Norm bundle with the exact-direction assertions.
    Norm(Common),
    /// Testing constants and the characterization ratio.
    Testing(Common),
    /// Run the theorem suite selected by `suite` in the config.
    Verify(Common),
    /// Hill-climb for large ratios against the configured conjecture.
    Hunt(Common),
    /// Materialize the weight ensemble as text files.
    Gen(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (op, common) = match cli.command {
        Command::Characteristics(c) => (Op::Characteristics, c),
        Command::Norm(c) => (Op::Norm, c),
        Command::Testing(c) => (Op::Testing, c),
        Command::Verify(c) => (Op::Verify, c),
        Command::Hunt(c) => (Op::Hunt, c),
        Command::Gen(c) => (Op::Gen, c),
    };
    let ov = Overrides { out: common.out, seed: common.seed, depth: common.depth };
    ExitCode::from(run(op, &common.config, &ov) as u8)
}
