//! Operator entry point. `run` drives the whole pipeline over the agent
//! platform; the stage subcommands run one step each with file inputs and
//! outputs so any step can be exercised and inspected on its own.
//!
//! Exit codes: 0 every source made it through, 1 at least one source
//! failed, 2 the invocation or configuration itself is unusable.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

use commands::{Failure, StageArgs};

#[derive(Parser)]
#[command(name = "complex-etl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: extract, wrap, emit XML, shred, load
    Run(StageArgs),
    /// Extract attributes from every manifest source into attributes.json
    Extract(StageArgs),
    /// Wrap extracted attributes as objects and emit one XML file each
    GenXml(StageArgs),
    /// Compile the document type into SQL DDL (schema.sql)
    Dtd2sql(StageArgs),
    /// Validate, shred, and load emitted XML files into the store
    Shred(StageArgs),
    /// Rebuild XML documents from the store and print them
    Reconstruct(StageArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => commands::run(&args),
        Command::Extract(args) => commands::extract_stage(&args),
        Command::GenXml(args) => commands::gen_xml(&args),
        Command::Dtd2sql(args) => commands::dtd2sql(&args),
        Command::Shred(args) => commands::shred_stage(&args),
        Command::Reconstruct(args) => commands::reconstruct_stage(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(message)) => {
            eprintln!("{message}");
            ExitCode::from(1)
        }
        Err(Failure::Config(message)) => {
            eprintln!("{message}");
            ExitCode::from(2)
        }
    }
}
