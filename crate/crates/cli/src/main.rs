use std::process::ExitCode;

use clap::Parser;
use safedoe::app::{main_with, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SAFEDOE_LOG", "warn")).init();
    main_with(Cli::parse())
}
