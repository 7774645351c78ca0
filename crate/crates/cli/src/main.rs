mod args;
mod commands;
mod config_file;

use std::process::ExitCode;

use clap::Parser;
use debias_core::Error;

use args::{Cli, Command};

/// 2: invalid input or configuration, 3: file I/O or unreadable file,
/// 4: data, checkpoint or shape mismatch.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::Io { .. } | Error::Format { .. } | Error::Idx(_) => 3,
        Error::Mismatch(_) | Error::Tensor(_) | Error::Eval(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => commands::generate_cmd(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Eval(a) => commands::eval_cmd(a),
        Command::Plot(a) => commands::plot_cmd(a),
        Command::Sweep(a) => commands::sweep_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
