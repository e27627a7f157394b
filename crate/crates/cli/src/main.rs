//! `vlx`: generate a shapes corpus, train the toy dual encoder, and build,
//! fuse and compare attribution maps.

mod args;
mod commands;
mod report;

use std::process::ExitCode;

use clap::Parser;
use vlx_core::VlxError;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("E_USAGE: {first}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Train(a) => commands::train(a),
        Command::Stack(a) => commands::stack(a),
        Command::Fuse(a) => commands::fuse(a),
        Command::Explain(a) => commands::explain(a),
        Command::Compare(a) => report::compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let one_line = e.to_string().replace('\n', " ");
            eprintln!("{}: {one_line}", e.code());
            match e {
                VlxError::UnknownMethod(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
