use std::process::ExitCode;

use clap::Parser;
use rc_lab_cli::config::{Flags, OUTPUT_DIR_ENV};
use rc_lab_cli::{main_with, RunError};

fn main() -> ExitCode {
    let args: Vec<_> = std::env::args_os().collect();
    // Let clap print help and version text itself.
    if let Err(e) = Flags::try_parse_from(&args) {
        if !e.use_stderr() {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    }
    let env_dir = std::env::var_os(OUTPUT_DIR_ENV).map(Into::into);
    match main_with(args, env_dir) {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::json!({ "status": summary.status, "files": summary.files })
            );
            ExitCode::SUCCESS
        }
        Err(e) => report(&e),
    }
}

fn report(e: &RunError) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": e.record() }));
    ExitCode::from(e.exit_code() as u8)
}
