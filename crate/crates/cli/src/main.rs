use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use fieldlog::cli::{self, Cli, Command, SyncCmd};
use tracing_subscriber::EnvFilter;

fn fail(message: &str) -> ExitCode {
    let line = message.lines().next().unwrap_or("failed");
    eprintln!("error: {line}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let args = Cli::parse();
    let default_level = if matches!(args.command, Command::Serve(_)) {
        "info"
    } else {
        "warn"
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default_level)))
        .with_writer(std::io::stderr)
        .init();

    let app = match cli::open_app(&args) {
        Ok(app) => app,
        Err(e) => return fail(&e),
    };
    let mut stdout = std::io::stdout().lock();
    let result = match &args.command {
        Command::Serve(_) => cli::serve(app),
        Command::Sync(SyncCmd::Daemon { ticks }) => cli::daemon(&app, *ticks, |line| {
            let _ = stdout.write_all(line.as_bytes());
            let _ = stdout.flush();
        })
        .map_err(|e| e.to_string()),
        command => cli::execute(&app, command)
            .map(|out| {
                let _ = stdout.write_all(out.as_bytes());
            })
            .map_err(|e| e.to_string()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
