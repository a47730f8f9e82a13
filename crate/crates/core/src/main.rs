use std::process::ExitCode;

fn main() -> ExitCode {
    vapsr::io::cli::run(std::env::args_os())
}
