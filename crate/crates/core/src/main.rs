use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(racelab::harness::cli::main_with_args(std::env::args()))
}
