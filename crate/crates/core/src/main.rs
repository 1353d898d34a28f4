use std::process::ExitCode;

fn main() -> ExitCode {
    vessel_hybrid::cli::run(std::env::args_os())
}
