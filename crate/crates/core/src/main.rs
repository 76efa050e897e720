use std::process::ExitCode;

fn main() -> ExitCode {
    toa::cli::main_with_args(std::env::args_os())
}
