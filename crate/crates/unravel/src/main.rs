use std::process::ExitCode;

fn main() -> ExitCode {
    unravel::cli::main_with_args(std::env::args_os())
}
