use std::process::ExitCode;

fn main() -> ExitCode {
    cvimsim_cli::run(std::env::args_os())
}
