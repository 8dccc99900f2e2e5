use std::process::ExitCode;

fn main() -> ExitCode {
    stlsq_cli::run(std::env::args_os())
}
