use std::process::ExitCode;

fn main() -> ExitCode {
    ssh_jumptime::cli::run_from_env()
}
