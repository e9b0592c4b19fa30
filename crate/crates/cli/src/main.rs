use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(ductwave_cli::dispatch(std::env::args_os()))
}
