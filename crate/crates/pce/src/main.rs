use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("PCE_LOG")).init();
    ExitCode::from(pce::cli::run(std::env::args()) as u8)
}
