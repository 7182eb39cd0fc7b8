use std::process::ExitCode;

fn main() -> ExitCode {
    let quiet = std::env::args().any(|a| a == "--quiet");
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if quiet { "error" } else { "warn" }))
        .init();
    let code = altbi::cli::main_with_args(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    ExitCode::from(code)
}
