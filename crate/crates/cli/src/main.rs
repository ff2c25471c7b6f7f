fn main() -> std::process::ExitCode {
    priorsynth_cli::run(std::env::args_os())
}
