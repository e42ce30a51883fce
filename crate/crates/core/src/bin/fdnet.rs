fn main() -> std::process::ExitCode {
    fdnet::cli::main_from_env()
}
