fn main() -> std::process::ExitCode {
    nbfix_service::cli::main()
}
