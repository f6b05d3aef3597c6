fn main() -> std::process::ExitCode {
    pemkit::cli::main()
}
