fn main() -> std::process::ExitCode {
    multifrac::cli::main()
}
