fn main() -> std::process::ExitCode {
    monostab::cli::main()
}
