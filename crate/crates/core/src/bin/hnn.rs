fn main() -> std::process::ExitCode {
    hnn::cli::main()
}
