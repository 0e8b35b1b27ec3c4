fn main() -> std::process::ExitCode {
    stroboscope::cli::main()
}
