fn main() -> std::process::ExitCode {
    rosynet::cli::main()
}
