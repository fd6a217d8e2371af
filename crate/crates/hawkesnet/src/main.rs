fn main() -> std::process::ExitCode {
    hawkesnet::cli::main(std::env::args_os())
}
