fn main() {
    std::process::exit(einflow_cli::run(std::env::args_os()));
}
