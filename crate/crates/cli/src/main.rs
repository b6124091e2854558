fn main() {
    std::process::exit(hyperbarrier_cli::run(std::env::args_os()));
}
