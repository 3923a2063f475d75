fn main() {
    std::process::exit(stratclass::cli::run(std::env::args_os()));
}
