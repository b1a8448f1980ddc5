fn main() {
    std::process::exit(streetsense::cli::run_from(std::env::args_os()));
}
