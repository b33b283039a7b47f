fn main() {
    std::process::exit(durations::cli::run(std::env::args_os()));
}
