fn main() {
    std::process::exit(lesionfuse::cli::run(std::env::args_os()));
}
