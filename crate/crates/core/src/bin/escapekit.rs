fn main() {
    std::process::exit(escapekit::cli::run(std::env::args_os()));
}
