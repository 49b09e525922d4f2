fn main() {
    std::process::exit(eigenkit::cli::run(std::env::args_os()));
}
