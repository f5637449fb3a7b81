fn main() {
    std::process::exit(reckit::cli::run(std::env::args_os()));
}
