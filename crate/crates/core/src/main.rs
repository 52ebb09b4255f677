fn main() {
    std::process::exit(babylon::cli::run(std::env::args_os()));
}
