fn main() {
    std::process::exit(chainkb::cli::run(std::env::args_os()));
}
