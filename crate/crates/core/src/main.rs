fn main() {
    std::process::exit(hrp::cli::run(std::env::args_os()));
}
