fn main() {
    std::process::exit(drbounds::cli::run(std::env::args_os()));
}
