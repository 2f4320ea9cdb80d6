fn main() {
    std::process::exit(nehari_core::cli::run(std::env::args_os()));
}
