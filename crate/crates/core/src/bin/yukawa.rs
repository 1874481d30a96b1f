fn main() {
    std::process::exit(yukawa_core::cli::run(std::env::args_os()));
}
