fn main() {
    std::process::exit(kdv_spectral::cli::run(std::env::args_os()));
}
