fn main() {
    std::process::exit(eirp_core::cli::run(std::env::args_os()));
}
