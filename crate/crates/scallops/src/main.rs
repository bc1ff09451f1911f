fn main() {
    std::process::exit(scallops::cli::run_from(std::env::args_os()));
}
