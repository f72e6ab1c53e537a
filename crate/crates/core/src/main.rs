fn main() {
    std::process::exit(mbtl::cli::run_cli(std::env::args_os()));
}
