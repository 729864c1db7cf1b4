fn main() {
    std::process::exit(ranfm_cli::run_cli(std::env::args().skip(1)));
}
