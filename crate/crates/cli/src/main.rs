fn main() {
    std::process::exit(fairsumm_cli::run(std::env::args_os()));
}
