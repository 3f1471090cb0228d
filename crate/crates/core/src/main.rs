fn main() {
    std::process::exit(snapforge::harness::cli::cli(std::env::args_os()));
}
