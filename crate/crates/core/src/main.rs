fn main() {
    std::process::exit(tic_snn::harness::cli::run(std::env::args_os()));
}
