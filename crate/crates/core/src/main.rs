fn main() {
    std::process::exit(rejectlab::cli::run(std::env::args_os()));
}
