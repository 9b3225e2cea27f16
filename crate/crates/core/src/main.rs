fn main() {
    std::process::exit(urbancast::cli_io::cli::run(std::env::args_os()));
}
