fn main() {
    std::process::exit(polardyn::cli::run(std::env::args_os()));
}
