fn main() {
    std::process::exit(ms2embed::cli::run(std::env::args_os()));
}
