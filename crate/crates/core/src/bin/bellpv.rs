fn main() {
    std::process::exit(bellpv::cli::run(std::env::args_os()));
}
