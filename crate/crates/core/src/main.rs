fn main() {
    std::process::exit(nematic::cli::run(std::env::args_os()));
}
