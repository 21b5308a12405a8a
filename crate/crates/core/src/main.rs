fn main() {
    std::process::exit(tdrguard::cli::run(std::env::args_os()));
}
