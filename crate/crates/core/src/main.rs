fn main() {
    std::process::exit(langlab::cli::run(std::env::args_os()));
}
