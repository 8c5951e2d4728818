fn main() {
    std::process::exit(avfuse::cli::run(std::env::args_os()));
}
