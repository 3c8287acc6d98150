fn main() {
    std::process::exit(barrierfw::cli::run(std::env::args_os()));
}
