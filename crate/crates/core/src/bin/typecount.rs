fn main() {
    std::process::exit(typecount::cli::run(std::env::args_os()));
}
