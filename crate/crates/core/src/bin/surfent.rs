fn main() {
    std::process::exit(surfent::cli::run(std::env::args_os()));
}
