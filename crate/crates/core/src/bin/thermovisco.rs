fn main() {
    std::process::exit(thermovisco::cli::run(std::env::args_os()));
}
