fn main() {
    std::process::exit(elastocloak::cli::main_with_args(std::env::args_os()));
}
