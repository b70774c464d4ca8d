fn main() {
    std::process::exit(explia::cli::main_with_args(std::env::args_os()));
}
