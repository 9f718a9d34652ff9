fn main() {
    std::process::exit(transport::cli::main_with_args(std::env::args_os()));
}
