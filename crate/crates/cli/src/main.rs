fn main() {
    std::process::exit(bmnn_cli::main_with_args(std::env::args_os()));
}
