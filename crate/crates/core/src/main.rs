fn main() {
    std::process::exit(gscs_core::cli::main_with_args(std::env::args_os()));
}
