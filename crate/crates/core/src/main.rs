fn main() {
    std::process::exit(eigenframe::cli::main_with_args(std::env::args_os()));
}
