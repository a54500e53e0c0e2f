fn main() {
    std::process::exit(rectm_cli::main_with_args(std::env::args_os()));
}
