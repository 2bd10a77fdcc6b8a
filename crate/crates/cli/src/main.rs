fn main() {
    std::process::exit(eharq_cli::cli::main_with_args(std::env::args_os()));
}
