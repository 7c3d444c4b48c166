fn main() {
    std::process::exit(vixlab::cli::main_with_args(std::env::args_os()));
}
