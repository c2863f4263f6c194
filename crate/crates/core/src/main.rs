fn main() {
    std::process::exit(hemanet::cli::main_with_args(std::env::args_os()));
}
