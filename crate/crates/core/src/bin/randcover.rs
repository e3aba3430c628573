fn main() {
    std::process::exit(randcover::cli::main_with_args(std::env::args_os()));
}
