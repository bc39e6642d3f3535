fn main() {
    std::process::exit(sadi::cli::main_with_args(std::env::args_os()));
}
