fn main() {
    std::process::exit(occexpo_cli::main_with_args(std::env::args_os()));
}
