fn main() {
    std::process::exit(lpwalk::cli::main_with_args(std::env::args_os()));
}
