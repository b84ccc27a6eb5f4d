fn main() {
    std::process::exit(tangseg::cli::main_with_args(std::env::args_os()));
}
