fn main() {
    std::process::exit(satpose::cli::main_with_args(std::env::args_os()));
}
