fn main() {
    std::process::exit(flexbeam::cli::main_with_args(std::env::args_os()));
}
