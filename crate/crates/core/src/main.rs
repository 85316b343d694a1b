fn main() {
    std::process::exit(drsub::cli::main_with_args(std::env::args_os()));
}
