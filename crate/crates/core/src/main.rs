fn main() {
    std::process::exit(spanedit::cli::main_with_args(std::env::args_os()));
}
