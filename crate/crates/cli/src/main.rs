fn main() {
    std::process::exit(assimlab_cli::main_with_args(std::env::args_os()));
}
