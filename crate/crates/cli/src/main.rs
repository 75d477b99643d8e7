fn main() {
    std::process::exit(hdsphere_cli::main_with_args(std::env::args_os()));
}
