fn main() {
    std::process::exit(portsheaf::cli::main_with_args(std::env::args_os()));
}
