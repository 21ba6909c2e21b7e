fn main() {
    std::process::exit(stance_cli::main_with(std::env::args_os()));
}
