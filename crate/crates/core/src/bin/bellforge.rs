fn main() {
    std::process::exit(bellforge::cli::main_with(std::env::args_os()));
}
