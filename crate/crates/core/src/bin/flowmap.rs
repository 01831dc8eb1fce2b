fn main() {
    std::process::exit(flowmap::cli::main_with(std::env::args_os()));
}
