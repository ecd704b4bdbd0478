fn main() {
    std::process::exit(pacvb::cli::main_with(std::env::args_os()));
}
