fn main() {
    std::process::exit(cathnav_cli::main_with(std::env::args_os()));
}
