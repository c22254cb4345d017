fn main() {
    std::process::exit(smallbody::cli::main_with(std::env::args_os()));
}
