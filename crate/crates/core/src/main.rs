fn main() {
    std::process::exit(wdmqkd::cli::main_with_args(std::env::args_os()));
}
