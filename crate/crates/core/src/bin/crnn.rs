fn main() {
    std::process::exit(bearing_crnn::cli::main_with_args(std::env::args_os()));
}
