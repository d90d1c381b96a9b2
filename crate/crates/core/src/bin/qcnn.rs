fn main() {
    std::process::exit(qcnn::cli::main_with_args(std::env::args_os()));
}
