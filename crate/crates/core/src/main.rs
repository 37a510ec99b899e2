fn main() {
    std::process::exit(oneform_lab::cli::main_with_args(std::env::args_os()));
}
