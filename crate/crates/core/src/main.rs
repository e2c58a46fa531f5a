fn main() {
    std::process::exit(amrsum_core::cli::main_with_args(std::env::args_os()));
}
