fn main() {
    std::process::exit(dirac_split::cli::main_with_args(std::env::args_os()));
}
