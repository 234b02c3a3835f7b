fn main() {
    std::process::exit(fraisse::cli::main_with_args());
}
