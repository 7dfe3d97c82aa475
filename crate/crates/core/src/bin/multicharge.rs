fn main() {
    std::process::exit(multicharge::cli::main());
}
