fn main() {
    std::process::exit(floral::cli::main());
}
