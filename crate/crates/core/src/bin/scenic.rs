fn main() {
    std::process::exit(scenic::cli::main());
}
