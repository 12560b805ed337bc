fn main() {
    std::process::exit(tagmap::cli::main());
}
