fn main() {
    std::process::exit(glider::cli::main());
}
