fn main() {
    std::process::exit(mbrforge::cli::main());
}
