fn main() {
    std::process::exit(epicast::cli::main());
}
