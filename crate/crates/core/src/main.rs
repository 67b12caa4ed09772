fn main() {
    std::process::exit(seamfuse::cli::run());
}
