fn main() {
    std::process::exit(dpifp::cli::run());
}
