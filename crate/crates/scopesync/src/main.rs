fn main() {
    std::process::exit(scopesync::cli::run(std::env::args()));
}
