fn main() {
    std::process::exit(ris_ask::cli::run(std::env::args().collect()));
}
