fn main() {
    std::process::exit(pcq::cli::run(std::env::args().skip(1)));
}
