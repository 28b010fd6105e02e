fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(nsmkl::cli::run(argv));
}
