fn main() {
    let code = momgmm::cli::run(std::env::args().skip(1).collect());
    std::process::exit(code);
}
