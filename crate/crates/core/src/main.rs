fn main() {
    std::process::exit(patent_analytics::cli::run(std::env::args_os()));
}
