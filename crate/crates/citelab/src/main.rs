fn main() {
    if let Err(err) = citelab::cli::run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
