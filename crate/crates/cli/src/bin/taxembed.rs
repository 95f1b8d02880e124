fn main() {
    std::process::exit(taxembed_cli::run(std::env::args_os()));
}
