fn main() {
    std::process::exit(qspec::cli::run(std::env::args_os()));
}
