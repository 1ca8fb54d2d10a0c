fn main() {
    std::process::exit(fracenv::cli::main(std::env::args_os()));
}
