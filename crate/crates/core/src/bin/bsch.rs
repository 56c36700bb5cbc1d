fn main() {
    std::process::exit(bsch::cli::main(std::env::args_os()));
}
