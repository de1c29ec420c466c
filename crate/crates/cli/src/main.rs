fn main() {
    std::process::exit(oed_cli::run(std::env::args_os()));
}
