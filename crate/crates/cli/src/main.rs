fn main() {
    std::process::exit(rht_cli::run(std::env::args_os()));
}
