fn main() {
    std::process::exit(nelson_sta_cli::run(std::env::args_os()));
}
