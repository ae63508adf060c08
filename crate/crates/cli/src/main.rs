fn main() {
    std::process::exit(crlab_cli::run_cli(std::env::args_os()));
}
