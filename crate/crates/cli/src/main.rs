fn main() {
    std::process::exit(erwlab_cli::run_cli(std::env::args_os()));
}
