fn main() {
    std::process::exit(pb210_cli::dispatch(std::env::args_os()));
}
