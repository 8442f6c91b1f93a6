fn main() {
    std::process::exit(clocklab_cli::run(std::env::args_os()));
}
