fn main() {
    std::process::exit(fermat_cli::run(std::env::args_os()));
}
