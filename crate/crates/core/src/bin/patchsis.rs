fn main() {
    std::process::exit(patchsis::cli::run(std::env::args_os()));
}
