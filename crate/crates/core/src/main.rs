fn main() {
    std::process::exit(painleve_joyce::cli::run(std::env::args_os()));
}
