fn main() {
    std::process::exit(nullcone::cli::run(std::env::args_os()));
}
