fn main() {
    std::process::exit(partial_gait::cli::run(std::env::args_os()));
}
