fn main() {
    std::process::exit(ergodic_core::cli::main_with(std::env::args_os()));
}
