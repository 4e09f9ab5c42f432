fn main() {
    std::process::exit(phev_sim::cli::main_with_args(std::env::args_os()));
}
