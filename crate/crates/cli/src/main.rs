fn main() {
    std::process::exit(trustnet_cli::run_from_env());
}
