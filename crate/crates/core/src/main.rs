fn main() {
    std::process::exit(consensus_fdi::cli::run_from_env());
}
