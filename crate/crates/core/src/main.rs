fn main() {
    std::process::exit(simta::cli::main_entry());
}
