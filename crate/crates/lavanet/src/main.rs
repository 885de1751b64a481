fn main() {
    std::process::exit(lavanet::cli::main_entry());
}
