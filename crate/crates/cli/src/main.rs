fn main() {
    std::process::exit(normap_cli::main_entry());
}
