fn main() {
    std::process::exit(ion_addressing::cli::run());
}
