fn main() {
    std::process::exit(planex::cli::main());
}
