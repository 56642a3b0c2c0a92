fn main() {
    stochlab::cli::main_entry()
}
