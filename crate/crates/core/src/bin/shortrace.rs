fn main() {
    std::process::exit(shortrace::harness::main_entry());
}
