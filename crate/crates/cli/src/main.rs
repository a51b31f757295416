fn main() {
    std::process::exit(hypstat::main_with(std::env::args_os()));
}
